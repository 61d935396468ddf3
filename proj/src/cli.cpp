#include "hpcadvisor/cli.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <csignal>
#include <ostream>

#include "CLI11.hpp"
#include "hpcadvisor/app.hpp"
#include "hpcadvisor/errors.hpp"
#include "hpcadvisor/plotter.hpp"
#include "hpcadvisor/service.hpp"

namespace hpcadvisor::cli {

namespace {

std::atomic<bool> g_interrupted{false};

extern "C" void on_sigint(int) { g_interrupted = true; }

struct EmptyDataset : Error {
  using Error::Error;
};
struct MissingDeployment : Error {
  using Error::Error;
};
struct UsageError : Error {
  using Error::Error;
};

struct Options {
  std::string state_dir = ".hpcadvisor";
  std::string dataset = "hpcadvisor_dataset.jsonl";

  std::string config;
  std::string pricing;
  std::string deployment;
  std::string suffix;
  std::string backend = "sim";
  std::string model;
  std::string script;
  std::optional<std::uint64_t> seed;
  std::string teardown = "resize-to-zero";
  bool sampler = false;
  double margin = 0.05;
  std::size_t min_samples = 3;
  bool retry_failed = false;
  bool fresh = false;
  std::optional<std::size_t> max_tasks;
  double timeout = 3600.0;

  std::vector<std::string> kinds;
  std::vector<std::string> filters;
  std::string subtitle;
  std::string outdir = ".";
  bool log_x = false;

  std::string sort = "time";
  bool json = false;

  std::string host = "127.0.0.1";
  int port = 8080;
  std::string ui_dir;
};

struct Commands {
  CLI::App* deploy = nullptr;
  CLI::App* deploy_create = nullptr;
  CLI::App* deploy_list = nullptr;
  CLI::App* deploy_shutdown = nullptr;
  CLI::App* collect = nullptr;
  CLI::App* plot = nullptr;
  CLI::App* advice = nullptr;
  CLI::App* gui = nullptr;
};

void add_config(CLI::App* cmd, Options& o, bool required) {
  auto* opt = cmd->add_option("-c,--config", o.config, "Sweep configuration (YAML)")->envname("HPCADVISOR_CONFIG");
  if (required) opt->required();
}

void add_pricing(CLI::App* cmd, Options& o, bool required) {
  auto* opt = cmd->add_option("-p,--pricing", o.pricing, "Pricing catalog (CSV: sku,cores,price)")
                  ->envname("HPCADVISOR_PRICING");
  if (required) opt->required();
}

Commands build(CLI::App& app, Options& o) {
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--state", o.state_dir, "State directory")->capture_default_str();
  app.add_option("--dataset", o.dataset, "Dataset file (JSON lines)")->capture_default_str();

  Commands c;
  c.deploy = app.add_subcommand("deploy", "Manage cloud deployments");
  c.deploy->require_subcommand(1);
  c.deploy_create = c.deploy->add_subcommand("create", "Creates a cloud deployment");
  add_config(c.deploy_create, o, true);
  c.deploy_create->add_option("--suffix", o.suffix, "Deployment id suffix (default d<k>)");
  c.deploy_list = c.deploy->add_subcommand("list", "Lists deployments");
  c.deploy_shutdown = c.deploy->add_subcommand("shutdown", "Shuts down a deployment");
  c.deploy_shutdown->add_option("deployment", o.deployment, "Deployment id")->required();

  c.collect = app.add_subcommand("collect", "Collects data, i.e. runs all scenarios");
  add_config(c.collect, o, true);
  add_pricing(c.collect, o, true);
  c.collect->add_option("-n,--deployment", o.deployment, "Deployment id (default: latest for rgprefix)");
  c.collect->add_option("--backend", o.backend, "Execution back-end")
      ->check(CLI::IsMember({"sim", "local"}))
      ->capture_default_str();
  c.collect->add_option("--model", o.model, "Performance model (JSON) for the sim back-end");
  c.collect->add_option("--script", o.script, "Application script for the local back-end");
  c.collect->add_option("--seed", o.seed, "Simulator seed");
  c.collect->add_option("--teardown", o.teardown, "Pool teardown between skus")
      ->check(CLI::IsMember({"resize-to-zero", "delete"}))
      ->capture_default_str();
  c.collect->add_flag("--sampler", o.sampler, "Skip scenarios predicted to be Pareto-dominated");
  c.collect->add_option("--margin", o.margin, "Sampler safety margin")->capture_default_str();
  c.collect->add_option("--min-samples", o.min_samples, "Sampler minimum samples per sku")->capture_default_str();
  c.collect->add_flag("--retry-failed", o.retry_failed, "Re-run failed tasks");
  c.collect->add_flag("--fresh", o.fresh, "Discard the existing task file");
  c.collect->add_option("--max-tasks", o.max_tasks, "Stop after this many executions");
  c.collect->add_option("--timeout", o.timeout, "Per-task timeout in seconds (local back-end)")->capture_default_str();

  c.plot = app.add_subcommand("plot", "Generates plots from the dataset");
  c.plot->add_option("--kind", o.kinds, "Plot kind (repeatable; default all)")
      ->check(CLI::IsMember({"time_vs_nodes", "time_vs_cost", "speedup", "efficiency"}));
  c.plot->add_option("--filter", o.filters, "Data filter term (repeatable)");
  c.plot->add_option("--subtitle", o.subtitle, "Plot subtitle");
  c.plot->add_option("--outdir", o.outdir, "Output directory")->capture_default_str();
  c.plot->add_flag("--log-x", o.log_x, "Logarithmic x axis");

  c.advice = app.add_subcommand("advice", "Generates advice (i.e. Pareto front) using a given data filter");
  c.advice->add_option("--filter", o.filters, "Data filter term (repeatable)");
  c.advice->add_option("--sort", o.sort, "Sort key")->check(CLI::IsMember({"time", "cost"}))->capture_default_str();
  c.advice->add_flag("--json", o.json, "Emit JSON instead of a table");
  add_pricing(c.advice, o, false);

  c.gui = app.add_subcommand("gui", "Starts the GUI mode");
  c.gui->add_option("--host", o.host, "Listen address")->capture_default_str();
  c.gui->add_option("--port", o.port, "Listen port")->capture_default_str();
  c.gui->add_option("--ui-dir", o.ui_dir, "Static UI bundle directory");
  add_config(c.gui, o, false);
  add_pricing(c.gui, o, false);
  c.gui->add_option("--model", o.model, "Performance model (JSON) for the sim back-end");
  return c;
}

Workspace workspace(const Options& o) { return Workspace{o.state_dir, o.dataset}; }

SimCloud load_cloud(const Workspace& ws) { return SimCloud::load(ws.deployments_file()); }

int run_deploy_create(const Options& o, std::ostream& out) {
  const auto ws = workspace(o);
  const auto config = load_sweep_config_file(o.config);
  auto cloud = load_cloud(ws);
  const auto suffix = o.suffix.empty() ? cloud.next_suffix(config.rgprefix) : o.suffix;
  const auto d = cloud.create_deployment(config, suffix);
  cloud.save(ws.deployments_file());
  out << fmt::format("created {} ({} resources, region {})\n", d.id, d.resources.size(), d.region);
  return kOk;
}

int run_deploy_list(const Options& o, std::ostream& out) {
  const auto cloud = load_cloud(workspace(o));
  const auto all = cloud.list();
  if (all.empty()) {
    out << "no deployments\n";
    return kOk;
  }
  out << fmt::format("{:<24}{:<10}{:<18}{}\n", "ID", "STATE", "REGION", "POOL");
  for (const auto& d : all) {
    std::string pool = "-";
    if (d.pool) pool = fmt::format("{} x{}", d.pool->sku, d.pool->current_nodes);
    out << fmt::format("{:<24}{:<10}{:<18}{}\n", d.id, to_string(d.state), d.region, pool);
  }
  return kOk;
}

int run_deploy_shutdown(const Options& o, std::ostream& out) {
  const auto ws = workspace(o);
  auto cloud = load_cloud(ws);
  if (!cloud.contains(o.deployment)) throw MissingDeployment(fmt::format("no deployment '{}'", o.deployment));
  cloud.shutdown_deployment(o.deployment);
  cloud.save(ws.deployments_file());
  out << fmt::format("shut down {}\n", o.deployment);
  return kOk;
}

int run_collect(const Options& o, std::ostream& out) {
  const auto ws = workspace(o);
  CollectRequest request;
  request.config = load_sweep_config_file(o.config);
  request.pricing = load_pricing_file(o.pricing);
  check_config_against_pricing(request.config, request.pricing);
  request.backend = parse_backend_kind(o.backend);
  if (!o.model.empty()) request.model = load_perf_model_file(o.model);
  if (!o.script.empty()) request.script = o.script;
  request.seed = o.seed;
  request.teardown = parse_teardown_mode(o.teardown);
  if (o.sampler) {
    SamplerOptions s;
    s.margin = o.margin;
    s.min_samples = o.min_samples;
    request.sampler = s;
  }
  request.retry_failed = o.retry_failed;
  request.fresh = o.fresh;
  request.max_tasks = o.max_tasks;
  request.timeout = std::chrono::milliseconds(static_cast<long long>(o.timeout * 1000.0));

  auto cloud = load_cloud(ws);
  if (!o.deployment.empty()) {
    if (!cloud.contains(o.deployment)) throw MissingDeployment(fmt::format("no deployment '{}'", o.deployment));
    request.deployment = o.deployment;
  } else if (auto picked = pick_deployment(cloud, request.config.rgprefix)) {
    request.deployment = *picked;
  } else {
    throw MissingDeployment(
        fmt::format("no active deployment for rgprefix '{}'; run 'deploy create' first", request.config.rgprefix));
  }
  if (cloud.get(request.deployment).state != DeploymentState::active)
    throw MissingDeployment(fmt::format("deployment '{}' is not active", request.deployment));

  g_interrupted = false;
  auto previous = std::signal(SIGINT, on_sigint);
  CollectHooks hooks;
  hooks.stop_requested = [] { return g_interrupted.load(); };
  CollectionReport report;
  try {
    report = run_collection(ws, cloud, request, hooks);
  } catch (...) {
    std::signal(SIGINT, previous);
    throw;
  }
  std::signal(SIGINT, previous);

  out << fmt::format("deployment {}\n", request.deployment);
  out << fmt::format("executed {}, previously completed {}, skipped {}, failed {}, pending {}\n", report.executed,
                     report.previously_completed, report.skipped_by_sampler, report.failed, report.remaining_pending);
  out << fmt::format("pool creations {}, setups {}\n", report.pool_creations, report.setups);
  if (report.interrupted) out << "interrupted; re-run collect to resume\n";
  return report.failed > 0 ? kFailure : kOk;
}

int run_plot(const Options& o, std::ostream& out) {
  const auto ws = workspace(o);
  DatasetStore store(ws.dataset);
  const auto filter = parse_filter_terms(o.filters);
  const auto records = store.query(filter);
  if (records.empty()) throw EmptyDataset(fmt::format("no records in {} match the filter", ws.dataset.string()));
  std::vector<PlotKind> kinds;
  if (o.kinds.empty())
    kinds.assign(std::begin(kAllPlotKinds), std::end(kAllPlotKinds));
  else
    for (const auto& k : o.kinds) kinds.push_back(parse_plot_kind(k));
  std::filesystem::create_directories(o.outdir);
  for (auto kind : kinds) {
    PlotSpec spec;
    spec.kind = kind;
    spec.filter = filter;
    spec.subtitle = o.subtitle;
    spec.log_x = o.log_x;
    const auto path = std::filesystem::path(o.outdir) / plot_output_path(spec);
    write_plot(render(build_series(records, kind), spec), path);
    out << path.string() << "\n";
  }
  return kOk;
}

int run_advice(const Options& o, std::ostream& out) {
  const auto ws = workspace(o);
  DatasetStore store(ws.dataset);
  PricingCatalog pricing;
  if (!o.pricing.empty()) pricing = load_pricing_file(o.pricing);
  const auto filter = parse_filter_terms(o.filters);
  const auto result = advice(store, filter, pricing, parse_sort_key(o.sort));
  if (result.rows.empty()) throw EmptyDataset(fmt::format("no records in {} match the filter", ws.dataset.string()));
  out << (o.json ? advice_to_json(result) : format_advice_table(result));
  return kOk;
}

int run_gui(const Options& o, std::ostream& out) {
  ServiceOptions so;
  so.workspace = workspace(o);
  if (!o.config.empty()) so.config = o.config;
  if (!o.pricing.empty()) so.pricing = o.pricing;
  if (!o.model.empty()) so.model = o.model;
  if (!o.ui_dir.empty()) so.ui_dir = o.ui_dir;
  Service service(so);
  out << fmt::format("serving on http://{}:{}/\n", o.host, o.port) << std::flush;
  if (!service.listen(o.host, o.port)) throw Error(fmt::format("cannot listen on {}:{}", o.host, o.port));
  return kOk;
}

std::string one_line(std::string text) {
  std::replace(text.begin(), text.end(), '\n', ' ');
  return text;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cloud HPC sweep advisor", "hpcadvisor"};
  Options o;
  const auto c = build(app, o);
  for (std::size_t i = 0; i < args.size(); ++i) {
    const auto& a = args[i];
    if (a == "--state" || a == "--dataset") {
      ++i;
      continue;
    }
    if (a.empty() || a[0] == '-') continue;
    const auto subs = app.get_subcommands([&](const CLI::App* s) { return s->check_name(a); });
    if (subs.empty()) {
      err << fmt::format("error: unknown command '{}'\n", a);
      err << app.help();
      return kUsage;
    }
    break;
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << one_line(e.what()) << "\n";
    err << app.help();
    return kUsage;
  }

  try {
    if (c.deploy_create->parsed()) return run_deploy_create(o, out);
    if (c.deploy_list->parsed()) return run_deploy_list(o, out);
    if (c.deploy_shutdown->parsed()) return run_deploy_shutdown(o, out);
    if (c.collect->parsed()) return run_collect(o, out);
    if (c.plot->parsed()) return run_plot(o, out);
    if (c.advice->parsed()) return run_advice(o, out);
    if (c.gui->parsed()) return run_gui(o, out);
    err << app.help();
    return kUsage;
  } catch (const MissingDeployment& e) {
    err << "error: " << one_line(e.what()) << "\n";
    return kMissingDeployment;
  } catch (const EmptyDataset& e) {
    err << "error: " << one_line(e.what()) << "\n";
    return kEmptyDataset;
  } catch (const ConfigError& e) {
    err << "config error: " << one_line(e.what()) << "\n";
    return kConfigError;
  } catch (const ParseError& e) {
    err << "parse error: " << one_line(e.what()) << "\n";
    return kConfigError;
  } catch (const NotFoundError& e) {
    err << "error: " << one_line(e.what()) << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << one_line(e.what()) << "\n";
    return kFailure;
  }
}

std::vector<std::string> command_names() {
  CLI::App app;
  Options o;
  build(app, o);
  std::vector<std::string> names;
  auto walk = [&](auto&& self, const CLI::App* node, const std::string& prefix) -> void {
    for (const auto* sub : node->get_subcommands([](const CLI::App*) { return true; })) {
      const auto name = prefix.empty() ? sub->get_name() : prefix + " " + sub->get_name();
      if (sub->get_subcommands([](const CLI::App*) { return true; }).empty())
        names.push_back(name);
      else
        self(self, sub, name);
    }
  };
  walk(walk, &app, "");
  return names;
}

}  // namespace hpcadvisor::cli
