#include "hpcadvisor/service.hpp"

#include <fmt/format.h>

#include "hpcadvisor/errors.hpp"
#include "hpcadvisor/plotter.hpp"
#include "httplib.h"
#include "json.hpp"

namespace hpcadvisor {

using nlohmann::json;

struct Service::Job {
  std::string handle;
  std::string deployment;
  std::mutex mutex;
  std::string state = "running";  // running | finished | failed
  TaskList snapshot;
  std::uint64_t revision = 0;
  std::optional<CollectionReport> report;
  std::string error;
  std::atomic<bool> stop{false};
  std::thread worker;
};

const std::vector<Endpoint>& Service::endpoints() {
  static const std::vector<Endpoint> table = {
      {"POST", "/api/v1/deployments", "deploy create", "Create a deployment from a config"},
      {"GET", "/api/v1/deployments", "deploy list", "List deployments with their state"},
      {"POST", "/api/v1/deployments/:id/shutdown", "deploy shutdown", "Shut down a deployment"},
      {"POST", "/api/v1/collections", "collect", "Start a collection pass; returns a handle"},
      {"GET", "/api/v1/collections/:handle", "collect", "Poll collection status"},
      {"GET", "/api/v1/plot", "plot", "Render a plot (SVG) for a kind and filter"},
      {"GET", "/api/v1/advice", "advice", "Pareto-front advice rows for a filter"},
      {"GET", "/", "gui", "Browser UI bundle"},
      {"GET", "/api/v1/commands", "", "This parity table"},
  };
  return table;
}

namespace {

json error_body(const std::string& message) { return json{{"error", message}}; }

json deployment_json(const Deployment& d) {
  json resources = json::array();
  for (const auto& r : d.resources) resources.push_back({{"kind", to_string(r.kind)}, {"name", r.name}});
  json j = {{"id", d.id},
            {"region", d.region},
            {"state", to_string(d.state)},
            {"resources", resources},
            {"pool_creations", d.pool_creations},
            {"pool", nullptr}};
  if (d.pool)
    j["pool"] = {{"sku", d.pool->sku}, {"current_nodes", d.pool->current_nodes}, {"high_water", d.pool->high_water}};
  return j;
}

json report_json(const CollectionReport& r) {
  return {{"executed", r.executed},
          {"previously_completed", r.previously_completed},
          {"skipped_by_sampler", r.skipped_by_sampler},
          {"failed", r.failed},
          {"remaining_pending", r.remaining_pending},
          {"pool_creations", r.pool_creations},
          {"setups", r.setups},
          {"wall_time", r.wall_time},
          {"interrupted", r.interrupted}};
}

// Inline text wins over a path; the service default is the last resort.
std::optional<std::string> document(const json& body, const char* inline_key, const char* path_key,
                                    const std::optional<std::filesystem::path>& fallback) {
  if (auto it = body.find(inline_key); it != body.end() && it->is_string()) return it->get<std::string>();
  if (auto it = body.find(path_key); it != body.end() && it->is_string())
    return read_text_file(it->get<std::string>());
  if (fallback) return read_text_file(*fallback);
  return std::nullopt;
}

json parse_body(const std::string& body) {
  if (body.find_first_not_of(" \t\r\n") == std::string::npos) return json::object();
  auto j = json::parse(body);
  if (!j.is_object()) throw ConfigError("body", "request body must be a JSON object");
  return j;
}

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(2) + "\n", "application/json");
}

template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const json::exception& e) {
    reply(res, 400, error_body(fmt::format("malformed request: {}", e.what())));
  } catch (const NotFoundError& e) {
    reply(res, 404, error_body(e.what()));
  } catch (const StateError& e) {
    reply(res, 409, error_body(e.what()));
  } catch (const ConfigError& e) {
    reply(res, 400, error_body(e.what()));
  } catch (const ParseError& e) {
    reply(res, 400, error_body(e.what()));
  } catch (const Error& e) {
    reply(res, 400, error_body(e.what()));
  } catch (const std::exception& e) {
    reply(res, 500, error_body(e.what()));
  }
}

std::vector<std::string> filter_params(const httplib::Request& req) {
  std::vector<std::string> terms;
  auto range = req.params.equal_range("filter");
  for (auto it = range.first; it != range.second; ++it) terms.push_back(it->second);
  return terms;
}

const char* kPlaceholderPage = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>hpcadvisor</title></head>
<body><h1>hpcadvisor</h1>
<p>No UI bundle is installed. Start the service with <code>--ui-dir</code> to serve one.
The API is available under <code>/api/v1</code>; see <a href="/api/v1/commands">/api/v1/commands</a>.</p>
</body></html>
)";

}  // namespace

Service::Service(ServiceOptions options)
    : options_(std::move(options)), cloud_(SimCloud::load(options_.workspace.deployments_file())) {}

Service::~Service() {
  stop();
  std::shared_ptr<Job> job;
  {
    std::lock_guard lock(jobs_mutex_);
    job = running_;
  }
  if (job) job->stop = true;
  std::vector<std::shared_ptr<Job>> all;
  {
    std::lock_guard lock(jobs_mutex_);
    for (auto& [h, j] : jobs_) all.push_back(j);
  }
  for (auto& j : all)
    if (j->worker.joinable()) j->worker.join();
}

std::string Service::create_deployment(const std::string& body_text, int& status) {
  auto body = parse_body(body_text);
  auto text = document(body, "config", "config_path", options_.config);
  if (!text) throw ConfigError("config", "request needs 'config' or 'config_path'");
  auto config = parse_sweep_config(*text);
  std::lock_guard lock(cloud_mutex_);
  std::string suffix = body.contains("suffix") ? body["suffix"].get<std::string>() : cloud_.next_suffix(config.rgprefix);
  auto d = cloud_.create_deployment(config, suffix);
  cloud_.save(options_.workspace.deployments_file());
  status = 201;
  return deployment_json(d).dump(2) + "\n";
}

std::string Service::start_collection(const std::string& body_text, int& status) {
  auto body = parse_body(body_text);
  CollectRequest request;
  auto config_text = document(body, "config", "config_path", options_.config);
  if (!config_text) throw ConfigError("config", "request needs 'config' or 'config_path'");
  request.config = parse_sweep_config(*config_text);
  auto pricing_text = document(body, "pricing", "pricing_path", options_.pricing);
  if (!pricing_text) throw ConfigError("pricing", "request needs 'pricing' or 'pricing_path'");
  request.pricing = load_pricing(*pricing_text);
  if (auto it = body.find("model"); it != body.end() && it->is_object())
    request.model = parse_perf_model(it->dump());
  else if (auto m = document(body, "model_text", "model_path", options_.model))
    request.model = parse_perf_model(*m);
  if (body.contains("backend")) request.backend = parse_backend_kind(body["backend"].get<std::string>());
  if (body.contains("seed")) request.seed = body["seed"].get<std::uint64_t>();
  if (body.contains("teardown")) request.teardown = parse_teardown_mode(body["teardown"].get<std::string>());
  if (auto it = body.find("sampler"); it != body.end()) {
    if (it->is_object()) {
      SamplerOptions s;
      s.margin = it->value("margin", s.margin);
      s.min_samples = it->value("min_samples", s.min_samples);
      s.discard = it->value("discard", s.discard);
      s.regression = it->value("regression", s.regression);
      request.sampler = s;
    } else if (it->is_boolean() && it->get<bool>()) {
      request.sampler = SamplerOptions{};
    }
  }
  request.retry_failed = body.value("retry_failed", false);
  request.fresh = body.value("fresh", false);
  if (body.contains("max_tasks")) request.max_tasks = body["max_tasks"].get<std::size_t>();

  if (auto it = body.find("deployment"); it != body.end() && it->is_string()) {
    request.deployment = it->get<std::string>();
  } else if (auto picked = pick_deployment(cloud_, request.config.rgprefix)) {
    request.deployment = *picked;
  } else {
    throw NotFoundError(fmt::format("no active deployment for rgprefix '{}'", request.config.rgprefix));
  }
  const auto d = cloud_.get(request.deployment);
  if (d.state != DeploymentState::active)
    throw StateError(fmt::format("deployment '{}' is {}", d.id, to_string(d.state)));
  check_config_against_pricing(request.config, request.pricing);

  std::lock_guard lock(jobs_mutex_);
  if (running_) {
    std::lock_guard job_lock(running_->mutex);
    if (running_->state == "running")
      throw StateError(fmt::format("collection '{}' is already running on this dataset", running_->handle));
  }
  if (running_ && running_->worker.joinable()) running_->worker.join();

  auto job = std::make_shared<Job>();
  job->handle = fmt::format("c{}", next_handle_++);
  job->deployment = request.deployment;
  job->snapshot = generate_tasks(request.config, request.pricing);
  jobs_[job->handle] = job;
  running_ = job;

  job->worker = std::thread([this, job, request = std::move(request)] {
    CollectHooks hooks;
    hooks.stop_requested = [job] { return job->stop.load(); };
    hooks.on_status_change = [job](const TaskList& list) {
      std::lock_guard l(job->mutex);
      job->snapshot = list;
      ++job->revision;
    };
    try {
      auto report = run_collection(options_.workspace, cloud_, request, hooks);
      std::lock_guard l(job->mutex);
      job->report = report;
      job->state = "finished";
      ++job->revision;
    } catch (const std::exception& e) {
      std::lock_guard l(job->mutex);
      job->error = e.what();
      job->state = "failed";
      ++job->revision;
    }
  });

  status = 202;
  return json{{"handle", job->handle}, {"deployment", job->deployment}, {"state", "running"}}.dump(2) + "\n";
}

std::string Service::collection_status(const std::string& handle, int& status) {
  std::shared_ptr<Job> job;
  {
    std::lock_guard lock(jobs_mutex_);
    auto it = jobs_.find(handle);
    if (it == jobs_.end()) throw NotFoundError(fmt::format("unknown collection handle '{}'", handle));
    job = it->second;
  }
  std::lock_guard lock(job->mutex);
  const auto counts = job->snapshot.counts();
  json tasks = json::array();
  for (const auto& t : job->snapshot.tasks)
    tasks.push_back({{"id", t.id},
                     {"sku", t.sku},
                     {"nnodes", t.nnodes},
                     {"ppn", t.ppn},
                     {"appinputs", t.appinputs},
                     {"status", to_string(t.status)}});
  status = 200;
  return json{{"handle", job->handle},
              {"deployment", job->deployment},
              {"state", job->state},
              {"revision", job->revision},
              {"counts",
               {{"pending", counts.pending},
                {"failed", counts.failed},
                {"completed", counts.completed},
                {"total", counts.total()}}},
              {"tasks", tasks},
              {"report", job->report ? report_json(*job->report) : json(nullptr)},
              {"error", job->error}}
             .dump(2) +
         "\n";
}

void Service::register_routes(httplib::Server& server) {
  server.Get("/api/v1/commands", [](const httplib::Request&, httplib::Response& res) {
    json rows = json::array();
    for (const auto& e : endpoints())
      rows.push_back({{"method", e.method}, {"path", e.path}, {"cli", e.cli_command}, {"description", e.description}});
    reply(res, 200, json{{"endpoints", rows}});
  });

  server.Get("/api/v1/deployments", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      json arr = json::array();
      for (const auto& d : cloud_.list()) arr.push_back(deployment_json(d));
      reply(res, 200, json{{"deployments", arr}});
    });
  });

  server.Post("/api/v1/deployments", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      int status = 500;
      auto body = create_deployment(req.body, status);
      res.status = status;
      res.set_content(body, "application/json");
    });
  });

  server.Post("/api/v1/deployments/:id/shutdown", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto id = req.path_params.at("id");
      {
        std::lock_guard lock(jobs_mutex_);
        if (running_ && running_->deployment == id) {
          std::lock_guard job_lock(running_->mutex);
          if (running_->state == "running")
            throw StateError(fmt::format("deployment '{}' has a running collection", id));
        }
      }
      std::lock_guard lock(cloud_mutex_);
      cloud_.shutdown_deployment(id);
      cloud_.save(options_.workspace.deployments_file());
      reply(res, 200, deployment_json(cloud_.get(id)));
    });
  });

  server.Post("/api/v1/collections", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      int status = 500;
      auto body = start_collection(req.body, status);
      res.status = status;
      res.set_content(body, "application/json");
    });
  });

  server.Get("/api/v1/collections/:handle", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      int status = 500;
      auto body = collection_status(req.path_params.at("handle"), status);
      res.status = status;
      res.set_content(body, "application/json");
    });
  });

  server.Get("/api/v1/advice", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto filter = parse_filter_terms(filter_params(req));
      const auto key = req.has_param("sort") ? parse_sort_key(req.get_param_value("sort")) : SortKey::time;
      PricingCatalog pricing;
      if (options_.pricing) pricing = load_pricing_file(*options_.pricing);
      DatasetStore store(options_.workspace.dataset);
      auto result = advice(store, filter, pricing, key);
      res.status = 200;
      res.set_content(advice_to_json(result), "application/json");
    });
  });

  server.Get("/api/v1/plot", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      PlotSpec spec;
      spec.kind = req.has_param("kind") ? parse_plot_kind(req.get_param_value("kind")) : PlotKind::time_vs_nodes;
      spec.filter = parse_filter_terms(filter_params(req));
      if (req.has_param("subtitle")) spec.subtitle = req.get_param_value("subtitle");
      spec.log_x = req.has_param("log_x") && req.get_param_value("log_x") != "false" && req.get_param_value("log_x") != "0";
      DatasetStore store(options_.workspace.dataset);
      const auto records = store.query(spec.filter);
      if (records.empty()) throw NotFoundError("no records match the plot filter");
      auto plot = render(build_series(records, spec.kind), spec);
      res.status = 200;
      res.set_content(plot.svg, "image/svg+xml");
    });
  });

  if (options_.ui_dir && std::filesystem::is_directory(*options_.ui_dir)) {
    server.set_mount_point("/", options_.ui_dir->string());
  } else {
    server.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(kPlaceholderPage, "text/html");
    });
  }
}

bool Service::listen(const std::string& host, int port) {
  server_ = std::make_unique<httplib::Server>();
  register_routes(*server_);
  return server_->listen(host, port);
}

int Service::start_background(const std::string& host) {
  server_ = std::make_unique<httplib::Server>();
  register_routes(*server_);
  int port = server_->bind_to_any_port(host);
  if (port < 0) throw Error("cannot bind HTTP service");
  server_thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port;
}

void Service::stop() {
  if (server_) server_->stop();
  if (server_thread_.joinable()) server_thread_.join();
}

void Service::wait_for_collection() {
  std::shared_ptr<Job> job;
  {
    std::lock_guard lock(jobs_mutex_);
    job = running_;
  }
  if (job && job->worker.joinable()) job->worker.join();
}

}  // namespace hpcadvisor
