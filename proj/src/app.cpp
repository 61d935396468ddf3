#include "hpcadvisor/app.hpp"

#include <sstream>

#include <fmt/format.h>

#include "hpcadvisor/errors.hpp"

namespace hpcadvisor {

std::filesystem::path Workspace::task_file(std::string_view deployment) const {
  return state_dir / fmt::format("tasks-{}.json", deployment);
}

std::filesystem::path Workspace::run_dir(std::string_view deployment) const {
  return state_dir / "runs" / std::string(deployment);
}

namespace {

std::string unquote(std::string s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\'')))
    return s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

DataFilter parse_filter_terms(std::span<const std::string> terms) {
  DataFilter f;
  for (const auto& term : terms) {
    auto eq = term.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("filter", fmt::format("filter term '{}' is not NAME=VALUE", term));
    auto name = term.substr(0, eq);
    auto value = unquote(term.substr(eq + 1));
    if (name == "sku") {
      for (auto& s : split_commas(value)) f.skus.insert(canonical_sku(s));
    } else if (name == "nnodes") {
      for (auto& s : split_commas(value)) {
        try {
          std::size_t used = 0;
          int n = std::stoi(s, &used);
          if (used != s.size() || n < 1) throw std::invalid_argument(s);
          f.nnodes.insert(n);
        } catch (const std::exception&) {
          throw ConfigError("filter", fmt::format("invalid node count '{}'", s));
        }
      }
    } else if (name.starts_with("tag.") || name.starts_with("tag:")) {
      if (name.size() == 4) throw ConfigError("filter", "empty tag name");
      f.tags[name.substr(4)] = value;
    } else {
      f.appinputs[name] = value;
    }
  }
  return f;
}

PerfModel default_perf_model() {
  PerfModel m;
  m.seed = 0;
  m.noise_sigma = 0.02;
  m.entries.push_back({"*", {}, PerfParams{20.0, 200000.0, 0.5, std::nullopt, 60.0}});
  return m;
}

BackendKind parse_backend_kind(std::string_view text) {
  if (text == "sim") return BackendKind::sim;
  if (text == "local") return BackendKind::local;
  throw ConfigError("backend", fmt::format("unknown backend '{}' (expected sim or local)", text));
}

std::optional<std::string> pick_deployment(const SimCloud& cloud, std::string_view rgprefix) {
  std::optional<std::string> pick;
  for (const auto& d : cloud.list())
    if (d.state == DeploymentState::active && d.id.starts_with(rgprefix)) pick = d.id;
  return pick;
}

CollectionReport run_collection(const Workspace& ws, SimCloud& cloud, const CollectRequest& request,
                                const CollectHooks& hooks) {
  const auto deployment = cloud.get(request.deployment);
  if (deployment.state != DeploymentState::active)
    throw StateError(fmt::format("deployment '{}' is {}", deployment.id, to_string(deployment.state)));

  std::filesystem::create_directories(ws.state_dir);
  const auto fresh = generate_tasks(request.config, request.pricing);
  const auto task_path = ws.task_file(deployment.id);
  if (request.fresh) std::filesystem::remove(task_path);
  auto file = TaskFile::open_or_create(task_path, fresh);

  DatasetStore store(ws.dataset);
  std::unique_ptr<SamplingStrategy> sampler;
  if (request.sampler) sampler = std::make_unique<ParetoSampler>(request.pricing, *request.sampler);

  std::unique_ptr<ExecutorBackend> backend;
  if (request.backend == BackendKind::sim) {
    auto model = request.model;
    if (request.seed) model.seed = *request.seed;
    backend = std::make_unique<SimBackend>(cloud, std::move(model), deployment.id);
  } else {
    auto script_path = request.script.value_or(std::filesystem::path(request.config.appsetupurl));
    LocalBackendOptions opts;
    opts.workdir = std::filesystem::absolute(ws.run_dir(deployment.id));
    opts.timeout = request.timeout;
    auto local = std::make_unique<LocalBackend>(validate_app_script(script_path), opts);
    local->create_deployment(request.config);
    local->set_deployment_id(deployment.id);
    backend = std::move(local);
  }

  std::size_t executed = 0;
  CollectOptions options;
  options.teardown = request.teardown;
  options.sampler = sampler.get();
  options.retry_failed = request.retry_failed;
  options.clock = hooks.clock;
  options.stop_requested = [&] {
    if (request.max_tasks && executed >= *request.max_tasks) return true;
    return hooks.stop_requested && hooks.stop_requested();
  };
  std::size_t last_completed = file.list().counts().completed;
  options.on_status_change = [&](const TaskList& list) {
    file.save();
    const auto completed = list.counts().completed;
    executed += completed - std::min(completed, last_completed);
    last_completed = completed;
    if (hooks.on_status_change) hooks.on_status_change(list);
  };
  if (hooks.on_status_change) hooks.on_status_change(file.list());
  auto report = process_tasks(file.mutable_list(), *backend, store, request.pricing, options);
  file.save();
  cloud.save(ws.deployments_file());
  return report;
}

}  // namespace hpcadvisor
