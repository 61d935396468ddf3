#include "hpcadvisor/simcloud.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <thread>

#include <fmt/format.h>

#include "hpcadvisor/errors.hpp"
#include "hpcadvisor/hash.hpp"
#include "json.hpp"

namespace hpcadvisor {

using nlohmann::json;

std::string_view to_string(DeploymentState state) noexcept {
  switch (state) {
    case DeploymentState::created: return "created";
    case DeploymentState::active: return "active";
    case DeploymentState::shutdown: return "shutdown";
  }
  return "created";
}

std::string_view to_string(ResourceKind kind) noexcept {
  switch (kind) {
    case ResourceKind::variables: return "variables";
    case ResourceKind::resource_group: return "resource-group";
    case ResourceKind::virtual_network: return "virtual-network";
    case ResourceKind::subnet: return "subnet";
    case ResourceKind::storage_account: return "storage-account";
    case ResourceKind::batch_service: return "batch-service";
    case ResourceKind::jumpbox: return "jumpbox";
    case ResourceKind::vnet_peering: return "vnet-peering";
  }
  return "variables";
}

namespace {

DeploymentState parse_state(std::string_view s) {
  if (s == "created") return DeploymentState::created;
  if (s == "active") return DeploymentState::active;
  if (s == "shutdown") return DeploymentState::shutdown;
  throw ParseError(fmt::format("unknown deployment state '{}'", s), 0);
}

ResourceKind parse_kind(std::string_view s) {
  for (auto k : {ResourceKind::variables, ResourceKind::resource_group, ResourceKind::virtual_network,
                 ResourceKind::subnet, ResourceKind::storage_account, ResourceKind::batch_service,
                 ResourceKind::jumpbox, ResourceKind::vnet_peering})
    if (to_string(k) == s) return k;
  throw ParseError(fmt::format("unknown resource kind '{}'", s), 0);
}

std::string storage_name(std::string_view id) {
  // Storage account names: lowercase alphanumerics only, at most 24 chars.
  std::string out;
  for (char c : id)
    if (std::isalnum(static_cast<unsigned char>(c))) out.push_back(static_cast<char>(std::tolower(c)));
  out += "sa";
  if (out.size() > 24) out.erase(0, out.size() - 24);
  return out;
}

}  // namespace

Deployment provision_deployment(const SweepConfig& config, std::string_view suffix) {
  Deployment d;
  d.id = fmt::format("{}{}", config.rgprefix, suffix);
  d.region = config.region;
  d.resources.push_back({ResourceKind::variables, d.id + "-vars"});
  d.resources.push_back({ResourceKind::resource_group, d.id});
  d.resources.push_back({ResourceKind::virtual_network, d.id + "-vnet"});
  d.resources.push_back({ResourceKind::subnet, d.id + "-subnet"});
  d.resources.push_back({ResourceKind::storage_account, storage_name(d.id)});
  d.resources.push_back({ResourceKind::batch_service, d.id + "-batch"});
  if (config.createjumpbox) d.resources.push_back({ResourceKind::jumpbox, d.id + "-jumpbox"});
  if (config.peervpn && config.vpnrg && config.vpnvnet)
    d.resources.push_back({ResourceKind::vnet_peering, fmt::format("{}-to-{}-{}", d.id, *config.vpnrg, *config.vpnvnet)});
  d.state = DeploymentState::active;
  return d;
}

SimCloud::SimCloud(const SimCloud& other) {
  std::lock_guard lock(other.mutex_);
  node_quota_ = other.node_quota_;
  deployments_ = other.deployments_;
}

SimCloud& SimCloud::operator=(const SimCloud& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mutex_, other.mutex_);
  node_quota_ = other.node_quota_;
  deployments_ = other.deployments_;
  return *this;
}

Deployment SimCloud::create_deployment(const SweepConfig& config, std::string_view suffix) {
  auto d = provision_deployment(config, suffix);
  std::lock_guard lock(mutex_);
  for (const auto& existing : deployments_)
    if (existing.id == d.id) throw StateError(fmt::format("deployment '{}' already exists", d.id));
  deployments_.push_back(d);
  return d;
}

std::string SimCloud::next_suffix(std::string_view rgprefix) const {
  std::lock_guard lock(mutex_);
  for (int k = 1;; ++k) {
    auto suffix = fmt::format("d{}", k);
    auto id = fmt::format("{}{}", rgprefix, suffix);
    if (std::none_of(deployments_.begin(), deployments_.end(), [&](const Deployment& d) { return d.id == id; }))
      return suffix;
  }
}

Deployment SimCloud::get(std::string_view id) const {
  std::lock_guard lock(mutex_);
  for (const auto& d : deployments_)
    if (d.id == id) return d;
  throw NotFoundError(fmt::format("deployment '{}' not found", id));
}

bool SimCloud::contains(std::string_view id) const {
  std::lock_guard lock(mutex_);
  return std::any_of(deployments_.begin(), deployments_.end(), [&](const Deployment& d) { return d.id == id; });
}

std::vector<Deployment> SimCloud::list() const {
  std::lock_guard lock(mutex_);
  return deployments_;
}

Deployment& SimCloud::active(std::string_view id) {
  for (auto& d : deployments_) {
    if (d.id != id) continue;
    if (d.state != DeploymentState::active)
      throw StateError(fmt::format("deployment '{}' is {}", id, to_string(d.state)));
    return d;
  }
  throw NotFoundError(fmt::format("deployment '{}' not found", id));
}

void SimCloud::resize_pool(std::string_view id, const std::string& sku, int nnodes) {
  std::lock_guard lock(mutex_);
  auto& d = active(id);
  if (nnodes < 0) throw BackendError("pool size must be nonnegative");
  if (nnodes > node_quota_)
    throw StateError(fmt::format("resize to {} nodes exceeds quota of {}", nnodes, node_quota_));
  if (!d.pool || canonical_sku(d.pool->sku) != canonical_sku(sku)) {
    const int creations = d.pool ? d.pool->creations : 0;
    d.pool = PoolState{sku, 0, 0, creations + 1};
    ++d.pool_creations;
  }
  d.pool->current_nodes = nnodes;
  d.pool->high_water = std::max(d.pool->high_water, nnodes);
}

void SimCloud::teardown_pool(std::string_view id, TeardownMode mode) {
  std::lock_guard lock(mutex_);
  auto& d = active(id);
  if (!d.pool) return;
  if (mode == TeardownMode::remove)
    d.pool.reset();
  else
    d.pool->current_nodes = 0;
}

void SimCloud::shutdown_deployment(std::string_view id) {
  std::lock_guard lock(mutex_);
  auto& d = active(id);
  d.pool.reset();
  d.resources.clear();
  d.state = DeploymentState::shutdown;
}

std::string SimCloud::to_json() const {
  std::lock_guard lock(mutex_);
  json doc;
  doc["format"] = "hpcadvisor-deployments";
  doc["version"] = 1;
  doc["node_quota"] = node_quota_;
  json arr = json::array();
  for (const auto& d : deployments_) {
    json resources = json::array();
    for (const auto& r : d.resources) resources.push_back({{"kind", to_string(r.kind)}, {"name", r.name}});
    json j = {{"id", d.id},
              {"region", d.region},
              {"state", to_string(d.state)},
              {"resources", resources},
              {"pool_creations", d.pool_creations}};
    if (d.pool)
      j["pool"] = {{"sku", d.pool->sku},
                   {"current_nodes", d.pool->current_nodes},
                   {"high_water", d.pool->high_water},
                   {"creations", d.pool->creations}};
    else
      j["pool"] = nullptr;
    arr.push_back(std::move(j));
  }
  doc["deployments"] = std::move(arr);
  return doc.dump(2) + "\n";
}

SimCloud SimCloud::from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("corrupt deployment state: {}", e.what()), e.byte);
  }
  try {
    SimCloud cloud(doc.value("node_quota", 4096));
    for (const auto& j : doc.at("deployments")) {
      Deployment d;
      d.id = j.at("id").get<std::string>();
      d.region = j.at("region").get<std::string>();
      d.state = parse_state(j.at("state").get<std::string>());
      for (const auto& r : j.at("resources"))
        d.resources.push_back({parse_kind(r.at("kind").get<std::string>()), r.at("name").get<std::string>()});
      d.pool_creations = j.value("pool_creations", 0);
      if (auto p = j.find("pool"); p != j.end() && p->is_object())
        d.pool = PoolState{p->at("sku").get<std::string>(), p->at("current_nodes").get<int>(),
                           p->at("high_water").get<int>(), p->at("creations").get<int>()};
      cloud.deployments_.push_back(std::move(d));
    }
    return cloud;
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("invalid deployment state: {}", e.what()), 0);
  }
}

void SimCloud::save(const std::filesystem::path& path) const {
  static std::mutex file_mutex;
  std::lock_guard file_lock(file_mutex);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot write '{}'", tmp.string()));
    out << to_json();
  }
  std::filesystem::rename(tmp, path);
}

SimCloud SimCloud::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return SimCloud{};
  return from_json(read_text_file(path));
}

// ---------------------------------------------------------------------------
// performance model

const PerfParams* PerfModel::find(std::string_view sku, const AppInputs& appinputs) const {
  const auto want = canonical_sku(sku);
  const PerfParams* best = nullptr;
  long best_score = -1;
  for (const auto& e : entries) {
    const bool exact = e.sku != "*" && canonical_sku(e.sku) == want;
    if (!exact && e.sku != "*") continue;
    bool subset = std::all_of(e.appinputs.begin(), e.appinputs.end(), [&](const auto& kv) {
      auto it = appinputs.find(kv.first);
      return it != appinputs.end() && it->second == kv.second;
    });
    if (!subset) continue;
    long score = (exact ? 1'000'000L : 0L) + static_cast<long>(e.appinputs.size());
    if (score > best_score) {
      best = &e.params;
      best_score = score;
    }
  }
  return best;
}

const PerfParams& PerfModel::lookup(std::string_view sku, const AppInputs& appinputs) const {
  if (const auto* p = find(sku, appinputs)) return *p;
  std::string key;
  for (const auto& [k, v] : appinputs) key += fmt::format("{}{}={}", key.empty() ? "" : ",", k, v);
  throw NotFoundError(fmt::format("model miss: no entry for sku '{}' with appinputs {{{}}}", sku, key));
}

PerfModel parse_perf_model(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("corrupt model file: {}", e.what()), e.byte);
  }
  try {
    PerfModel m;
    m.noise_sigma = doc.value("noise_sigma", 0.0);
    m.seed = doc.value("seed", std::uint64_t{0});
    m.failure_probability = doc.value("failure_probability", 0.0);
    m.realtime_factor = doc.value("realtime_factor", 0.0);
    m.spinup_seconds = doc.value("spinup_seconds", 0.0);
    for (const auto& j : doc.at("entries")) {
      PerfModelEntry e;
      e.sku = j.value("sku", "*");
      if (auto it = j.find("appinputs"); it != j.end() && !it->is_null()) e.appinputs = it->get<AppInputs>();
      e.params.t_serial = j.value("t_serial", 0.0);
      e.params.t_parallel = j.value("t_parallel", 0.0);
      e.params.t_comm = j.value("t_comm", 0.0);
      if (auto it = j.find("superlinear_factor"); it != j.end() && !it->is_null())
        e.params.superlinear_factor = it->get<double>();
      e.params.setup_seconds = j.value("setup_seconds", 0.0);
      const auto& p = e.params;
      if (p.t_serial < 0 || p.t_parallel < 0 || p.t_comm < 0 || p.setup_seconds < 0)
        throw ConfigError("entries", fmt::format("negative time component for sku '{}'", e.sku));
      if (p.superlinear_factor && !(*p.superlinear_factor > 0))
        throw ConfigError("entries", "superlinear_factor must be positive");
      m.entries.push_back(std::move(e));
    }
    if (m.noise_sigma < 0) throw ConfigError("noise_sigma", "must be nonnegative");
    if (m.failure_probability < 0 || m.failure_probability > 1)
      throw ConfigError("failure_probability", "must be in [0,1]");
    return m;
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("invalid model file: {}", e.what()), 0);
  }
}

PerfModel load_perf_model_file(const std::filesystem::path& path) { return parse_perf_model(read_text_file(path)); }

std::string perf_model_to_json(const PerfModel& m) {
  json entries = json::array();
  for (const auto& e : m.entries) {
    json j = {{"sku", e.sku},
              {"appinputs", e.appinputs},
              {"t_serial", e.params.t_serial},
              {"t_parallel", e.params.t_parallel},
              {"t_comm", e.params.t_comm},
              {"setup_seconds", e.params.setup_seconds}};
    if (e.params.superlinear_factor) j["superlinear_factor"] = *e.params.superlinear_factor;
    entries.push_back(std::move(j));
  }
  return json{{"seed", m.seed},
              {"noise_sigma", m.noise_sigma},
              {"failure_probability", m.failure_probability},
              {"realtime_factor", m.realtime_factor},
              {"spinup_seconds", m.spinup_seconds},
              {"entries", entries}}
             .dump(2) +
         "\n";
}

double model_time(const PerfParams& p, int nnodes, int ppn) noexcept {
  double t = p.t_serial + p.t_parallel / (static_cast<double>(nnodes) * ppn) + p.t_comm * (nnodes - 1);
  if (p.superlinear_factor) t *= std::pow(*p.superlinear_factor, nnodes - 1);
  return t;
}

namespace {

double unit_uniform(std::uint64_t bits) noexcept {
  // 53 random mantissa bits in (0, 1).
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t task_stream(std::uint64_t seed, std::string_view task_id, std::uint64_t salt) noexcept {
  return mix64(mix64(seed ^ salt) ^ fnv1a64(task_id));
}

}  // namespace

double noise_multiplier(std::uint64_t seed, std::string_view task_id, double sigma) noexcept {
  if (sigma == 0.0) return 1.0;
  auto s = task_stream(seed, task_id, 0x6e6f697365ULL);
  double u1 = unit_uniform(mix64(s));
  double u2 = unit_uniform(mix64(s + 1));
  double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  return std::exp(sigma * z);
}

RawRunResult simulate_execute(const TaskSpec& task, const PerfModel& model) {
  const auto& params = model.lookup(task.sku, task.appinputs);
  RawRunResult r;
  const double base = model_time(params, task.nnodes, task.ppn);
  r.wallclock_seconds = base * noise_multiplier(model.seed, task.id, model.noise_sigma);

  const bool fail = model.failure_probability > 0.0 &&
                    unit_uniform(task_stream(model.seed, task.id, 0x6661696cULL)) < model.failure_probability;
  r.exit_ok = !fail;
  if (fail) {
    r.stdout_text = "simulated task failure\n";
    return r;
  }

  const double compute = params.t_parallel / (static_cast<double>(task.nnodes) * task.ppn);
  const double comm = params.t_comm * (task.nnodes - 1);
  const double total = params.t_serial + compute + comm;
  Utilization u;
  u.cpu_percent = total > 0 ? 100.0 * (compute + params.t_serial / task.ppn) / total : 0.0;
  u.net_percent = total > 0 ? 100.0 * comm / total : 0.0;
  u.mem_percent = std::min(100.0, 20.0 + 60.0 / task.nnodes);
  r.utilization = u;

  r.stdout_text = fmt::format("simulated run of {} on {} x {} (ppn {})\nHPCADVISORVAR APPEXECTIME={}\n", task.id,
                              task.nnodes, task.sku, task.ppn, r.wallclock_seconds);
  r.advisor_vars = parse_advisor_vars(r.stdout_text);
  return r;
}

// ---------------------------------------------------------------------------
// backend

SimBackend::SimBackend(SimCloud& cloud, PerfModel model, std::string deployment_id)
    : cloud_(cloud), model_(std::move(model)), deployment_id_(std::move(deployment_id)) {}

void SimBackend::create_deployment(const SweepConfig& config) {
  deployment_id_ = cloud_.create_deployment(config, cloud_.next_suffix(config.rgprefix)).id;
}

bool SimBackend::has_deployment() const {
  if (deployment_id_.empty() || !cloud_.contains(deployment_id_)) return false;
  return cloud_.get(deployment_id_).state == DeploymentState::active;
}

SetupResult SimBackend::run_setup(const std::string& sku) {
  if (!has_deployment()) throw StateError(fmt::format("deployment '{}' is not active", deployment_id_));
  trace_.push_back({TraceEvent::Kind::setup, sku, 0, {}});
  setup_sku_ = sku;
  const auto* params = model_.find(sku, {});
  return SetupResult{true, params ? params->setup_seconds : 0.0, "simulated setup\n"};
}

void SimBackend::resize_pool(const std::string& sku, int nnodes) {
  const int before = cloud_.get(deployment_id_).pool_creations;
  cloud_.resize_pool(deployment_id_, sku, nnodes);
  trace_.push_back({TraceEvent::Kind::resize, sku, nnodes, {}});
  if (model_.realtime_factor > 0 && model_.spinup_seconds > 0 && cloud_.get(deployment_id_).pool_creations != before)
    std::this_thread::sleep_for(std::chrono::duration<double>(model_.spinup_seconds * model_.realtime_factor));
}

RawRunResult SimBackend::execute(const TaskSpec& task) {
  const auto d = cloud_.get(deployment_id_);
  if (d.state != DeploymentState::active) throw StateError(fmt::format("deployment '{}' is not active", d.id));
  if (!d.pool || canonical_sku(d.pool->sku) != canonical_sku(task.sku) || d.pool->current_nodes < task.nnodes)
    throw BackendError(fmt::format("pool for '{}' missing or smaller than {} nodes", task.sku, task.nnodes));
  if (canonical_sku(setup_sku_) != canonical_sku(task.sku))
    throw StateError(fmt::format("execute for '{}' before its setup task", task.sku));
  trace_.push_back({TraceEvent::Kind::execute, task.sku, task.nnodes, task.id});
  try {
    auto r = simulate_execute(task, model_);
    if (model_.realtime_factor > 0)
      std::this_thread::sleep_for(std::chrono::duration<double>(r.wallclock_seconds * model_.realtime_factor));
    return r;
  } catch (const NotFoundError& e) {
    throw BackendError(e.what());
  }
}

void SimBackend::teardown_pool(TeardownMode mode) {
  cloud_.teardown_pool(deployment_id_, mode);
  trace_.push_back(
      {mode == TeardownMode::remove ? TraceEvent::Kind::teardown_delete : TraceEvent::Kind::teardown_zero, {}, 0, {}});
}

void SimBackend::shutdown_deployment() {
  cloud_.shutdown_deployment(deployment_id_);
  trace_.push_back({TraceEvent::Kind::shutdown, {}, 0, {}});
}

}  // namespace hpcadvisor
