#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hpcadvisor/config.hpp"
#include "hpcadvisor/executor.hpp"

namespace hpcadvisor {

enum class DeploymentState { created, active, shutdown };
std::string_view to_string(DeploymentState state) noexcept;

// Provisioning order: variables, landing zone (group, vnet, subnet), storage, batch
// service, then the optional jumpbox and peering.
enum class ResourceKind {
  variables,
  resource_group,
  virtual_network,
  subnet,
  storage_account,
  batch_service,
  jumpbox,
  vnet_peering,
};
std::string_view to_string(ResourceKind kind) noexcept;

struct ProvisionedResource {
  ResourceKind kind;
  std::string name;

  bool operator==(const ProvisionedResource&) const = default;
};

struct PoolState {
  std::string sku;
  int current_nodes = 0;
  int high_water = 0;
  int creations = 0;

  bool operator==(const PoolState&) const = default;
};

struct Deployment {
  std::string id;
  std::string region;
  DeploymentState state = DeploymentState::created;
  std::vector<ProvisionedResource> resources;
  std::optional<PoolState> pool;
  int pool_creations = 0;  // over the lifetime of the deployment, all skus

  bool operator==(const Deployment&) const = default;
};

// Builds the resource list for `config` without registering it anywhere.
Deployment provision_deployment(const SweepConfig& config, std::string_view suffix);

// Registry of simulated deployments. All members are safe to call concurrently; reads
// return snapshots.
class SimCloud {
 public:
  explicit SimCloud(int node_quota = 4096) : node_quota_(node_quota) {}
  SimCloud(const SimCloud& other);
  SimCloud& operator=(const SimCloud& other);

  Deployment create_deployment(const SweepConfig& config, std::string_view suffix);
  // Smallest "d<k>" suffix not yet used with this prefix.
  std::string next_suffix(std::string_view rgprefix) const;

  Deployment get(std::string_view id) const;
  bool contains(std::string_view id) const;
  std::vector<Deployment> list() const;

  void resize_pool(std::string_view id, const std::string& sku, int nnodes);
  void teardown_pool(std::string_view id, TeardownMode mode);
  void shutdown_deployment(std::string_view id);

  int node_quota() const noexcept { return node_quota_; }

  std::string to_json() const;
  static SimCloud from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  // Missing file yields an empty registry.
  static SimCloud load(const std::filesystem::path& path);

 private:
  Deployment& active(std::string_view id);
  mutable std::mutex mutex_;
  int node_quota_;
  std::vector<Deployment> deployments_;
};

struct PerfParams {
  double t_serial = 0.0;    // seconds
  double t_parallel = 0.0;  // core-seconds
  double t_comm = 0.0;      // seconds per additional node
  std::optional<double> superlinear_factor;
  double setup_seconds = 0.0;

  bool operator==(const PerfParams&) const = default;
};

struct PerfModelEntry {
  std::string sku;  // "*" matches any sku
  AppInputs appinputs;  // subset that must match; empty matches any input
  PerfParams params;

  bool operator==(const PerfModelEntry&) const = default;
};

struct PerfModel {
  std::vector<PerfModelEntry> entries;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  double failure_probability = 0.0;
  double realtime_factor = 0.0;  // real seconds slept per simulated second
  double spinup_seconds = 0.0;   // simulated pool creation delay

  // Most specific entry: exact sku before "*", then the largest matching input subset.
  const PerfParams& lookup(std::string_view sku, const AppInputs& appinputs) const;
  const PerfParams* find(std::string_view sku, const AppInputs& appinputs) const;

  bool operator==(const PerfModel&) const = default;
};

PerfModel parse_perf_model(std::string_view text);
PerfModel load_perf_model_file(const std::filesystem::path& path);
std::string perf_model_to_json(const PerfModel& model);

// Noise-free time: (t_serial + t_parallel/(n*ppn) + t_comm*(n-1)) * f^(n-1).
double model_time(const PerfParams& params, int nnodes, int ppn) noexcept;

// exp(sigma * z) with z standard normal drawn from (seed, task id).
double noise_multiplier(std::uint64_t seed, std::string_view task_id, double sigma) noexcept;

RawRunResult simulate_execute(const TaskSpec& task, const PerfModel& model);

struct TraceEvent {
  enum class Kind { setup, resize, execute, teardown_zero, teardown_delete, shutdown };
  Kind kind;
  std::string sku;
  int nnodes = 0;
  std::string task_id;

  bool operator==(const TraceEvent&) const = default;
};

class SimBackend final : public ExecutorBackend {
 public:
  SimBackend(SimCloud& cloud, PerfModel model, std::string deployment_id = {});

  void create_deployment(const SweepConfig& config) override;
  bool has_deployment() const override;
  std::string deployment_id() const override { return deployment_id_; }
  SetupResult run_setup(const std::string& sku) override;
  void resize_pool(const std::string& sku, int nnodes) override;
  RawRunResult execute(const TaskSpec& task) override;
  void teardown_pool(TeardownMode mode) override;
  void shutdown_deployment() override;

  const std::vector<TraceEvent>& trace() const noexcept { return trace_; }
  const PerfModel& model() const noexcept { return model_; }

 private:
  SimCloud& cloud_;
  PerfModel model_;
  std::string deployment_id_;
  std::string setup_sku_;
  std::vector<TraceEvent> trace_;
};

}  // namespace hpcadvisor
