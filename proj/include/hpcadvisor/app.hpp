#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hpcadvisor/analytics.hpp"
#include "hpcadvisor/config.hpp"
#include "hpcadvisor/dataset.hpp"
#include "hpcadvisor/executor.hpp"
#include "hpcadvisor/sampling.hpp"
#include "hpcadvisor/scenario.hpp"
#include "hpcadvisor/simcloud.hpp"

namespace hpcadvisor {

// On-disk layout shared by the CLI and the HTTP service.
struct Workspace {
  std::filesystem::path state_dir = ".hpcadvisor";
  std::filesystem::path dataset = "hpcadvisor_dataset.jsonl";

  std::filesystem::path deployments_file() const { return state_dir / "deployments.json"; }
  std::filesystem::path task_file(std::string_view deployment) const;
  std::filesystem::path run_dir(std::string_view deployment) const;
};

// Filter terms: `sku=a,b`, `nnodes=1,2`, `tag.NAME=value` (or `tag:NAME=value`);
// any other `NAME=value` constrains the appinput NAME. Surrounding quotes are stripped.
DataFilter parse_filter_terms(std::span<const std::string> terms);

// Generic model used by the simulated back-end when no model file is given.
PerfModel default_perf_model();

enum class BackendKind { sim, local };
BackendKind parse_backend_kind(std::string_view text);

struct CollectRequest {
  std::string deployment;
  SweepConfig config;
  PricingCatalog pricing;
  BackendKind backend = BackendKind::sim;
  PerfModel model = default_perf_model();
  std::optional<std::uint64_t> seed;  // overrides model.seed
  std::optional<std::filesystem::path> script;  // local back-end; defaults to config.appsetupurl
  std::chrono::milliseconds timeout = std::chrono::hours(1);
  TeardownMode teardown = TeardownMode::resize_to_zero;
  std::optional<SamplerOptions> sampler;
  bool retry_failed = false;
  bool fresh = false;  // discard an existing task file
  std::optional<std::size_t> max_tasks;  // stop after this many executions
};

struct CollectHooks {
  std::function<bool()> stop_requested;
  std::function<void(const TaskList&)> on_status_change;
  std::function<std::string()> clock;
};

// Generates or resumes the deployment's task file and runs one collection pass.
// `cloud` must contain the deployment; its pool state is updated in place.
CollectionReport run_collection(const Workspace& ws, SimCloud& cloud, const CollectRequest& request,
                                const CollectHooks& hooks = {});

// Most recently created active deployment whose id starts with `rgprefix`.
std::optional<std::string> pick_deployment(const SimCloud& cloud, std::string_view rgprefix);

}  // namespace hpcadvisor
