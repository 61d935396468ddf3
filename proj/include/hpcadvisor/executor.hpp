#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hpcadvisor/config.hpp"
#include "hpcadvisor/dataset.hpp"
#include "hpcadvisor/scenario.hpp"

namespace hpcadvisor {

enum class TeardownMode { resize_to_zero, remove };

std::string_view to_string(TeardownMode mode) noexcept;
TeardownMode parse_teardown_mode(std::string_view text);

struct RawRunResult {
  double wallclock_seconds = 0.0;
  bool exit_ok = false;
  std::string stdout_text;
  std::map<std::string, std::string> advisor_vars;
  std::optional<Utilization> utilization;
};

struct SetupResult {
  bool ok = false;
  double seconds = 0.0;
  std::string output;
};

// Execution back-end driven by process_tasks. Implementations need only tolerate calls
// from a single worker thread.
class ExecutorBackend {
 public:
  virtual ~ExecutorBackend() = default;

  virtual void create_deployment(const SweepConfig& config) = 0;
  virtual bool has_deployment() const = 0;
  virtual std::string deployment_id() const = 0;
  virtual SetupResult run_setup(const std::string& sku) = 0;
  virtual void resize_pool(const std::string& sku, int nnodes) = 0;
  virtual RawRunResult execute(const TaskSpec& task) = 0;
  virtual void teardown_pool(TeardownMode mode) = 0;
  virtual void shutdown_deployment() = 0;
};

// Consulted before each pending task; returning true leaves the task pending and
// counts it as skipped.
class SamplingStrategy {
 public:
  virtual ~SamplingStrategy() = default;
  virtual bool should_skip(const TaskSpec& task, std::span<const RunRecord> completed) = 0;
};

inline constexpr std::string_view kAdvisorVarMarker = "HPCADVISORVAR";

struct AdvisorVarScan {
  std::map<std::string, std::string> vars;
  std::size_t malformed = 0;
};

// Lines of the form `HPCADVISORVAR NAME=VALUE` (leading whitespace allowed); the last
// occurrence of a name wins.
AdvisorVarScan scan_advisor_vars(std::string_view text);
std::map<std::string, std::string> parse_advisor_vars(std::string_view text);

// APPEXECTIME from the advisor vars when present and positive, otherwise wallclock.
double effective_exectime(const RawRunResult& result);

struct CollectionReport {
  std::size_t executed = 0;              // completed in this pass
  std::size_t previously_completed = 0;  // already completed when the pass started
  std::size_t skipped_by_sampler = 0;
  std::size_t failed = 0;                // failed status at the end of the pass
  std::size_t remaining_pending = 0;     // pending, neither skipped nor attempted
  std::size_t pool_creations = 0;
  std::size_t setups = 0;
  double wall_time = 0.0;
  bool interrupted = false;
  std::vector<std::string> skipped_ids;

  std::size_t accounted() const noexcept {
    return executed + previously_completed + skipped_by_sampler + failed + remaining_pending;
  }
};

struct CollectOptions {
  TeardownMode teardown = TeardownMode::resize_to_zero;
  SamplingStrategy* sampler = nullptr;
  bool retry_failed = false;
  // Polled before each task; returning true ends the pass early (pool still torn down).
  std::function<bool()> stop_requested;
  // Called after every status change, with the list already updated (persist here).
  std::function<void(const TaskList&)> on_status_change;
  // Produces record timestamps; defaults to UTC ISO-8601 wall time.
  std::function<std::string()> clock;
};

// Sequential collection loop: one pool per maximal sku run, setup on every sku change,
// resize-execute-store-mark per task, pool teardown at the end.
CollectionReport process_tasks(TaskList& list, ExecutorBackend& backend, DatasetStore& store,
                               const PricingCatalog& pricing, const CollectOptions& options = {});

std::string utc_timestamp();

// Runs the app script on this host. Setup runs in `workdir`; every task gets
// `workdir/<task id>` as TASKRUN_DIR.
struct LocalBackendOptions {
  std::filesystem::path workdir;
  std::chrono::milliseconds timeout = std::chrono::hours(1);
  std::string shell = "/bin/bash";
};

struct ShellResult {
  int exit_status = -1;
  bool timed_out = false;
  double seconds = 0.0;
  std::string output;
};

// Sources `script` and calls `function` inside `cwd` with `env` added to the inherited
// environment. stdout and stderr are captured together.
ShellResult run_script_function(const std::filesystem::path& script, std::string_view function,
                                const std::filesystem::path& cwd, const std::map<std::string, std::string>& env,
                                const LocalBackendOptions& options);

std::map<std::string, std::string> task_environment(const TaskSpec& task, const std::filesystem::path& taskrun_dir);

RawRunResult local_execute(const TaskSpec& task, const AppScriptInfo& script, const LocalBackendOptions& options);

class LocalBackend final : public ExecutorBackend {
 public:
  LocalBackend(AppScriptInfo script, LocalBackendOptions options);

  void create_deployment(const SweepConfig& config) override;
  bool has_deployment() const override { return !deployment_id_.empty(); }
  std::string deployment_id() const override { return deployment_id_; }
  SetupResult run_setup(const std::string& sku) override;
  void resize_pool(const std::string& sku, int nnodes) override;
  RawRunResult execute(const TaskSpec& task) override;
  void teardown_pool(TeardownMode mode) override;
  void shutdown_deployment() override;

  void set_deployment_id(std::string id) { deployment_id_ = std::move(id); }

 private:
  AppScriptInfo script_;
  LocalBackendOptions options_;
  std::string deployment_id_;
  std::string setup_sku_;
};

}  // namespace hpcadvisor
