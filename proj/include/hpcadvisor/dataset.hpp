#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "hpcadvisor/config.hpp"

namespace hpcadvisor {

struct Utilization {
  double cpu_percent = 0.0;
  double mem_percent = 0.0;
  double net_percent = 0.0;

  bool operator==(const Utilization&) const = default;
};

// One completed execution. `cost` is fixed at append time from the catalog price.
struct RunRecord {
  std::string task_id;
  std::string sku;
  int nnodes = 1;
  int ppn = 1;
  AppInputs appinputs;
  Tags tags;
  double exectime_seconds = 0.0;
  double wallclock_seconds = 0.0;
  double cost = 0.0;
  std::map<std::string, std::string> advisor_vars;
  std::optional<Utilization> utilization;
  std::string deployment_id;
  std::string timestamp;

  bool operator==(const RunRecord&) const = default;
};

// Time spent in the per-sku setup task; kept apart from task cost.
struct SetupRecord {
  std::string sku;
  double seconds = 0.0;
  bool ok = true;
  std::string deployment_id;
  std::string timestamp;

  bool operator==(const SetupRecord&) const = default;
};

// Conjunction of optional constraints; an empty filter matches every record.
struct DataFilter {
  std::set<std::string> skus;  // compared by canonical sku name
  std::set<int> nnodes;
  AppInputs appinputs;
  Tags tags;

  bool empty() const noexcept { return skus.empty() && nnodes.empty() && appinputs.empty() && tags.empty(); }
  bool matches(const RunRecord& record) const;
};

// (sku, nnodes, appinputs) ordering used by query results.
bool record_order_less(const RunRecord& a, const RunRecord& b);

std::string record_to_json_line(const RunRecord& record);
RunRecord record_from_json_line(std::string_view line);

inline constexpr int kDatasetVersion = 1;

// Append-only line-delimited store. Each line is one JSON object; a later run line
// with an existing task_id supersedes the earlier one. With an empty path the store
// lives in memory only.
class DatasetStore {
 public:
  DatasetStore() = default;
  explicit DatasetStore(std::filesystem::path path);

  void append(RunRecord record);
  void append_setup(SetupRecord record);

  std::vector<RunRecord> query(const DataFilter& filter = {}) const;
  std::vector<RunRecord> current() const { return query({}); }
  // Every run line ever appended, superseded ones included, in append order.
  std::vector<RunRecord> history() const;
  std::vector<SetupRecord> setups() const;
  std::size_t size() const;

  // Re-reads the backing file.
  void reload();
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  void apply(RunRecord record);
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::vector<RunRecord> history_;
  std::map<std::string, std::size_t> latest_;  // task_id -> index in history_
  std::vector<SetupRecord> setups_;
};

}  // namespace hpcadvisor
