#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hpcadvisor/config.hpp"

namespace hpcadvisor {

enum class TaskStatus { pending, failed, completed };

std::string_view to_string(TaskStatus status) noexcept;
TaskStatus parse_task_status(std::string_view text);

struct TaskSpec {
  std::string id;
  std::string sku;
  int nnodes = 1;
  int ppn = 1;
  AppInputs appinputs;
  Tags tags;
  TaskStatus status = TaskStatus::pending;

  bool operator==(const TaskSpec&) const = default;
};

struct StatusCounts {
  std::size_t pending = 0;
  std::size_t failed = 0;
  std::size_t completed = 0;
  std::size_t total() const noexcept { return pending + failed + completed; }
};

struct TaskList {
  std::vector<TaskSpec> tasks;
  std::string config_fingerprint;

  TaskSpec* find(std::string_view id);
  const TaskSpec* find(std::string_view id) const;
  StatusCounts counts() const noexcept;

  bool operator==(const TaskList&) const = default;
};

// Content hash of the fields that define a scenario; identical scenarios share an id.
std::string make_task_id(std::string_view sku, int nnodes, int ppn, const AppInputs& appinputs, const Tags& tags);

std::string config_fingerprint(const SweepConfig& config);

// One pending task per sku x nnodes x appinput combination, sku-major.
TaskList generate_tasks(const SweepConfig& config, const PricingCatalog& pricing);

// Number of maximal runs of equal sku in task order.
std::size_t sku_run_count(const TaskList& list) noexcept;

inline constexpr int kTaskFileVersion = 1;

std::string tasklist_to_json(const TaskList& list);
TaskList tasklist_from_json(std::string_view text);

// Writes atomically (temp file + rename).
void save_tasklist(const TaskList& list, const std::filesystem::path& path);
// Throws ParseError on a corrupt document and StateError when `expected_fingerprint`
// is given and differs from the stored one.
TaskList load_tasklist(const std::filesystem::path& path,
                       std::optional<std::string_view> expected_fingerprint = std::nullopt);

// Legal transitions: pending -> completed | failed, and failed -> pending when `retry` is set.
void update_status(TaskList& list, std::string_view id, TaskStatus new_status, bool retry = false);

// A task file opened for writing. Holds an exclusive advisory lock on `<path>.lock` for
// its lifetime; readers use load_tasklist without locking.
class TaskFile {
 public:
  // Loads `path` if it exists (checking the fingerprint), otherwise persists `fresh`.
  static TaskFile open_or_create(const std::filesystem::path& path, const TaskList& fresh);
  static TaskFile open(const std::filesystem::path& path,
                       std::optional<std::string_view> expected_fingerprint = std::nullopt);

  TaskFile(TaskFile&& other) noexcept;
  TaskFile& operator=(TaskFile&& other) noexcept;
  TaskFile(const TaskFile&) = delete;
  TaskFile& operator=(const TaskFile&) = delete;
  ~TaskFile();

  const TaskList& list() const noexcept { return list_; }
  TaskList& mutable_list() noexcept { return list_; }
  const std::filesystem::path& path() const noexcept { return path_; }

  void update_status(std::string_view id, TaskStatus new_status, bool retry = false);
  void save() const;

 private:
  TaskFile(std::filesystem::path path, int lock_fd, TaskList list);
  std::filesystem::path path_;
  int lock_fd_ = -1;
  TaskList list_;
};

}  // namespace hpcadvisor
