#include "hpcadvisor/scenario.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <fstream>

#include <fmt/format.h>

#include "hpcadvisor/errors.hpp"
#include "hpcadvisor/hash.hpp"
#include "json.hpp"

namespace hpcadvisor {

using nlohmann::json;

std::string_view to_string(TaskStatus status) noexcept {
  switch (status) {
    case TaskStatus::pending: return "pending";
    case TaskStatus::failed: return "failed";
    case TaskStatus::completed: return "completed";
  }
  return "pending";
}

TaskStatus parse_task_status(std::string_view text) {
  if (text == "pending") return TaskStatus::pending;
  if (text == "failed") return TaskStatus::failed;
  if (text == "completed") return TaskStatus::completed;
  throw Error(fmt::format("unknown task status '{}'", text));
}

TaskSpec* TaskList::find(std::string_view id) {
  for (auto& t : tasks)
    if (t.id == id) return &t;
  return nullptr;
}

const TaskSpec* TaskList::find(std::string_view id) const {
  for (const auto& t : tasks)
    if (t.id == id) return &t;
  return nullptr;
}

StatusCounts TaskList::counts() const noexcept {
  StatusCounts c;
  for (const auto& t : tasks) {
    switch (t.status) {
      case TaskStatus::pending: ++c.pending; break;
      case TaskStatus::failed: ++c.failed; break;
      case TaskStatus::completed: ++c.completed; break;
    }
  }
  return c;
}

std::string make_task_id(std::string_view sku, int nnodes, int ppn, const AppInputs& appinputs, const Tags& tags) {
  // Length-prefixed fields so that no two distinct scenarios serialize identically.
  std::string key;
  auto put = [&key](std::string_view s) { key += fmt::format("{}:{};", s.size(), s); };
  put(canonical_sku(sku));
  put(std::to_string(nnodes));
  put(std::to_string(ppn));
  for (const auto& [k, v] : appinputs) { put(k); put(v); }
  key += "|";
  for (const auto& [k, v] : tags) { put(k); put(v); }
  return hex64(fnv1a64(key));
}

std::string config_fingerprint(const SweepConfig& config) {
  return hex64(fnv1a64(serialize_sweep_config(config)));
}

TaskList generate_tasks(const SweepConfig& config, const PricingCatalog& pricing) {
  check_config_against_pricing(config, pricing);
  TaskList list;
  list.config_fingerprint = config_fingerprint(config);
  const auto combos = appinput_combinations(config);
  std::vector<int> nodes = config.nnodes;
  std::stable_sort(nodes.begin(), nodes.end());
  for (const auto& sku : config.skus) {
    const int ppn = processes_per_node(pricing.at(sku).cores, config.ppr);
    for (int n : nodes) {
      for (const auto& inputs : combos) {
        TaskSpec t;
        t.sku = sku;
        t.nnodes = n;
        t.ppn = ppn;
        t.appinputs = inputs;
        t.tags = config.tags;
        t.id = make_task_id(sku, n, ppn, inputs, config.tags);
        if (list.find(t.id)) continue;  // repeated node count in the config
        list.tasks.push_back(std::move(t));
      }
    }
  }
  return list;
}

std::size_t sku_run_count(const TaskList& list) noexcept {
  std::size_t runs = 0;
  const std::string* prev = nullptr;
  for (const auto& t : list.tasks) {
    if (!prev || *prev != t.sku) ++runs;
    prev = &t.sku;
  }
  return runs;
}

std::string tasklist_to_json(const TaskList& list) {
  json doc;
  doc["format"] = "hpcadvisor-tasks";
  doc["version"] = kTaskFileVersion;
  doc["config_fingerprint"] = list.config_fingerprint;
  json tasks = json::array();
  for (const auto& t : list.tasks) {
    tasks.push_back({{"id", t.id},
                     {"sku", t.sku},
                     {"nnodes", t.nnodes},
                     {"ppn", t.ppn},
                     {"appinputs", t.appinputs},
                     {"tags", t.tags},
                     {"status", to_string(t.status)}});
  }
  doc["tasks"] = std::move(tasks);
  return doc.dump(2) + "\n";
}

TaskList tasklist_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("corrupt task file: {}", e.what()), e.byte);
  }
  try {
    if (doc.at("format").get<std::string>() != "hpcadvisor-tasks") throw ParseError("not a task file", 0);
    if (int v = doc.at("version").get<int>(); v != kTaskFileVersion)
      throw ParseError(fmt::format("unsupported task file version {}", v), 0);
    TaskList list;
    list.config_fingerprint = doc.at("config_fingerprint").get<std::string>();
    for (const auto& j : doc.at("tasks")) {
      TaskSpec t;
      t.id = j.at("id").get<std::string>();
      t.sku = j.at("sku").get<std::string>();
      t.nnodes = j.at("nnodes").get<int>();
      t.ppn = j.at("ppn").get<int>();
      t.appinputs = j.at("appinputs").get<AppInputs>();
      t.tags = j.at("tags").get<Tags>();
      t.status = parse_task_status(j.at("status").get<std::string>());
      if (list.find(t.id)) throw ParseError(fmt::format("duplicate task id '{}'", t.id), 0);
      list.tasks.push_back(std::move(t));
    }
    return list;
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("invalid task file: {}", e.what()), 0);
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(fmt::format("invalid task file: {}", e.what()), 0);
  }
}

namespace {

void write_atomically(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot write '{}'", tmp.string()));
    out << content;
    out.flush();
    if (!out) throw Error(fmt::format("write to '{}' failed", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

int acquire_lock(const std::filesystem::path& path) {
  auto lock_path = path;
  lock_path += ".lock";
  int fd = ::open(lock_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(fmt::format("cannot open lock file '{}'", lock_path.string()));
  if (::flock(fd, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd);
    throw StateError(fmt::format("task file '{}' is locked by another writer", path.string()));
  }
  return fd;
}

}  // namespace

void save_tasklist(const TaskList& list, const std::filesystem::path& path) {
  write_atomically(path, tasklist_to_json(list));
}

TaskList load_tasklist(const std::filesystem::path& path, std::optional<std::string_view> expected_fingerprint) {
  auto list = tasklist_from_json(read_text_file(path));
  if (expected_fingerprint && list.config_fingerprint != *expected_fingerprint)
    throw StateError(fmt::format("stale task file '{}': generated from a different config", path.string()));
  return list;
}

void update_status(TaskList& list, std::string_view id, TaskStatus new_status, bool retry) {
  auto* task = list.find(id);
  if (!task) throw NotFoundError(fmt::format("unknown task id '{}'", id));
  const auto from = task->status;
  const bool legal = (from == TaskStatus::pending && new_status != TaskStatus::pending) ||
                     (from == TaskStatus::failed && new_status == TaskStatus::pending && retry);
  if (!legal)
    throw StateError(fmt::format("illegal status transition {} -> {} for task '{}'", to_string(from),
                                 to_string(new_status), id));
  task->status = new_status;
}

TaskFile::TaskFile(std::filesystem::path path, int lock_fd, TaskList list)
    : path_(std::move(path)), lock_fd_(lock_fd), list_(std::move(list)) {}

TaskFile::TaskFile(TaskFile&& other) noexcept
    : path_(std::move(other.path_)), lock_fd_(std::exchange(other.lock_fd_, -1)), list_(std::move(other.list_)) {}

TaskFile& TaskFile::operator=(TaskFile&& other) noexcept {
  if (this != &other) {
    if (lock_fd_ >= 0) ::close(lock_fd_);
    path_ = std::move(other.path_);
    lock_fd_ = std::exchange(other.lock_fd_, -1);
    list_ = std::move(other.list_);
  }
  return *this;
}

TaskFile::~TaskFile() {
  if (lock_fd_ >= 0) ::close(lock_fd_);
}

TaskFile TaskFile::open_or_create(const std::filesystem::path& path, const TaskList& fresh) {
  int fd = acquire_lock(path);
  try {
    if (std::filesystem::exists(path)) return TaskFile(path, fd, load_tasklist(path, fresh.config_fingerprint));
    save_tasklist(fresh, path);
    return TaskFile(path, fd, fresh);
  } catch (...) {
    ::close(fd);
    throw;
  }
}

TaskFile TaskFile::open(const std::filesystem::path& path, std::optional<std::string_view> expected_fingerprint) {
  int fd = acquire_lock(path);
  try {
    return TaskFile(path, fd, load_tasklist(path, expected_fingerprint));
  } catch (...) {
    ::close(fd);
    throw;
  }
}

void TaskFile::update_status(std::string_view id, TaskStatus new_status, bool retry) {
  hpcadvisor::update_status(list_, id, new_status, retry);
  save();
}

void TaskFile::save() const { save_tasklist(list_, path_); }

}  // namespace hpcadvisor
