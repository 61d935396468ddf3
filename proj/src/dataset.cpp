#include "hpcadvisor/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <tuple>

#include <fmt/format.h>

#include "hpcadvisor/errors.hpp"
#include "json.hpp"

namespace hpcadvisor {

using nlohmann::json;

bool DataFilter::matches(const RunRecord& record) const {
  if (!skus.empty()) {
    const auto sku = canonical_sku(record.sku);
    bool hit = std::any_of(skus.begin(), skus.end(), [&](const std::string& s) { return canonical_sku(s) == sku; });
    if (!hit) return false;
  }
  if (!nnodes.empty() && !nnodes.contains(record.nnodes)) return false;
  for (const auto& [k, v] : appinputs) {
    auto it = record.appinputs.find(k);
    if (it == record.appinputs.end() || it->second != v) return false;
  }
  for (const auto& [k, v] : tags) {
    auto it = record.tags.find(k);
    if (it == record.tags.end() || it->second != v) return false;
  }
  return true;
}

bool record_order_less(const RunRecord& a, const RunRecord& b) {
  return std::tie(a.sku, a.nnodes, a.appinputs, a.task_id) < std::tie(b.sku, b.nnodes, b.appinputs, b.task_id);
}

std::string record_to_json_line(const RunRecord& r) {
  json j = {{"kind", "run"},
            {"version", kDatasetVersion},
            {"task_id", r.task_id},
            {"sku", r.sku},
            {"nnodes", r.nnodes},
            {"ppn", r.ppn},
            {"appinputs", r.appinputs},
            {"tags", r.tags},
            {"exectime_seconds", r.exectime_seconds},
            {"wallclock_seconds", r.wallclock_seconds},
            {"cost", r.cost},
            {"advisor_vars", r.advisor_vars},
            {"deployment_id", r.deployment_id},
            {"timestamp", r.timestamp}};
  if (r.utilization) {
    j["utilization"] = {{"cpu", r.utilization->cpu_percent},
                        {"mem", r.utilization->mem_percent},
                        {"net", r.utilization->net_percent}};
  }
  return j.dump();
}

namespace {

RunRecord record_from_json(const json& j) {
  RunRecord r;
  r.task_id = j.at("task_id").get<std::string>();
  r.sku = j.at("sku").get<std::string>();
  r.nnodes = j.at("nnodes").get<int>();
  r.ppn = j.at("ppn").get<int>();
  r.appinputs = j.at("appinputs").get<AppInputs>();
  r.tags = j.at("tags").get<Tags>();
  r.exectime_seconds = j.at("exectime_seconds").get<double>();
  r.wallclock_seconds = j.at("wallclock_seconds").get<double>();
  r.cost = j.at("cost").get<double>();
  r.advisor_vars = j.at("advisor_vars").get<std::map<std::string, std::string>>();
  r.deployment_id = j.value("deployment_id", "");
  r.timestamp = j.value("timestamp", "");
  if (auto it = j.find("utilization"); it != j.end() && it->is_object())
    r.utilization = Utilization{it->at("cpu").get<double>(), it->at("mem").get<double>(), it->at("net").get<double>()};
  return r;
}

SetupRecord setup_from_json(const json& j) {
  return SetupRecord{j.at("sku").get<std::string>(), j.at("seconds").get<double>(), j.at("ok").get<bool>(),
                     j.value("deployment_id", ""), j.value("timestamp", "")};
}

std::string setup_to_json_line(const SetupRecord& s) {
  return json{{"kind", "setup"},           {"version", kDatasetVersion}, {"sku", s.sku},
              {"seconds", s.seconds},      {"ok", s.ok},                 {"deployment_id", s.deployment_id},
              {"timestamp", s.timestamp}}
      .dump();
}

void validate(const RunRecord& r) {
  if (r.task_id.empty()) throw Error("run record without task_id");
  if (r.sku.empty()) throw Error(fmt::format("run record '{}' without sku", r.task_id));
  if (r.nnodes < 1) throw Error(fmt::format("run record '{}' has nnodes {}", r.task_id, r.nnodes));
  if (!(r.exectime_seconds > 0.0) || !std::isfinite(r.exectime_seconds))
    throw Error(fmt::format("run record '{}' has non-positive exectime {}", r.task_id, r.exectime_seconds));
  if (!(r.cost >= 0.0) || !std::isfinite(r.cost))
    throw Error(fmt::format("run record '{}' has invalid cost {}", r.task_id, r.cost));
}

void append_line(const std::filesystem::path& path, const std::string& line) {
  if (path.empty()) return;
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw Error(fmt::format("cannot open dataset '{}' for append", path.string()));
  out << line << '\n';
  out.flush();
  if (!out) throw Error(fmt::format("write to dataset '{}' failed", path.string()));
}

}  // namespace

RunRecord record_from_json_line(std::string_view line) {
  try {
    return record_from_json(json::parse(line));
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("corrupt dataset line: {}", e.what()), e.byte);
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("invalid dataset line: {}", e.what()), 0);
  }
}

DatasetStore::DatasetStore(std::filesystem::path path) : path_(std::move(path)) { reload(); }

void DatasetStore::reload() {
  std::lock_guard lock(mutex_);
  history_.clear();
  latest_.clear();
  setups_.clear();
  if (path_.empty() || !std::filesystem::exists(path_)) return;
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot read dataset '{}'", path_.string()));
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    const auto line_start = offset;
    offset += line.size() + 1;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    // A torn final line (crash mid-append) has no trailing newline; readers skip it.
    if (in.eof()) break;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(fmt::format("corrupt dataset '{}': {}", path_.string(), e.what()), line_start + e.byte);
    }
    try {
      auto kind = j.value("kind", "run");
      if (kind == "run")
        apply(record_from_json(j));
      else if (kind == "setup")
        setups_.push_back(setup_from_json(j));
    } catch (const json::exception& e) {
      throw ParseError(fmt::format("invalid dataset record in '{}': {}", path_.string(), e.what()), line_start);
    }
  }
}

void DatasetStore::apply(RunRecord record) {
  auto id = record.task_id;
  history_.push_back(std::move(record));
  latest_[id] = history_.size() - 1;
}

void DatasetStore::append(RunRecord record) {
  validate(record);
  std::lock_guard lock(mutex_);
  append_line(path_, record_to_json_line(record));
  apply(std::move(record));
}

void DatasetStore::append_setup(SetupRecord record) {
  std::lock_guard lock(mutex_);
  append_line(path_, setup_to_json_line(record));
  setups_.push_back(std::move(record));
}

std::vector<RunRecord> DatasetStore::query(const DataFilter& filter) const {
  std::vector<RunRecord> out;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [id, index] : latest_)
      if (filter.matches(history_[index])) out.push_back(history_[index]);
  }
  std::sort(out.begin(), out.end(), record_order_less);
  return out;
}

std::vector<RunRecord> DatasetStore::history() const {
  std::lock_guard lock(mutex_);
  return history_;
}

std::vector<SetupRecord> DatasetStore::setups() const {
  std::lock_guard lock(mutex_);
  return setups_;
}

std::size_t DatasetStore::size() const {
  std::lock_guard lock(mutex_);
  return latest_.size();
}

}  // namespace hpcadvisor
