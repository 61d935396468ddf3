#include "hpcadvisor/executor.hpp"

#include <cctype>
#include <cmath>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <set>

#include <fmt/format.h>

#include "hpcadvisor/errors.hpp"

namespace hpcadvisor {

std::string_view to_string(TeardownMode mode) noexcept {
  return mode == TeardownMode::remove ? "delete" : "resize-to-zero";
}

TeardownMode parse_teardown_mode(std::string_view text) {
  if (text == "delete" || text == "remove") return TeardownMode::remove;
  if (text == "resize-to-zero" || text == "zero" || text == "resize") return TeardownMode::resize_to_zero;
  throw ConfigError("teardown", fmt::format("unknown teardown mode '{}' (expected resize-to-zero or delete)", text));
}

namespace {

bool is_blank(char c) { return c == ' ' || c == '\t'; }

bool valid_var_name(std::string_view name) {
  if (name.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_')) return false;
  for (char c : name)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  return true;
}

}  // namespace

AdvisorVarScan scan_advisor_vars(std::string_view text) {
  AdvisorVarScan scan;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto eol = text.find('\n', pos);
    auto line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;

    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::size_t i = 0;
    while (i < line.size() && is_blank(line[i])) ++i;
    line.remove_prefix(i);
    if (!line.starts_with(kAdvisorVarMarker)) continue;
    auto rest = line.substr(kAdvisorVarMarker.size());
    if (rest.empty() || !is_blank(rest.front())) {
      if (rest.empty()) ++scan.malformed;
      continue;
    }
    while (!rest.empty() && is_blank(rest.front())) rest.remove_prefix(1);
    auto eq = rest.find('=');
    if (eq == std::string_view::npos || !valid_var_name(rest.substr(0, eq))) {
      ++scan.malformed;
      continue;
    }
    scan.vars[std::string(rest.substr(0, eq))] = std::string(rest.substr(eq + 1));
  }
  return scan;
}

std::map<std::string, std::string> parse_advisor_vars(std::string_view text) { return scan_advisor_vars(text).vars; }

double effective_exectime(const RawRunResult& result) {
  if (auto it = result.advisor_vars.find("APPEXECTIME"); it != result.advisor_vars.end()) {
    const char* begin = it->second.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    while (end && is_blank(*end)) ++end;
    if (end != begin && end && *end == '\0' && v > 0.0 && std::isfinite(v)) return v;
  }
  return result.wallclock_seconds;
}

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

CollectionReport process_tasks(TaskList& list, ExecutorBackend& backend, DatasetStore& store,
                               const PricingCatalog& pricing, const CollectOptions& options) {
  if (!backend.has_deployment()) throw StateError("no active deployment for collection");
  const auto started = std::chrono::steady_clock::now();
  auto now = [&] { return options.clock ? options.clock() : utc_timestamp(); };
  auto changed = [&] {
    if (options.on_status_change) options.on_status_change(list);
  };

  CollectionReport report;
  if (options.retry_failed) {
    bool any = false;
    for (auto& t : list.tasks) {
      if (t.status == TaskStatus::failed) {
        update_status(list, t.id, TaskStatus::pending, true);
        any = true;
      }
    }
    if (any) changed();
  }
  report.previously_completed = list.counts().completed;

  std::vector<RunRecord> completed;
  if (options.sampler) completed = store.current();

  std::optional<std::string> previous_sku;
  bool pool_live = false;
  bool pool_sized_for_sku = false;
  const auto deployment = backend.deployment_id();

  for (std::size_t i = 0; i < list.tasks.size(); ++i) {
    if (options.stop_requested && options.stop_requested()) {
      report.interrupted = true;
      break;
    }
    const TaskSpec task = list.tasks[i];
    if (task.status != TaskStatus::pending) continue;
    if (options.sampler && options.sampler->should_skip(task, completed)) {
      report.skipped_ids.push_back(task.id);
      continue;
    }

    if (!previous_sku || *previous_sku != task.sku) {
      if (pool_live) {
        backend.teardown_pool(options.teardown);
        pool_live = false;
      }
      previous_sku = task.sku;
      pool_sized_for_sku = false;
      auto setup = backend.run_setup(task.sku);
      ++report.setups;
      store.append_setup(SetupRecord{task.sku, setup.seconds, setup.ok, deployment, now()});
      if (!setup.ok) {
        for (std::size_t j = i; j < list.tasks.size(); ++j) {
          auto& other = list.tasks[j];
          if (other.sku == task.sku && other.status == TaskStatus::pending)
            update_status(list, other.id, TaskStatus::failed);
        }
        changed();
        continue;
      }
    }

    RawRunResult result;
    try {
      backend.resize_pool(task.sku, task.nnodes);
      if (!pool_sized_for_sku) {
        ++report.pool_creations;
        pool_sized_for_sku = true;
      }
      pool_live = true;
      result = backend.execute(task);
    } catch (const Error&) {
      result.exit_ok = false;
    }

    result.advisor_vars = parse_advisor_vars(result.stdout_text);
    const double exectime = effective_exectime(result);
    const auto* price = pricing.find(task.sku);
    if (result.exit_ok && exectime > 0.0 && price) {
      RunRecord record;
      record.task_id = task.id;
      record.sku = task.sku;
      record.nnodes = task.nnodes;
      record.ppn = task.ppn;
      record.appinputs = task.appinputs;
      record.tags = task.tags;
      record.exectime_seconds = exectime;
      record.wallclock_seconds = result.wallclock_seconds;
      record.cost = task_cost(exectime, task.nnodes, price->price_per_node_hour);
      record.advisor_vars = result.advisor_vars;
      record.utilization = result.utilization;
      record.deployment_id = deployment;
      record.timestamp = now();
      store.append(record);
      if (options.sampler) completed.push_back(std::move(record));
      update_status(list, task.id, TaskStatus::completed);
      ++report.executed;
    } else {
      update_status(list, task.id, TaskStatus::failed);
    }
    changed();
  }

  if (pool_live) backend.teardown_pool(options.teardown);

  const auto counts = list.counts();
  report.failed = counts.failed;
  report.skipped_by_sampler = report.skipped_ids.size();
  report.remaining_pending = counts.pending - report.skipped_by_sampler;
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace hpcadvisor
