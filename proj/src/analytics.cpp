#include "hpcadvisor/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "hpcadvisor/errors.hpp"
#include "json.hpp"

namespace hpcadvisor {

int ScalingSeries::baseline_nnodes() const {
  if (points.empty()) throw Error(fmt::format("empty scaling series for '{}'", sku));
  return points.front().nnodes;
}

std::vector<ScalingSeries> build_scaling_series(std::span<const RunRecord> records) {
  using Key = std::pair<std::string, AppInputs>;
  struct Slot {
    double time;
    const std::string* timestamp;
  };
  std::map<Key, std::map<int, Slot>> grouped;
  std::map<Key, std::string> label;
  for (const auto& r : records) {
    Key key{canonical_sku(r.sku), r.appinputs};
    label.try_emplace(key, r.sku);
    auto& by_n = grouped[key];
    auto it = by_n.find(r.nnodes);
    if (it == by_n.end() || !(r.timestamp < *it->second.timestamp))
      by_n.insert_or_assign(r.nnodes, Slot{r.exectime_seconds, &r.timestamp});
  }
  std::vector<ScalingSeries> out;
  for (const auto& [key, by_n] : grouped) {
    ScalingSeries s{label[key], key.second, {}};
    for (const auto& [n, slot] : by_n) s.points.push_back({n, slot.time});
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<MetricPoint> speedup(const ScalingSeries& series) {
  const int base_n = series.baseline_nnodes();
  const double base_t = series.points.front().exectime_seconds;
  std::vector<MetricPoint> out;
  out.reserve(series.points.size());
  for (const auto& p : series.points) out.push_back({p.nnodes, p.nnodes == base_n ? 1.0 : base_t / p.exectime_seconds});
  return out;
}

std::vector<MetricPoint> efficiency(const ScalingSeries& series) {
  const int base_n = series.baseline_nnodes();
  auto out = speedup(series);
  for (auto& m : out) m.value = m.value * base_n / m.nnodes;
  return out;
}

bool has_superlinear(std::span<const MetricPoint> efficiencies) noexcept {
  return std::any_of(efficiencies.begin(), efficiencies.end(), [](const MetricPoint& m) { return m.value > 1.0; });
}

std::string_view to_string(SortKey key) noexcept { return key == SortKey::cost ? "cost" : "time"; }

SortKey parse_sort_key(std::string_view text) {
  if (text == "time" || text == "exectime") return SortKey::time;
  if (text == "cost") return SortKey::cost;
  throw ConfigError("sort", fmt::format("unknown sort key '{}' (expected time or cost)", text));
}

std::vector<std::size_t> pareto_front(std::span<const CostTime> points, SortKey key) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(points[a].cost, points[a].time, a) < std::tie(points[b].cost, points[b].time, b);
  });

  // Sweep by ascending cost. Within a group of equal cost only the minimum-time points
  // survive, and only if they beat every strictly cheaper point on time.
  std::vector<std::size_t> front;
  double best_time = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < order.size();) {
    std::size_t end = g;
    const double cost = points[order[g]].cost;
    while (end < order.size() && points[order[end]].cost == cost) ++end;
    const double group_min = points[order[g]].time;
    if (group_min < best_time) {
      for (std::size_t k = g; k < end && points[order[k]].time == group_min; ++k) front.push_back(order[k]);
      best_time = group_min;
    }
    g = end;
  }

  if (key == SortKey::time) {
    std::sort(front.begin(), front.end(), [&](std::size_t a, std::size_t b) {
      return std::tie(points[a].time, points[a].cost, a) < std::tie(points[b].time, points[b].cost, b);
    });
  }
  return front;
}

Advice advice_from_records(std::span<const RunRecord> records, const PricingCatalog& pricing, SortKey key,
                           const DataFilter& filter) {
  Advice result;
  result.sort_key = key;
  std::vector<const RunRecord*> selected;
  for (const auto& r : records)
    if (filter.matches(r)) selected.push_back(&r);
  if (selected.empty()) {
    result.notices.push_back("no records match the filter; nothing to advise");
    return result;
  }

  std::map<std::string, std::set<std::string>> values;
  for (const auto* r : selected)
    for (const auto& [k, v] : r->appinputs) values[k].insert(v);
  for (const auto& [k, vs] : values) {
    if (vs.size() > 1 && !filter.appinputs.contains(k))
      result.notices.push_back(fmt::format(
          "appinput '{}' is not pinned by the filter; the front mixes {} different values", k, vs.size()));
  }

  std::set<std::string> unpriced;
  std::vector<CostTime> points;
  points.reserve(selected.size());
  for (const auto* r : selected) {
    double cost = r->cost;
    if (const auto* info = pricing.find(r->sku))
      cost = task_cost(r->exectime_seconds, r->nnodes, info->price_per_node_hour);
    else if (pricing.size() > 0)
      unpriced.insert(canonical_sku(r->sku));
    points.push_back({cost, r->exectime_seconds});
  }
  for (const auto& s : unpriced)
    result.notices.push_back(fmt::format("sku '{}' is not in the pricing catalog; using stored cost", s));

  for (std::size_t i : pareto_front(points, key)) {
    const auto* r = selected[i];
    result.rows.push_back({points[i].time, points[i].cost, r->nnodes, canonical_sku(r->sku), r->appinputs, r->task_id});
  }
  return result;
}

Advice advice(const DatasetStore& store, const DataFilter& filter, const PricingCatalog& pricing, SortKey key) {
  const auto records = store.query(filter);
  return advice_from_records(records, pricing, key, filter);
}

std::string format_exectime(double seconds) {
  if (std::abs(seconds - std::round(seconds)) < 1e-9) return fmt::format("{:.0f}", seconds);
  return fmt::format("{:.2f}", seconds);
}

std::string format_advice_table(const Advice& advice) {
  std::string out = fmt::format("{:<18}{:<14}{:<12}{}\n", "Exectime(s)", "Cost($)", "Nodes", "SKU");
  for (const auto& row : advice.rows)
    out += fmt::format("{:<18}{:<14}{:<12}{}\n", format_exectime(row.exectime_seconds),
                       fmt::format("{:.4f}", row.cost), row.nnodes, row.sku);
  return out;
}

std::string advice_to_json(const Advice& advice) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : advice.rows)
    rows.push_back({{"exectime_seconds", r.exectime_seconds},
                    {"cost", r.cost},
                    {"nnodes", r.nnodes},
                    {"sku", r.sku},
                    {"appinputs", r.appinputs},
                    {"task_id", r.task_id}});
  return nlohmann::json{{"sort", to_string(advice.sort_key)}, {"rows", rows}, {"notices", advice.notices}}.dump(2) +
         "\n";
}

}  // namespace hpcadvisor
