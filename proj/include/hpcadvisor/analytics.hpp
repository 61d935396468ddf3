#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hpcadvisor/config.hpp"
#include "hpcadvisor/dataset.hpp"
#include "hpcadvisor/kernels.hpp"

namespace hpcadvisor {

struct ScalingPoint {
  int nnodes = 1;
  double exectime_seconds = 0.0;

  bool operator==(const ScalingPoint&) const = default;
};

// Execution time against node count for one (sku, appinputs) key, ascending nnodes.
struct ScalingSeries {
  std::string sku;
  AppInputs appinputs;
  std::vector<ScalingPoint> points;

  // Smallest node count present; speedup is measured against it.
  int baseline_nnodes() const;
};

// One series per (canonical sku, appinputs); among several records at the same node
// count the latest timestamp wins, ties going to the later record.
std::vector<ScalingSeries> build_scaling_series(std::span<const RunRecord> records);

struct MetricPoint {
  int nnodes = 1;
  double value = 0.0;

  bool operator==(const MetricPoint&) const = default;
};

// T(baseline) / T(n)
std::vector<MetricPoint> speedup(const ScalingSeries& series);
// speedup(n) * baseline / n; exceeds 1 on superlinear scaling.
std::vector<MetricPoint> efficiency(const ScalingSeries& series);
bool has_superlinear(std::span<const MetricPoint> efficiencies) noexcept;

enum class SortKey { time, cost };
std::string_view to_string(SortKey key) noexcept;
SortKey parse_sort_key(std::string_view text);

// Indices of the non-dominated points, duplicates retained, ordered by `key`
// (ties broken by the other objective, then index). O(n log n).
std::vector<std::size_t> pareto_front(std::span<const CostTime> points, SortKey key = SortKey::time);

struct AdviceRow {
  double exectime_seconds = 0.0;
  double cost = 0.0;
  int nnodes = 1;
  std::string sku;
  AppInputs appinputs;
  std::string task_id;

  bool operator==(const AdviceRow&) const = default;
};

struct Advice {
  SortKey sort_key = SortKey::time;
  std::vector<AdviceRow> rows;
  std::vector<std::string> notices;
};

// Front of the filtered current records, costed under `pricing` (stored cost is used
// for skus the catalog does not list).
Advice advice_from_records(std::span<const RunRecord> records, const PricingCatalog& pricing, SortKey key,
                           const DataFilter& filter = {});
Advice advice(const DatasetStore& store, const DataFilter& filter, const PricingCatalog& pricing, SortKey key);

// Fixed-width table: Exectime(s), Cost($), Nodes, SKU.
std::string format_advice_table(const Advice& advice);
std::string advice_to_json(const Advice& advice);
std::string format_exectime(double seconds);

}  // namespace hpcadvisor
