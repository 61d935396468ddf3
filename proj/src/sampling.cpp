#include "hpcadvisor/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "hpcadvisor/kernels.hpp"

namespace hpcadvisor {

double ScalingFit::predict(int nnodes) const { return a * std::pow(static_cast<double>(nnodes), b); }

ScalingFit fit_scaling(std::span<const ScalingPoint> points) {
  ScalingFit fit;
  std::set<int> distinct;
  for (const auto& p : points) {
    if (!(p.exectime_seconds > 0.0) || p.nnodes < 1) return fit;
    distinct.insert(p.nnodes);
  }
  fit.samples = points.size();
  if (distinct.size() < 2) return fit;

  const double n = static_cast<double>(points.size());
  double sx = 0, sy = 0;
  for (const auto& p : points) {
    sx += std::log(static_cast<double>(p.nnodes));
    sy += std::log(p.exectime_seconds);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (const auto& p : points) {
    const double dx = std::log(static_cast<double>(p.nnodes)) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(p.exectime_seconds) - my);
  }
  fit.b = sxy / sxx;
  const double log_a = my - fit.b * mx;
  fit.a = std::exp(log_a);
  double ss = 0;
  for (const auto& p : points) {
    const double r = std::log(p.exectime_seconds) - (log_a + fit.b * std::log(static_cast<double>(p.nnodes)));
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / n);
  fit.valid = true;
  return fit;
}

ScalingFit fit_scaling(std::span<const RunRecord> records) {
  std::vector<ScalingPoint> points;
  points.reserve(records.size());
  for (const auto& r : records) points.push_back({r.nnodes, r.exectime_seconds});
  return fit_scaling(points);
}

std::set<std::string> discarded_skus(std::span<const RunRecord> completed, double margin, int min_samples) {
  std::map<std::string, std::vector<const RunRecord*>> by_sku;
  for (const auto& r : completed) by_sku[canonical_sku(r.sku)].push_back(&r);

  std::set<std::string> out;
  const double inflate = 1.0 + margin;
  for (const auto& [sku, own] : by_sku) {
    if (static_cast<int>(own.size()) < min_samples) continue;
    // Group this sku's points and the competitors' points by appinputs.
    std::map<AppInputs, std::pair<std::vector<CostTime>, std::vector<CostTime>>> groups;
    for (const auto* r : own) groups[r->appinputs].first.push_back({r->cost, r->exectime_seconds});
    for (const auto& r : completed) {
      if (canonical_sku(r.sku) == sku) continue;
      auto it = groups.find(r.appinputs);
      if (it != groups.end()) it->second.second.push_back({r.cost, r.exectime_seconds});
    }
    bool all_dominated = true;
    for (const auto& [inputs, sides] : groups) {
      const auto mask = kernels::dominated_by_any_parallel(sides.first, sides.second, inflate);
      if (std::find(mask.begin(), mask.end(), std::uint8_t{0}) != mask.end()) {
        all_dominated = false;
        break;
      }
    }
    if (all_dominated) out.insert(sku);
  }
  return out;
}

std::set<std::string> discard_vm_types(std::span<const RunRecord> completed, std::span<const TaskSpec> pending,
                                       double margin, int min_samples) {
  const auto skus = discarded_skus(completed, margin, min_samples);
  std::set<std::string> ids;
  for (const auto& t : pending)
    if (t.status == TaskStatus::pending && skus.contains(canonical_sku(t.sku))) ids.insert(t.id);
  return ids;
}

bool prediction_dominated(const TaskSpec& task, std::span<const RunRecord> completed, const PricingCatalog& pricing,
                          double margin) {
  const auto* info = pricing.find(task.sku);
  if (!info) return false;
  const auto sku = canonical_sku(task.sku);
  std::vector<ScalingPoint> own;
  std::vector<CostTime> reference;
  for (const auto& r : completed) {
    if (r.appinputs != task.appinputs) continue;
    reference.push_back({r.cost, r.exectime_seconds});
    if (canonical_sku(r.sku) == sku) own.push_back({r.nnodes, r.exectime_seconds});
  }
  const auto fit = fit_scaling(own);
  if (!fit.valid) return false;
  const double time = fit.predict(task.nnodes);
  const double cost = task_cost(time, task.nnodes, info->price_per_node_hour);
  const double deflate = 1.0 - margin;
  const CostTime candidate{cost * deflate, time * deflate};
  const auto mask = kernels::dominated_by_any_parallel(std::span(&candidate, 1), reference);
  return mask.front() != 0;
}

ParetoSampler::ParetoSampler(const PricingCatalog& pricing, SamplerOptions options)
    : pricing_(pricing), options_(options) {}

bool ParetoSampler::should_skip(const TaskSpec& task, std::span<const RunRecord> completed) {
  if (options_.discard &&
      discarded_skus(completed, options_.margin, options_.min_samples).contains(canonical_sku(task.sku)))
    return true;
  return options_.regression && prediction_dominated(task, completed, pricing_, options_.margin);
}

}  // namespace hpcadvisor
