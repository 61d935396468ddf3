#pragma once

#include <set>
#include <span>
#include <string>
#include <vector>

#include "hpcadvisor/analytics.hpp"
#include "hpcadvisor/config.hpp"
#include "hpcadvisor/dataset.hpp"
#include "hpcadvisor/executor.hpp"
#include "hpcadvisor/scenario.hpp"

namespace hpcadvisor {

// T(n) = a * n^b, fitted by least squares on (log n, log T).
struct ScalingFit {
  bool valid = false;
  double a = 0.0;
  double b = 0.0;
  double residual = 0.0;  // RMS of log-space residuals
  std::size_t samples = 0;

  double predict(int nnodes) const;
};

// Needs at least two distinct node counts with positive times; otherwise !valid.
ScalingFit fit_scaling(std::span<const ScalingPoint> points);
ScalingFit fit_scaling(std::span<const RunRecord> records);

// Skus with at least `min_samples` completed records, every one of which is dominated
// by a record of another sku with the same appinputs whose cost and time were inflated
// by (1 + margin).
std::set<std::string> discarded_skus(std::span<const RunRecord> completed, double margin, int min_samples);

// Ids of the pending tasks whose sku is discarded.
std::set<std::string> discard_vm_types(std::span<const RunRecord> completed, std::span<const TaskSpec> pending,
                                       double margin, int min_samples);

// True when the fitted prediction for `task`, deflated by (1 - margin) in both cost
// and time, is still dominated by a completed record with the same appinputs.
bool prediction_dominated(const TaskSpec& task, std::span<const RunRecord> completed, const PricingCatalog& pricing,
                          double margin);

struct SamplerOptions {
  double margin = 0.05;
  int min_samples = 3;
  bool discard = true;
  bool regression = true;
};

class ParetoSampler final : public SamplingStrategy {
 public:
  ParetoSampler(const PricingCatalog& pricing, SamplerOptions options = {});
  bool should_skip(const TaskSpec& task, std::span<const RunRecord> completed) override;
  const SamplerOptions& options() const noexcept { return options_; }

 private:
  const PricingCatalog& pricing_;
  SamplerOptions options_;
};

}  // namespace hpcadvisor
