#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace hpcadvisor {

struct CostTime {
  double cost = 0.0;
  double time = 0.0;

  bool operator==(const CostTime&) const = default;
};

// Weak domination under minimisation of both objectives.
constexpr bool dominates(const CostTime& p, const CostTime& q) noexcept {
  return p.cost <= q.cost && p.time <= q.time && (p.cost < q.cost || p.time < q.time);
}

namespace kernels {

// mask[i] != 0 iff points[i] is dominated by some other point. O(n^2).
std::vector<std::uint8_t> dominated_mask_serial(std::span<const CostTime> points);
std::vector<std::uint8_t> dominated_mask_parallel(std::span<const CostTime> points);

// mask[i] != 0 iff some reference point, with cost and time scaled by `inflate`,
// dominates candidates[i].
std::vector<std::uint8_t> dominated_by_any_serial(std::span<const CostTime> candidates,
                                                  std::span<const CostTime> reference, double inflate = 1.0);
std::vector<std::uint8_t> dominated_by_any_parallel(std::span<const CostTime> candidates,
                                                    std::span<const CostTime> reference, double inflate = 1.0);

// Below this many pairwise comparisons the parallel kernels run serially.
inline constexpr std::size_t kParallelThreshold = 4096;

int max_threads() noexcept;

}  // namespace kernels
}  // namespace hpcadvisor
