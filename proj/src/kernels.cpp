#include "hpcadvisor/kernels.hpp"

#include <omp.h>

namespace hpcadvisor::kernels {

std::vector<std::uint8_t> dominated_mask_serial(std::span<const CostTime> points) {
  const std::size_t n = points.size();
  std::vector<std::uint8_t> mask(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && dominates(points[j], points[i])) {
        mask[i] = 1;
        break;
      }
    }
  }
  return mask;
}

std::vector<std::uint8_t> dominated_mask_parallel(std::span<const CostTime> points) {
  const auto n = static_cast<std::ptrdiff_t>(points.size());
  std::vector<std::uint8_t> mask(points.size(), 0);
  const bool go_parallel = points.size() * points.size() >= kParallelThreshold;
#pragma omp parallel for schedule(dynamic, 64) if (go_parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const CostTime q = points[i];
    std::uint8_t hit = 0;
    for (std::ptrdiff_t j = 0; j < n && !hit; ++j) hit = (j != i) && dominates(points[j], q);
    mask[i] = hit;
  }
  return mask;
}

std::vector<std::uint8_t> dominated_by_any_serial(std::span<const CostTime> candidates,
                                                  std::span<const CostTime> reference, double inflate) {
  std::vector<std::uint8_t> mask(candidates.size(), 0);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    for (const auto& r : reference) {
      if (dominates({r.cost * inflate, r.time * inflate}, candidates[i])) {
        mask[i] = 1;
        break;
      }
    }
  }
  return mask;
}

std::vector<std::uint8_t> dominated_by_any_parallel(std::span<const CostTime> candidates,
                                                    std::span<const CostTime> reference, double inflate) {
  const auto n = static_cast<std::ptrdiff_t>(candidates.size());
  const auto m = reference.size();
  std::vector<std::uint8_t> mask(candidates.size(), 0);
  const bool go_parallel = candidates.size() * m >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (go_parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const CostTime c = candidates[i];
    std::uint8_t hit = 0;
    for (std::size_t j = 0; j < m && !hit; ++j)
      hit = dominates({reference[j].cost * inflate, reference[j].time * inflate}, c);
    mask[i] = hit;
  }
  return mask;
}

int max_threads() noexcept { return omp_get_max_threads(); }

}  // namespace hpcadvisor::kernels
