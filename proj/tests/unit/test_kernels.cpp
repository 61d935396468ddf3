#include <gtest/gtest.h>

#include <random>

#include "hpcadvisor/kernels.hpp"

using namespace hpcadvisor;

namespace {

std::vector<CostTime> random_points(std::mt19937_64& rng, std::size_t n, int grid) {
  std::uniform_int_distribution<int> d(0, grid);
  std::vector<CostTime> pts(n);
  for (auto& p : pts) p = {d(rng) / double(grid), d(rng) / double(grid)};
  return pts;
}

std::vector<std::uint8_t> brute_mask(const std::vector<CostTime>& pts) {
  std::vector<std::uint8_t> m(pts.size(), 0);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts.size(); ++j) {
      const auto& p = pts[j];
      const auto& q = pts[i];
      if (p.cost <= q.cost && p.time <= q.time && (p.cost < q.cost || p.time < q.time)) m[i] = 1;
    }
  return m;
}

}  // namespace

TEST(Dominance, Relation) {
  EXPECT_TRUE(dominates({1, 1}, {1, 2}));
  EXPECT_TRUE(dominates({1, 1}, {2, 2}));
  EXPECT_FALSE(dominates({1, 1}, {1, 1}));
  EXPECT_FALSE(dominates({1, 3}, {2, 2}));
}

TEST(Kernels, SerialMatchesBruteForce) {
  std::mt19937_64 rng(3);
  for (int it = 0; it < 200; ++it) {
    const auto pts = random_points(rng, rng() % 60, 8);
    EXPECT_EQ(kernels::dominated_mask_serial(pts), brute_mask(pts));
  }
}

TEST(Kernels, ParallelMatchesSerial) {
  std::mt19937_64 rng(4);
  for (std::size_t n : {0u, 1u, 2u, 63u, 64u, 65u, 500u, 3000u}) {
    const auto pts = random_points(rng, n, 50);
    EXPECT_EQ(kernels::dominated_mask_parallel(pts), kernels::dominated_mask_serial(pts)) << n;
  }
  EXPECT_GE(kernels::max_threads(), 1);
}

TEST(Kernels, DominatedByAny) {
  const std::vector<CostTime> ref = {{1, 1}};
  const std::vector<CostTime> cand = {{1.04, 1.04}, {1.06, 1.06}, {0.9, 5}, {1, 1}};
  EXPECT_EQ(kernels::dominated_by_any_serial(cand, ref), (std::vector<std::uint8_t>{1, 1, 0, 0}));
  EXPECT_EQ(kernels::dominated_by_any_serial(cand, ref, 1.05), (std::vector<std::uint8_t>{0, 1, 0, 0}));

  std::mt19937_64 rng(5);
  for (int it = 0; it < 20; ++it) {
    const auto c = random_points(rng, 200 + rng() % 300, 30);
    const auto r = random_points(rng, 1 + rng() % 100, 30);
    EXPECT_EQ(kernels::dominated_by_any_parallel(c, r, 1.05), kernels::dominated_by_any_serial(c, r, 1.05));
  }
}
