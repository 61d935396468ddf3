#include <benchmark/benchmark.h>

#include <random>

#include "hpcadvisor/analytics.hpp"
#include "hpcadvisor/kernels.hpp"

using namespace hpcadvisor;

namespace {

std::vector<CostTime> points(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<CostTime> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng)};
  return pts;
}

void BM_MaskSerial(benchmark::State& state) {
  const auto pts = points(state.range(0), 1);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::dominated_mask_serial(pts));
  state.SetComplexityN(state.range(0));
}

void BM_MaskParallel(benchmark::State& state) {
  const auto pts = points(state.range(0), 1);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::dominated_mask_parallel(pts));
  state.SetComplexityN(state.range(0));
  state.counters["threads"] = kernels::max_threads();
}

void BM_FrontSortSweep(benchmark::State& state) {
  const auto pts = points(state.range(0), 1);
  for (auto _ : state) benchmark::DoNotOptimize(pareto_front(pts));
  state.SetComplexityN(state.range(0));
}

void BM_ByAnySerial(benchmark::State& state) {
  const auto cand = points(state.range(0), 2);
  const auto ref = points(state.range(0), 3);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::dominated_by_any_serial(cand, ref, 1.05));
}

void BM_ByAnyParallel(benchmark::State& state) {
  const auto cand = points(state.range(0), 2);
  const auto ref = points(state.range(0), 3);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::dominated_by_any_parallel(cand, ref, 1.05));
}

}  // namespace

BENCHMARK(BM_MaskSerial)->RangeMultiplier(4)->Range(64, 16384)->Complexity();
BENCHMARK(BM_MaskParallel)->RangeMultiplier(4)->Range(64, 16384)->Complexity();
BENCHMARK(BM_FrontSortSweep)->RangeMultiplier(4)->Range(64, 16384)->Complexity();
BENCHMARK(BM_ByAnySerial)->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(BM_ByAnyParallel)->RangeMultiplier(4)->Range(64, 4096);

BENCHMARK_MAIN();
