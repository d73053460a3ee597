// Nested-window scan: direct per-k reference scan against the table-driven kernel, serial and OpenMP.

#include "snseg/dgp.hpp"
#include "snseg/scan.hpp"
#include "snseg/sn_statistic.hpp"

#include <benchmark/benchmark.h>

using namespace snseg;

namespace {

FunctionalSpec spec_for(int which) {
  switch (which) {
    case 0:
      return FunctionalSpec::mean();
    case 1:
      return FunctionalSpec::variance();
    default:
      return FunctionalSpec::quantile(1, 0.9);
  }
}

TimeSeries series(int n) { return generate(make_preset("NULL:n=" + std::to_string(n) + ",rho=0.5"), 1).series; }

void BM_ReferenceScan(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Estimator est(series(n), spec_for(static_cast<int>(state.range(1))));
  const int h = n / 20;
  for (auto _ : state) {
    double best = 0.0;
    for (int k = h; k <= n - h; ++k) best = std::max(best, max_window_statistic(est, k, 1, n, h).T);
    benchmark::DoNotOptimize(best);
  }
}

void BM_NestedScan(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Estimator est(series(n), spec_for(static_cast<int>(state.range(1))));
  const int threads = static_cast<int>(state.range(2));
  for (auto _ : state) {
    const NestedScan scan(est, n / 20, threads);
    benchmark::DoNotOptimize(scan.global_max());
  }
}

void BM_SingleCpProfile(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Estimator est(series(n), spec_for(static_cast<int>(state.range(1))));
  const int threads = static_cast<int>(state.range(2));
  for (auto _ : state) benchmark::DoNotOptimize(single_cp_profile(est, 1, n, threads));
}

}  // namespace

// Second argument selects the functional: 0 mean, 1 variance, 2 quantile.
BENCHMARK(BM_ReferenceScan)->ArgsProduct({{250, 500}, {0, 1, 2}})->Unit(benchmark::kMillisecond);
// Third argument is the thread count; 0 uses every available core.
BENCHMARK(BM_NestedScan)->ArgsProduct({{500, 1000, 2000}, {0, 1, 2}, {1, 0}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SingleCpProfile)->ArgsProduct({{1000, 2000}, {0, 1}, {1, 0}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
