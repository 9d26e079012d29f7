#include <benchmark/benchmark.h>

#include <numeric>
#include <random>
#include <vector>

#include "monogls/baselines.hpp"
#include "monogls/isotonic.hpp"
#include "monogls/mgls.hpp"
#include "monogls/montecarlo.hpp"
#include "monogls/single_index.hpp"

using namespace monogls;

namespace {

Dataset draw(int dgp, std::size_t n) {
  Rng rng = stream(42, 0);
  return generate(DgpSpec::make(dgp, n), rng).data;
}

void BM_Pava(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng = stream(1, 0);
  std::normal_distribution<double> nd;
  std::vector<double> x(n), y(n);
  std::iota(x.begin(), x.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) y[i] = 1e-3 * static_cast<double>(i) + nd(rng);
  for (auto _ : state) benchmark::DoNotOptimize(pava(x, y, {}));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Pava)->RangeMultiplier(4)->Range(256, 1 << 18)->Complexity();

void BM_FitMgls(benchmark::State& state) {
  const Dataset d = draw(1, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(fit_mgls(d));
}
BENCHMARK(BM_FitMgls)->Arg(100)->Arg(500)->Arg(5000)->Arg(50000);

void BM_FitKnnAuto(benchmark::State& state) {
  const Dataset d = draw(1, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(fit_fgls_knn(d));
}
BENCHMARK(BM_FitKnnAuto)->Arg(100)->Arg(500);

void BM_EstimateIndex(benchmark::State& state) {
  const Dataset d = draw(3, static_cast<std::size_t>(state.range(0)));
  IndexOptions io;
  io.n_starts = 10;
  for (auto _ : state) benchmark::DoNotOptimize(fit_mgls_index(d, {}, io));
}
BENCHMARK(BM_EstimateIndex)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
