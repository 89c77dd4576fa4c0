#include "chainfolio/marketdata.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace md = chainfolio::marketdata;

namespace {

void BM_LedoitWolf(benchmark::State& state) {
  const auto n = state.range(0);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(0.0, 0.04);
  Eigen::MatrixXd r(60, n);
  for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = z(rng);
  for (auto _ : state) benchmark::DoNotOptimize(md::ledoit_wolf_constant_correlation(r));
}
BENCHMARK(BM_LedoitWolf)->Arg(2)->Arg(10)->Arg(50);

}  // namespace

BENCHMARK_MAIN();
