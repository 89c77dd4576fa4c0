#include "chainfolio/frontier.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace fr = chainfolio::frontier;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Problem {
  VectorXd w0, mu;
  MatrixXd cov;
};

Problem random_problem(int n) {
  std::mt19937_64 rng(static_cast<unsigned>(n));
  std::normal_distribution<double> z(0.0, 1.0);
  MatrixXd a(n, n + 5);
  for (int i = 0; i < a.size(); ++i) a.data()[i] = 0.03 * z(rng);
  Problem p;
  p.cov = a * a.transpose() / (n + 5) + 1e-4 * MatrixXd::Identity(n, n);
  p.mu = VectorXd(n);
  for (int i = 0; i < n; ++i) p.mu(i) = 0.0005 + 0.002 * z(rng);
  p.w0 = VectorXd::Constant(n, 1.0 / n);
  return p;
}

void BM_Solve(benchmark::State& state, fr::StrategyKind kind) {
  const auto p = random_problem(static_cast<int>(state.range(0)));
  const auto c = fr::ConstraintSet::from_initial(p.w0);
  for (auto _ : state) benchmark::DoNotOptimize(fr::solve(kind, p.w0, p.mu, p.cov, c));
}
BENCHMARK_CAPTURE(BM_Solve, MinVar, fr::StrategyKind::MinVar)->Arg(2)->Arg(5)->Arg(20);
BENCHMARK_CAPTURE(BM_Solve, MaxRet, fr::StrategyKind::MaxRet)->Arg(2)->Arg(5)->Arg(20);
BENCHMARK_CAPTURE(BM_Solve, MaxSR, fr::StrategyKind::MaxSR)->Arg(2)->Arg(5)->Arg(20);

void BM_GridOracle(benchmark::State& state) {
  const auto p = random_problem(3);
  const auto c = fr::ConstraintSet::from_initial(p.w0);
  for (auto _ : state) benchmark::DoNotOptimize(fr::grid_oracle(fr::StrategyKind::MaxSR, p.w0, p.mu, p.cov, c));
}
BENCHMARK(BM_GridOracle);

}  // namespace

BENCHMARK_MAIN();
