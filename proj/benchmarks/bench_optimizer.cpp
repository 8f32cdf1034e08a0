#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "support/generators.hpp"
#include "support/surrogate.hpp"
#include "wws/mpc.hpp"
#include "wws/optimizer/condense.hpp"
#include "wws/optimizer/miqp.hpp"
#include "wws/optimizer/qp.hpp"

namespace {

// Continuous QP with range(0) variables and 2 * range(0) random rows.
void BM_SolveQp(benchmark::State& state) {
  std::mt19937_64 rng(11);
  const int n = static_cast<int>(state.range(0));
  const auto p = wws::test::random_miqp(rng, n, 0, 2 * n, true);
  for (auto _ : state) benchmark::DoNotOptimize(wws::opt::solve_qp(p));
}
BENCHMARK(BM_SolveQp)->Arg(4)->Arg(16)->Arg(64)->Unit(benchmark::kMicrosecond);

// Branch and bound with range(0) binaries next to four continuous variables.
void BM_SolveMiqp(benchmark::State& state) {
  std::mt19937_64 rng(12);
  const auto p = wws::test::random_miqp(rng, 4, static_cast<int>(state.range(0)), 8, false);
  std::size_t nodes = 0;
  for (auto _ : state) {
    const auto r = wws::opt::solve_miqp(p);
    nodes = r.nodes;
    benchmark::DoNotOptimize(r);
  }
  state.counters["nodes"] = static_cast<double>(nodes);
}
BENCHMARK(BM_SolveMiqp)->DenseRange(2, 12, 5)->Unit(benchmark::kMillisecond);

const wws::LinearPredictor& surrogate() {
  static const wws::LinearPredictor p = wws::test::surrogate_predictor();
  return p;
}

void BM_Condense(benchmark::State& state) {
  const std::vector<double> w(10, 10.0);
  const Eigen::VectorXd z0 = surrogate().lift(wws::State::Constant(20.0));
  for (auto _ : state) benchmark::DoNotOptimize(wws::opt::condense(surrogate(), z0, 10, w));
}
BENCHMARK(BM_Condense)->Unit(benchmark::kMicrosecond);

// One receding-horizon step with both default formulas: encoding plus branch and bound.
void BM_PlanStep(benchmark::State& state) {
  wws::Controller ctl(wws::ControllerConfig{}, surrogate());
  const wws::State x0 = wws::State::Constant(30.0);
  wws::History h;
  h.x.push_back(x0);
  h.y.push_back(wws::output(x0));
  for (auto _ : state) benchmark::DoNotOptimize(ctl.plan_step(h, x0, 0));
}
BENCHMARK(BM_PlanStep)->Unit(benchmark::kMillisecond);

}  // namespace
