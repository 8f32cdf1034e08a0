#include <benchmark/benchmark.h>

#include <vector>

#include "support/generators.hpp"
#include "wws/predictor.hpp"

namespace {

void BM_Lift(benchmark::State& state) {
  const auto obs = wws::ObservableSet::default_set();
  const wws::State x = wws::State::Constant(0.3);
  for (auto _ : state) benchmark::DoNotOptimize(obs.lift(x));
}
BENCHMARK(BM_Lift);

// Least-squares fit on K lifted snapshot pairs.
void BM_FitLifted(benchmark::State& state) {
  const auto p = wws::test::planted_system(5, static_cast<int>(state.range(0)));
  const auto obs = wws::ObservableSet::default_set();
  for (auto _ : state) benchmark::DoNotOptimize(wws::fit_lifted(obs, p.Z, p.U, p.W, p.Znext, p.X, 60.0));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_FitLifted)->RangeMultiplier(10)->Range(100, 10000)->Unit(benchmark::kMillisecond)->Complexity();

void BM_Predict(benchmark::State& state) {
  const auto p = wws::test::planted_system(6, 400);
  const auto fit = wws::fit_lifted(wws::ObservableSet::default_set(), p.Z, p.U, p.W, p.Znext, p.X, 60.0);
  const std::vector<double> u(10, 0.1), w(10, 0.1);
  const wws::State x0 = wws::State::Constant(0.2);
  for (auto _ : state) benchmark::DoNotOptimize(wws::predict(fit.predictor, x0, u, w));
}
BENCHMARK(BM_Predict);

}  // namespace
