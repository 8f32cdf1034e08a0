#include <benchmark/benchmark.h>

#include "wws/plant.hpp"

namespace {

const wws::PlantModel& model() {
  static const wws::PlantModel m = wws::PlantModel::tabulated();
  return m;
}

void BM_VectorField(benchmark::State& state) {
  const wws::State x = wws::State::Constant(30.0);
  for (auto _ : state) benchmark::DoNotOptimize(wws::vector_field(model(), x, 23.0, 10.0));
}
BENCHMARK(BM_VectorField);

void BM_Jacobian(benchmark::State& state) {
  const wws::State x = wws::State::Constant(30.0);
  for (auto _ : state) benchmark::DoNotOptimize(wws::jacobian(model(), x, 23.0, 10.0));
}
BENCHMARK(BM_Jacobian);

// One sampling period of the stiff plant; the explicit substep ceiling dominates the cost.
void BM_StepDormandPrince(benchmark::State& state) {
  const wws::State x = wws::State::Constant(15.0);
  for (auto _ : state) benchmark::DoNotOptimize(wws::step(model(), x, 23.0, 10.0, 60.0));
}
BENCHMARK(BM_StepDormandPrince)->Unit(benchmark::kMillisecond);

void BM_StepTrapezoidal(benchmark::State& state) {
  wws::IntegratorOptions o;
  o.kind = wws::IntegratorKind::Trapezoidal;
  const wws::State x = wws::State::Constant(15.0);
  for (auto _ : state) benchmark::DoNotOptimize(wws::step(model(), x, 23.0, 10.0, 60.0, o));
}
BENCHMARK(BM_StepTrapezoidal)->Unit(benchmark::kMillisecond);

}  // namespace
