#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "wws/mpc.hpp"
#include "wws/optimizer/problem.hpp"
#include "wws/stl/encoder.hpp"
#include "wws/stl/monitor.hpp"
#include "wws/stl/parser.hpp"

namespace {

void BM_ParseInputSpec(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(wws::stl::parse(wws::kInputSpec));
}
BENCHMARK(BM_ParseInputSpec);

// Robustness of the supply formula on a trace of range(0) samples.
void BM_RobustnessSupply(benchmark::State& state) {
  const auto f = wws::stl::parse("alw_[420,end] (y >= 40)");
  wws::stl::SampledSignal s;
  for (int i = 0; i < state.range(0); ++i) s.channels["y"].push_back(38.0 + 0.01 * i);
  for (auto _ : state) benchmark::DoNotOptimize(wws::stl::robustness(*f, s));
}
BENCHMARK(BM_RobustnessSupply)->Arg(21)->Arg(1000);

// Big-M encoding of the input formula over range(0) symbolic samples.
void BM_EncodeInputSpec(benchmark::State& state) {
  const auto f = wws::stl::parse(wws::kInputSpec);
  const auto n = static_cast<std::size_t>(state.range(0));
  wws::stl::EncodingConfig cfg;
  cfg.end_time = 60.0 * static_cast<double>(n - 1);
  for (auto _ : state) {
    wws::opt::ProblemBuilder b;
    wws::stl::SymbolicSignal sym(60.0);
    for (std::size_t i = 0; i < n; ++i) {
      sym.set("u", i, wws::opt::AffineExpr::variable(b.add_variable(0.0, 26.5, wws::opt::VarType::Continuous, "u")));
    }
    benchmark::DoNotOptimize(wws::stl::encode(f, sym, 0, b, cfg));
  }
}
BENCHMARK(BM_EncodeInputSpec)->Arg(10)->Arg(100);

}  // namespace
