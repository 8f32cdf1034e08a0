#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wws/error.hpp"
#include "wws/experiment.hpp"

namespace {

// Flags left unset on the command line keep the value from the config/environment layer.
struct Flags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
  std::optional<std::string> plant;
  std::optional<std::string> predictor;
  std::optional<std::string> spec;
  std::optional<std::string> dump_lp;
  bool svg = false;
  bool no_stl = false;

  std::optional<std::size_t> K;
  std::optional<double> h;
  std::vector<double> state_range;
  std::vector<double> u_band;
  std::optional<double> p_off;
  std::optional<double> w0;
  bool local = false;
  std::optional<double> target_y;
  std::optional<double> u_star;

  std::optional<double> x0;
  std::optional<int> Np;
};

void add_common(CLI::App* app, Flags& f) {
  app->set_help_flag("--help", "Print this help message and exit");  // frees -h/--h for the sampling period
  app->add_option("--config", f.config, "JSON configuration file")->check(CLI::ExistingFile);
  app->add_option("--seed", f.seed, "Seed for dataset generation and sampling");
  app->add_option("--out", f.out, "Output directory");
  app->add_option("--threads", f.threads, "Worker threads (0 = hardware concurrency)");
  app->add_option("--plant", f.plant, "Plant coefficient JSON (default: tabulated set)");
}

void add_fit(CLI::App* app, Flags& f) {
  app->add_option("--K", f.K, "Number of snapshot pairs");
  app->add_option("--h", f.h, "Sampling period [s]");
  app->add_option("--state-range", f.state_range, "Sampled state box lo hi [degC]")->expected(2);
  app->add_option("--u-band", f.u_band, "Running input band lo hi [kW]")->expected(2);
  app->add_option("--p-off", f.p_off, "Probability of sampling u = 0");
  app->add_option("--w0", f.w0, "Constant outflow during fitting");
  app->add_flag("--local", f.local, "Fit the local-linearisation baseline instead");
  app->add_option("--target-y", f.target_y, "Output at the linearisation point [degC]");
  app->add_option("--u-star", f.u_star, "Input at the linearisation point [kW]");
}

void add_control(CLI::App* app, Flags& f) {
  app->add_option("--predictor", f.predictor, "Predictor JSON (fitted on the fly when absent)");
  app->add_option("--spec", f.spec, "STL specification file, one formula per line");
  app->add_flag("--no-stl", f.no_stl, "Drop all STL constraints");
  app->add_option("--x0", f.x0, "Uniform initial temperature [degC]");
  app->add_option("--Np", f.Np, "Prediction horizon");
  app->add_flag("--svg", f.svg, "Also write SVG plots");
}

wws::exp::ExperimentConfig resolve(const Flags& f) {
  auto cfg = wws::exp::load_config(f.config ? std::optional<std::filesystem::path>(*f.config) : std::nullopt,
                                   wws::exp::environment());
  if (f.seed) cfg.seed = *f.seed;
  if (f.out) cfg.out_dir = *f.out;
  if (f.threads) cfg.threads = *f.threads;
  if (f.plant) cfg.plant_path = *f.plant;
  if (f.predictor) cfg.predictor_path = *f.predictor;
  if (f.spec) cfg.spec_path = *f.spec;
  if (f.dump_lp) cfg.dump_lp = *f.dump_lp;
  if (f.svg) cfg.svg = true;
  if (f.no_stl) {
    cfg.controller.stl_spec.clear();
    cfg.spec_path.reset();
  }
  if (f.K) cfg.fit.data.K = *f.K;
  if (f.h) cfg.fit.data.h = cfg.controller.h = *f.h;
  if (f.state_range.size() == 2) {
    cfg.fit.data.state_lo = f.state_range[0];
    cfg.fit.data.state_hi = f.state_range[1];
  }
  if (f.u_band.size() == 2) {
    cfg.fit.data.u_lo = f.u_band[0];
    cfg.fit.data.u_hi = f.u_band[1];
  }
  if (f.p_off) cfg.fit.data.p_off = *f.p_off;
  if (f.w0) cfg.fit.data.w0 = *f.w0;
  if (f.local) cfg.fit.local = true;
  if (f.target_y) cfg.fit.target_y = *f.target_y;
  if (f.u_star) cfg.fit.u_star = *f.u_star;
  if (f.x0) cfg.x0 = *f.x0;
  if (f.Np) cfg.controller.Np = *f.Np;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Warm-water supply control with STL-constrained Koopman MPC"};
  app.require_subcommand(1);
  Flags flags;

  auto* fit = app.add_subcommand("fit", "Generate data and fit the lifted predictor");
  add_common(fit, flags);
  add_fit(fit, flags);

  auto* run = app.add_subcommand("run", "Closed-loop simulation; writes trace.csv and summary.json");
  add_common(run, flags);
  add_fit(run, flags);
  add_control(run, flags);
  run->add_option("--dump-lp", flags.dump_lp, "Write the step-0 problem in LP format");

  auto* sweep = app.add_subcommand("sweep", "Feasibility over initial temperature and start time");
  add_common(sweep, flags);
  add_fit(sweep, flags);
  add_control(sweep, flags);

  auto* bench = app.add_subcommand("bench", "Open-loop predictor accuracy against the plant");
  add_common(bench, flags);
  add_fit(bench, flags);
  bench->add_option("--predictor", flags.predictor, "Predictor JSON (fitted on the fly when absent)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? wws::exp::kSuccess : wws::exp::kFailure;
  }

  try {
    const auto cfg = resolve(flags);
    if (fit->parsed()) return wws::exp::cmd_fit(cfg, std::cout);
    if (run->parsed()) return wws::exp::cmd_run(cfg, std::cout);
    if (sweep->parsed()) return wws::exp::cmd_sweep(cfg, std::cout);
    return wws::exp::cmd_bench(cfg, std::cout);
  } catch (const wws::ParseError& e) {
    std::cerr << "wws: specification error: " << e.what() << '\n';
  } catch (const wws::PlantError& e) {
    std::cerr << "wws: plant error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "wws: " << e.what() << '\n';
  }
  return wws::exp::kFailure;
}
