#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "support/surrogate.hpp"
#include "wws/csv.hpp"
#include "wws/error.hpp"
#include "wws/experiment.hpp"

namespace {

namespace fs = std::filesystem;
using wws::State;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

// Fresh directory under the system temp dir, removed with the fixture.
class Workdir : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("wws_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Experiment on the surrogate plant with a small dataset and a short closed loop.
  wws::exp::ExperimentConfig surrogate_config(const std::string& out) const {
    const fs::path plant = dir_ / "surrogate.json";
    if (!fs::exists(plant)) {
      std::ofstream f(plant);
      f << wws::test::surrogate_plant().to_json().dump(2);
    }
    wws::exp::ExperimentConfig c;
    c.plant_path = plant;
    c.out_dir = dir_ / out;
    c.threads = 1;
    c.fit.data.K = 400;
    c.integrator = wws::test::surrogate_integrator();
    c.controller.end_time = 240.0;
    c.controller.stl_spec = {"alw_[180,end] (y >= 40)", wws::kInputSpec};
    c.x0 = 30.0;
    c.bench.samples = 5;
    c.bench.steps = 4;
    return c;
  }

  fs::path dir_;
};

TEST(Csv, FormatRoundTripsExactly) {
  EXPECT_EQ(wws::csv::format(0.1), "0.1");
  EXPECT_EQ(wws::csv::format(40.0), "40");
  EXPECT_EQ(wws::csv::format(-2.5e-12), "-2.5e-12");
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> mant(-1.0, 1.0);
  std::uniform_int_distribution<int> ex(-300, 300);
  for (int i = 0; i < 2000; ++i) {
    const double v = std::ldexp(mant(rng), ex(rng));
    EXPECT_EQ(wws::csv::parse_number(wws::csv::format(v)), v) << wws::csv::format(v);
  }
  EXPECT_TRUE(std::isnan(wws::csv::parse_number(wws::csv::format(std::nan("")))));
  EXPECT_EQ(wws::csv::parse_number(wws::csv::format(std::numeric_limits<double>::infinity())),
            std::numeric_limits<double>::infinity());
  EXPECT_THROW(wws::csv::parse_number("12abc"), wws::Error);
}

TEST(Csv, PlantTraceRoundTrip) {
  std::vector<State> xs = {State::Constant(15.0), State::LinSpaced(6, 1.0, 6.0), State::Constant(1.0 / 3.0)};
  const std::vector<double> u = {0.0, 23.1};
  const std::vector<double> w = {10.0, 10.0};
  std::stringstream ss;
  wws::csv::write_plant_trace(ss, xs, u, w, 60.0);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "t,x1,x2,x3,x4,x5,x6,u,w,y");
  const auto back = wws::csv::read_plant_trace(ss);
  ASSERT_EQ(back.x.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(back.t[k], 60.0 * static_cast<double>(k));
    EXPECT_EQ(back.x[k], xs[k]);
    EXPECT_EQ(back.y[k], xs[k](4));
  }
  EXPECT_EQ(back.u[1], 23.1);
  EXPECT_TRUE(std::isnan(back.u[2]));
}

TEST(Csv, ClosedLoopTraceRoundTrip) {
  wws::ClosedLoopTrace tr;
  tr.formulas = {"a", "b"};
  for (int k = 0; k < 4; ++k) {
    wws::TraceRow r;
    r.t = 60.0 * k;
    r.x = State::Constant(20.0 + k);
    r.y = r.x(4);
    r.u = k % 2 ? 22.0 : 0.005;
    r.w = 10.0;
    r.status = k == 2 ? wws::opt::Status::Infeasible : wws::opt::Status::Optimal;
    r.objective = k == 2 ? std::nan("") : 100.0 / (k + 1);
    r.binaries = 40;
    r.nodes = static_cast<std::size_t>(3 * k);
    r.robustness = {0.5 - k, std::numeric_limits<double>::infinity()};
    tr.rows.push_back(r);
  }
  std::stringstream ss;
  wws::csv::write_trace(ss, tr);
  const auto back = wws::csv::read_trace(ss);
  ASSERT_EQ(back.rows.size(), 4u);
  EXPECT_EQ(back.formulas.size(), 2u);
  EXPECT_EQ(back.first_infeasible, std::optional<std::size_t>(2));
  EXPECT_EQ(back.h, 60.0);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(back.rows[k].x, tr.rows[k].x);
    EXPECT_EQ(back.rows[k].u, tr.rows[k].u);
    EXPECT_EQ(back.rows[k].status, tr.rows[k].status);
    EXPECT_EQ(back.rows[k].nodes, tr.rows[k].nodes);
    EXPECT_EQ(back.rows[k].robustness, tr.rows[k].robustness);
  }
  EXPECT_TRUE(std::isnan(back.rows[2].objective));
}

TEST(Csv, SweepRoundTrip) {
  wws::SweepResult s;
  s.initial_temps = {5, 10, 15};
  s.start_times = {240, 300};
  s.cells = {{0, 0}, {0, 1}, {1, 1}};
  std::stringstream ss;
  wws::csv::write_sweep(ss, s);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "initial,240,300");
  const auto back = wws::csv::read_sweep(ss);
  EXPECT_EQ(back.initial_temps, s.initial_temps);
  EXPECT_EQ(back.start_times, s.start_times);
  EXPECT_EQ(back.cells, s.cells);
}

TEST(Csv, MissingColumnIsReported) {
  std::stringstream ss("t,y\n0,1\n");
  const auto t = wws::csv::read(ss);
  EXPECT_EQ(t.number(0, "y"), 1.0);
  EXPECT_THROW(t.column("u"), wws::Error);
}

TEST(Config, EnvironmentOverrides) {
  const nlohmann::json base = wws::exp::ExperimentConfig{}.to_json();
  const auto doc = wws::exp::apply_env_overrides(
      base, {{"WWS_SEED", "3"}, {"WWS_CONTROLLER__NP", "12"}, {"WWS_OUT", "results"}, {"HOME", "/x"},
             {"WWS_FIT__STATE_RANGE", "[12, 38]"}});
  const auto c = wws::exp::ExperimentConfig::from_json(doc);
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.controller.Np, 12);
  EXPECT_EQ(c.out_dir, fs::path("results"));
  EXPECT_EQ(c.fit.data.state_lo, 12.0);
  EXPECT_EQ(c.fit.data.state_hi, 38.0);
}

TEST(Config, JsonRoundTrip) {
  wws::exp::ExperimentConfig c;
  c.seed = 9;
  c.fit.data.K = 1234;
  c.fit.u_star = 23.0;
  c.controller.Np = 6;
  c.sweep.initial_temps = {5, 25};
  c.bench.compare_local = false;
  c.integrator.max_substep = 1e-3;
  const auto back = wws::exp::ExperimentConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
}

TEST(Config, RejectsInvalidValues) {
  auto doc = wws::exp::ExperimentConfig{}.to_json();
  doc["controller"]["h"] = 30.0;
  EXPECT_THROW(wws::exp::ExperimentConfig::from_json(doc).validate(), wws::ConfigError);
  wws::exp::ExperimentConfig c;
  c.plant_path = "/nonexistent/plant.json";
  EXPECT_THROW(c.validate(), wws::ConfigError);
  c = wws::exp::ExperimentConfig{};
  c.x0 = 200.0;
  EXPECT_THROW(c.validate(), wws::ConfigError);
}

TEST_F(Workdir, ConfigFileThenEnvironment) {
  const fs::path file = dir_ / "cfg.json";
  {
    std::ofstream f(file);
    f << R"({"seed": 4, "x0": 20, "controller": {"Np": 5}})";
  }
  const auto c = wws::exp::load_config(file, {{"WWS_X0", "25"}});
  EXPECT_EQ(c.seed, 4u);
  EXPECT_EQ(c.x0, 25.0);
  EXPECT_EQ(c.controller.Np, 5);
  EXPECT_EQ(c.controller.R, wws::ControllerConfig{}.R);
}

TEST_F(Workdir, FitIsReproducible) {
  std::ostringstream log;
  ASSERT_EQ(wws::exp::cmd_fit(surrogate_config("a"), log), wws::exp::kSuccess);
  ASSERT_EQ(wws::exp::cmd_fit(surrogate_config("b"), log), wws::exp::kSuccess);
  EXPECT_EQ(slurp(dir_ / "a" / "predictor.json"), slurp(dir_ / "b" / "predictor.json"));
  EXPECT_EQ(slurp(dir_ / "a" / "fit_report.json"), slurp(dir_ / "b" / "fit_report.json"));
  EXPECT_TRUE(fs::exists(dir_ / "a" / "timing.json"));
  const auto p = wws::LinearPredictor::load(dir_ / "a" / "predictor.json");
  EXPECT_EQ(p.dim(), 16);

  auto other = surrogate_config("c");
  other.seed = 2;
  ASSERT_EQ(wws::exp::cmd_fit(other, log), wws::exp::kSuccess);
  EXPECT_TRUE(slurp(dir_ / "a" / "predictor.json") != slurp(dir_ / "c" / "predictor.json"));
  EXPECT_EQ(read_json(dir_ / "c" / "fit_report.json").at("seed"), 2);
}

TEST_F(Workdir, LocalFitWritesBaseline) {
  auto c = surrogate_config("local");
  c.fit.local = true;
  std::ostringstream log;
  ASSERT_EQ(wws::exp::cmd_fit(c, log), wws::exp::kSuccess);
  const auto p = wws::LinearPredictor::load(dir_ / "local" / "local.json");
  EXPECT_TRUE(p.is_local());
  EXPECT_EQ(p.dim(), 6);
  EXPECT_NEAR(p.operating_point->x(4), 40.0, 1e-8);
}

TEST_F(Workdir, RunWritesTraceAndSummary) {
  std::ostringstream log;
  const int code = wws::exp::cmd_run(surrogate_config("run1"), log);
  EXPECT_EQ(code, wws::exp::kSuccess) << log.str();
  const auto trace = wws::csv::read(dir_ / "run1" / "trace.csv");
  EXPECT_EQ(trace.rows.size(), 5u);
  const auto summary = read_json(dir_ / "run1" / "summary.json");
  EXPECT_EQ(summary.at("steps"), 5);
  EXPECT_EQ(summary.at("all_feasible"), true);
  EXPECT_EQ(summary.at("statuses").size(), 5u);

  ASSERT_EQ(wws::exp::cmd_run(surrogate_config("run2"), log), code);
  EXPECT_EQ(slurp(dir_ / "run1" / "trace.csv"), slurp(dir_ / "run2" / "trace.csv"));
  EXPECT_EQ(slurp(dir_ / "run1" / "summary.json"), slurp(dir_ / "run2" / "summary.json"));
}

TEST_F(Workdir, RunDumpsStepZeroProblem) {
  auto c = surrogate_config("lp");
  c.dump_lp = dir_ / "step0.lp";
  c.controller.end_time = 0.0;
  c.svg = true;
  std::ostringstream log;
  wws::exp::cmd_run(c, log);
  const std::string lp = slurp(dir_ / "step0.lp");
  EXPECT_NE(lp.find("Minimize"), std::string::npos);
  EXPECT_NE(lp.find("Binaries"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "lp" / "output.svg"));
}

TEST_F(Workdir, BenchReportsRolloutErrors) {
  auto c = surrogate_config("bench");
  std::ostringstream log;
  ASSERT_EQ(wws::exp::cmd_bench(c, log), wws::exp::kSuccess);
  const auto r = read_json(dir_ / "bench" / "bench_report.json");
  EXPECT_EQ(r.at("used"), 5);
  ASSERT_EQ(r.at("predictors").size(), 2u);
  for (const auto& p : r.at("predictors")) EXPECT_EQ(p.at("rmse").size(), 5u);
  // Both predictors are exact up to rounding on the linear surrogate.
  for (const auto& p : r.at("predictors")) {
    for (const auto& step : p.at("rmse")) EXPECT_LT(step.at(4).get<double>(), 1e-6) << p.at("name");
  }
}

}  // namespace
