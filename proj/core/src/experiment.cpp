#include "wws/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

#include "wws/csv.hpp"
#include "wws/error.hpp"
#include "wws/stl/parser.hpp"
#include "wws/svg.hpp"

extern char** environ;

namespace wws::exp {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

json optional_path(const std::optional<std::filesystem::path>& p) { return p ? json(p->string()) : json(nullptr); }

std::optional<std::filesystem::path> read_optional_path(const json& doc, const char* key,
                                                        std::optional<std::filesystem::path> fallback) {
  if (!doc.contains(key)) return fallback;
  const json& v = doc.at(key);
  if (v.is_null()) return std::nullopt;
  return std::filesystem::path(v.get<std::string>());
}

const char* integrator_name(IntegratorKind k) { return k == IntegratorKind::DormandPrince ? "dopri5" : "trapezoid"; }

void write_json(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

void prepare_out(const ExperimentConfig& cfg) { std::filesystem::create_directories(cfg.out_dir); }

ControllerConfig controller_with_spec(const ExperimentConfig& cfg) {
  ControllerConfig c = cfg.controller;
  if (cfg.spec_path) {
    c.stl_spec.clear();
    for (const auto& f : stl::load_spec(*cfg.spec_path)) c.stl_spec.push_back(stl::print(*f));
  }
  return c;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

json ExperimentConfig::to_json() const {
  return {{"plant", optional_path(plant_path)},
          {"predictor", optional_path(predictor_path)},
          {"spec", optional_path(spec_path)},
          {"out", out_dir.string()},
          {"seed", seed},
          {"threads", threads},
          {"x0", x0},
          {"summary_from", summary_from},
          {"svg", svg},
          {"dump_lp", optional_path(dump_lp)},
          {"fit",
           {{"K", fit.data.K},
            {"state_range", {fit.data.state_lo, fit.data.state_hi}},
            {"u_band", {fit.data.u_lo, fit.data.u_hi}},
            {"p_off", fit.data.p_off},
            {"w0", fit.data.w0},
            {"h", fit.data.h},
            {"shared_state_draw", fit.data.shared_state_draw},
            {"local", fit.local},
            {"target_y", fit.target_y},
            {"u_star", fit.u_star ? json(*fit.u_star) : json(nullptr)}}},
          {"controller", controller.to_json()},
          {"sweep", {{"initial_temps", sweep.initial_temps}, {"start_times", sweep.start_times}}},
          {"bench",
           {{"samples", bench.samples},
            {"steps", bench.steps},
            {"state_range", {bench.state_lo, bench.state_hi}},
            {"compare_local", bench.compare_local}}},
          {"integrator",
           {{"kind", integrator_name(integrator.kind)},
            {"abs_tol", integrator.abs_tol},
            {"rel_tol", integrator.rel_tol},
            {"max_substep", integrator.max_substep},
            {"trapezoid_substep", integrator.trapezoid_substep}}}};
}

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("configuration must be a JSON object");
  ExperimentConfig c;
  try {
    c.plant_path = read_optional_path(doc, "plant", c.plant_path);
    c.predictor_path = read_optional_path(doc, "predictor", c.predictor_path);
    c.spec_path = read_optional_path(doc, "spec", c.spec_path);
    c.dump_lp = read_optional_path(doc, "dump_lp", c.dump_lp);
    c.out_dir = doc.value("out", c.out_dir.string());
    c.seed = doc.value("seed", c.seed);
    c.threads = doc.value("threads", c.threads);
    c.x0 = doc.value("x0", c.x0);
    c.summary_from = doc.value("summary_from", c.summary_from);
    c.svg = doc.value("svg", c.svg);
    if (doc.contains("fit")) {
      const json& f = doc.at("fit");
      c.fit.data.K = f.value("K", c.fit.data.K);
      if (f.contains("state_range")) {
        c.fit.data.state_lo = f.at("state_range").at(0).get<double>();
        c.fit.data.state_hi = f.at("state_range").at(1).get<double>();
      }
      if (f.contains("u_band")) {
        c.fit.data.u_lo = f.at("u_band").at(0).get<double>();
        c.fit.data.u_hi = f.at("u_band").at(1).get<double>();
      }
      c.fit.data.p_off = f.value("p_off", c.fit.data.p_off);
      c.fit.data.w0 = f.value("w0", c.fit.data.w0);
      c.fit.data.h = f.value("h", c.fit.data.h);
      c.fit.data.shared_state_draw = f.value("shared_state_draw", c.fit.data.shared_state_draw);
      c.fit.local = f.value("local", c.fit.local);
      c.fit.target_y = f.value("target_y", c.fit.target_y);
      if (f.contains("u_star")) {
        c.fit.u_star = f.at("u_star").is_null() ? std::nullopt : std::optional<double>(f.at("u_star").get<double>());
      }
    }
    if (doc.contains("controller")) c.controller = ControllerConfig::from_json(doc.at("controller"), c.controller);
    if (doc.contains("sweep")) {
      const json& s = doc.at("sweep");
      c.sweep.initial_temps = s.value("initial_temps", c.sweep.initial_temps);
      c.sweep.start_times = s.value("start_times", c.sweep.start_times);
    }
    if (doc.contains("bench")) {
      const json& b = doc.at("bench");
      c.bench.samples = b.value("samples", c.bench.samples);
      c.bench.steps = b.value("steps", c.bench.steps);
      if (b.contains("state_range")) {
        c.bench.state_lo = b.at("state_range").at(0).get<double>();
        c.bench.state_hi = b.at("state_range").at(1).get<double>();
      }
      c.bench.compare_local = b.value("compare_local", c.bench.compare_local);
    }
    if (doc.contains("integrator")) {
      const json& i = doc.at("integrator");
      const std::string kind = i.value("kind", std::string(integrator_name(c.integrator.kind)));
      if (kind == "dopri5") {
        c.integrator.kind = IntegratorKind::DormandPrince;
      } else if (kind == "trapezoid") {
        c.integrator.kind = IntegratorKind::Trapezoidal;
      } else {
        throw ConfigError("integrator.kind must be 'dopri5' or 'trapezoid'");
      }
      c.integrator.abs_tol = i.value("abs_tol", c.integrator.abs_tol);
      c.integrator.rel_tol = i.value("rel_tol", c.integrator.rel_tol);
      c.integrator.max_substep = i.value("max_substep", c.integrator.max_substep);
      c.integrator.trapezoid_substep = i.value("trapezoid_substep", c.integrator.trapezoid_substep);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("configuration: ") + e.what());
  }
  return c;
}

void ExperimentConfig::validate() const {
  for (const auto& p : {plant_path, predictor_path, spec_path}) {
    if (p && !std::filesystem::exists(*p)) throw ConfigError("file not found: " + p->string());
  }
  fit.data.validate(0);
  controller.validate();
  if (!(x0 > -50.0 && x0 < 150.0)) throw ConfigError("x0 must lie in (-50, 150) degC");
  if (std::abs(fit.data.h - controller.h) > 1e-9 * controller.h) {
    throw ConfigError("fit.h and controller.h must agree (seconds)");
  }
  if (sweep.initial_temps.empty() || sweep.start_times.empty()) throw ConfigError("sweep grid must not be empty");
  if (bench.steps < 1 || bench.samples < 1) throw ConfigError("bench needs at least one sample and one step");
  if (!(bench.state_lo < bench.state_hi)) throw ConfigError("bench.state_range is empty");
  if (!(integrator.abs_tol > 0.0) || !(integrator.max_substep > 0.0) || !(integrator.trapezoid_substep > 0.0)) {
    throw ConfigError("integrator tolerances and substeps must be positive");
  }
}

json apply_env_overrides(json doc, const std::map<std::string, std::string>& env) {
  constexpr std::string_view prefix = "WWS_";
  for (const auto& [name, value] : env) {
    if (name.rfind(prefix, 0) != 0) continue;
    std::vector<std::string> path;
    std::string rest = name.substr(prefix.size());
    for (std::size_t pos; (pos = rest.find("__")) != std::string::npos; rest = rest.substr(pos + 2)) {
      path.push_back(rest.substr(0, pos));
    }
    path.push_back(rest);

    json* node = &doc;
    for (std::size_t i = 0; i < path.size(); ++i) {
      if (!node->is_object()) throw ConfigError("environment override " + name + ": not an object at " + path[i]);
      std::string key = lower(path[i]);
      for (const auto& item : node->items()) {
        if (lower(item.key()) == key) {
          key = item.key();
          break;
        }
      }
      node = &(*node)[key];
    }
    json parsed = json::parse(value, nullptr, false);
    *node = parsed.is_discarded() ? json(value) : parsed;
  }
  return doc;
}

std::map<std::string, std::string> environment() {
  std::map<std::string, std::string> env;
  for (char** e = environ; e && *e; ++e) {
    const std::string kv(*e);
    const auto eq = kv.find('=');
    if (eq != std::string::npos) env.emplace(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return env;
}

ExperimentConfig load_config(const std::optional<std::filesystem::path>& path,
                             const std::map<std::string, std::string>& env) {
  json doc = ExperimentConfig{}.to_json();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot open configuration " + path->string());
    json file;
    try {
      file = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("configuration " + path->string() + ": " + e.what());
    }
    doc.merge_patch(file);
  }
  doc = apply_env_overrides(std::move(doc), env);
  return ExperimentConfig::from_json(doc);
}

PlantModel load_plant(const ExperimentConfig& cfg) {
  return cfg.plant_path ? PlantModel::load(*cfg.plant_path) : PlantModel::tabulated();
}

FitOutput fit_predictor(const ExperimentConfig& cfg, const PlantModel& plant) {
  FitOutput out;
  const double h = cfg.fit.data.h;
  if (cfg.fit.local) {
    EquilibriumOptions eo;
    eo.u_min = cfg.controller.u_min;
    eo.u_max = cfg.controller.u_max;
    const Equilibrium eq = cfg.fit.u_star ? find_equilibrium_for_input(plant, *cfg.fit.u_star, cfg.fit.data.w0, eo)
                                          : find_equilibrium(plant, cfg.fit.data.w0, cfg.fit.target_y, eo);
    out.predictor = linearize_local(plant, eq.x, eq.u, eq.w, h);
    json eqj = {{"x", std::vector<double>(eq.x.data(), eq.x.data() + kStateDim)},
                {"u", eq.u},
                {"w", eq.w},
                {"residual", eq.residual},
                {"residual_floor", eq.residual_floor},
                {"iterations", eq.iterations},
                {"input_in_range", eq.input_in_range}};
    out.predictor.meta = {{"kind", "local"}, {"equilibrium", eqj}};
    out.report = {{"kind", "local"}, {"equilibrium", eqj}, {"h", h}};
    if (!eq.input_in_range) {
      out.report["warning"] = "equilibrium input lies outside [u_min, u_max]";
    }
    return out;
  }
  // The top-level seed and thread count are the only copies the user sets.
  DatasetConfig dc = cfg.fit.data;
  dc.seed = cfg.seed;
  dc.threads = cfg.threads;
  const Dataset data = generate_dataset(plant, dc, cfg.integrator);
  const ObservableSet obs = ObservableSet::default_set();
  FitResult fr = fit_edmd(obs, data);
  out.predictor = std::move(fr.predictor);
  out.predictor.meta["kind"] = "edmd";
  out.predictor.meta["seed"] = cfg.seed;
  out.predictor.meta["K"] = cfg.fit.data.K;

  double recon = 0.0;
  for (Eigen::Index i = 0; i < data.X.cols(); ++i) {
    const State x = data.X.col(i);
    recon = std::max(recon, (out.predictor.reconstruct(out.predictor.lift(x)) - x).cwiseAbs().maxCoeff());
  }
  out.report = {{"kind", "edmd"},
                {"N", obs.size()},
                {"K", cfg.fit.data.K},
                {"seed", cfg.seed},
                {"h", h},
                {"diagnostics", fr.diagnostics.to_json()},
                {"training_reconstruction_max", recon}};
  return out;
}

LinearPredictor obtain_predictor(const ExperimentConfig& cfg, const PlantModel& plant) {
  if (cfg.predictor_path) return LinearPredictor::load(*cfg.predictor_path);
  return fit_predictor(cfg, plant).predictor;
}

int cmd_fit(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  prepare_out(cfg);
  const PlantModel plant = load_plant(cfg);
  const auto t0 = Clock::now();
  const FitOutput fo = fit_predictor(cfg, plant);
  const double elapsed = seconds_since(t0);
  const auto file = cfg.out_dir / (cfg.fit.local ? "local.json" : "predictor.json");
  fo.predictor.save(file);
  write_json(cfg.out_dir / "fit_report.json", fo.report);
  write_json(cfg.out_dir / "timing.json", {{"fit_seconds", elapsed}});
  log << "wrote " << file.string() << " (" << fo.report.at("kind").get<std::string>() << ", dim "
      << fo.predictor.dim() << ")\n";
  if (fo.report.contains("warning")) log << "warning: " << fo.report.at("warning").get<std::string>() << '\n';
  return kSuccess;
}

int cmd_run(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  prepare_out(cfg);
  const PlantModel plant = load_plant(cfg);
  const LinearPredictor pred = obtain_predictor(cfg, plant);
  const ControllerConfig ctl = controller_with_spec(cfg);
  const State x0 = State::Constant(cfg.x0);

  if (cfg.dump_lp) {
    Controller c(ctl, pred);
    History hist;
    hist.y.push_back(output(x0));
    hist.x.push_back(x0);
    std::ofstream lp(*cfg.dump_lp);
    if (!lp) throw ConfigError("cannot write " + cfg.dump_lp->string());
    c.build_step_problem(hist, x0, 0).write_lp(lp);
  }

  RunOptions ro;
  ro.integrator = cfg.integrator;
  const ClosedLoopTrace tr = run_closed_loop(plant, ctl, pred, x0, ro);
  {
    std::ofstream out(cfg.out_dir / "trace.csv");
    csv::write_trace(out, tr);
  }

  double y_min = opt::kInf, y_max = -opt::kInf;
  std::vector<std::string> statuses;
  std::size_t nodes = 0;
  for (const auto& r : tr.rows) {
    statuses.emplace_back(opt::to_string(r.status));
    nodes += r.nodes;
    if (r.t >= cfg.summary_from - 1e-9) {
      y_min = std::min(y_min, r.y);
      y_max = std::max(y_max, r.y);
    }
  }
  const auto rho = tr.final_robustness();
  json summary = {{"predictor", pred.meta.value("kind", pred.is_local() ? "local" : "edmd")},
                  {"steps", tr.rows.size()},
                  {"window_start", cfg.summary_from},
                  {"min_y", std::isfinite(y_min) ? json(y_min) : json(nullptr)},
                  {"max_y", std::isfinite(y_max) ? json(y_max) : json(nullptr)},
                  {"all_feasible", tr.all_feasible()},
                  {"statuses", statuses},
                  {"bb_nodes_total", nodes},
                  {"formulas", tr.formulas},
                  {"robustness", rho},
                  {"aborted", tr.abort_reason ? json(*tr.abort_reason) : json(nullptr)}};
  write_json(cfg.out_dir / "summary.json", summary);
  json per_step = json::array();
  for (const auto& r : tr.rows) per_step.push_back(r.solve_seconds);
  write_json(cfg.out_dir / "timing.json", {{"total_solver_seconds", tr.total_solve_seconds()}, {"per_step", per_step}});

  if (cfg.svg) {
    svg::Plot py{"Output", "t [s]", "y [degC]", {}, {40.0, 45.0}};
    svg::Plot pu{"Input", "t [s]", "u [kW]", {}, {21.2, 26.5}};
    svg::Series sy{"y", {}, {}, false}, su{"u", {}, {}, true};
    for (const auto& r : tr.rows) {
      sy.x.push_back(r.t);
      sy.y.push_back(r.y);
      su.x.push_back(r.t);
      su.y.push_back(r.u);
    }
    py.series.push_back(sy);
    pu.series.push_back(su);
    svg::write(cfg.out_dir / "output.svg", py);
    svg::write(cfg.out_dir / "input.svg", pu);
  }

  log << "closed loop: " << tr.rows.size() << " steps, min y after " << cfg.summary_from << " s = "
      << (std::isfinite(y_min) ? std::to_string(y_min) : "n/a") << ", all feasible: " << (tr.all_feasible() ? "yes" : "no")
      << '\n';
  if (tr.abort_reason) {
    log << "aborted: " << *tr.abort_reason << '\n';
    return kFailure;
  }
  return tr.all_feasible() ? kSuccess : kInfeasible;
}

int cmd_sweep(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  prepare_out(cfg);
  const PlantModel plant = load_plant(cfg);
  const LinearPredictor pred = obtain_predictor(cfg, plant);
  const ControllerConfig ctl = controller_with_spec(cfg);
  RunOptions ro;
  ro.integrator = cfg.integrator;
  // One infeasible step already makes the cell 0; the rest of its run cannot change that.
  ro.stop_on_infeasible = true;
  const auto t0 = Clock::now();
  const SweepResult s = feasibility_sweep(plant, ctl, pred, cfg.sweep.initial_temps, cfg.sweep.start_times, cfg.threads, ro);
  const double elapsed = seconds_since(t0);
  {
    std::ofstream out(cfg.out_dir / "sweep.csv");
    csv::write_sweep(out, s);
  }
  json notes = json::object();
  for (std::size_t i = 0; i < s.initial_temps.size(); ++i) {
    for (std::size_t j = 0; j < s.start_times.size(); ++j) {
      if (!s.notes[i][j].empty()) notes[csv::format(s.initial_temps[i]) + "@" + csv::format(s.start_times[j])] = s.notes[i][j];
    }
  }
  write_json(cfg.out_dir / "sweep_notes.json", {{"monotone", s.monotone()}, {"notes", notes}});
  write_json(cfg.out_dir / "timing.json", {{"sweep_seconds", elapsed}});
  std::size_t ones = 0;
  for (const auto& row : s.cells) ones += static_cast<std::size_t>(std::count(row.begin(), row.end(), 1));
  log << "sweep: " << ones << " of " << s.initial_temps.size() * s.start_times.size() << " cells feasible, monotone "
      << (s.monotone() ? "yes" : "no") << '\n';
  return kSuccess;
}

int cmd_bench(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  prepare_out(cfg);
  const PlantModel plant = load_plant(cfg);

  std::vector<std::pair<std::string, LinearPredictor>> predictors;
  predictors.emplace_back("primary", obtain_predictor(cfg, plant));
  std::optional<std::string> local_error;
  if (cfg.bench.compare_local && !predictors.front().second.is_local()) {
    ExperimentConfig lc = cfg;
    lc.fit.local = true;
    try {
      predictors.emplace_back("local", fit_predictor(lc, plant).predictor);
    } catch (const Error& e) {
      local_error = e.what();
    }
  }

  std::mt19937_64 g(cfg.seed);
  std::uniform_real_distribution<double> state(cfg.bench.state_lo, cfg.bench.state_hi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> band(cfg.fit.data.u_lo, cfg.fit.data.u_hi);
  const auto steps = static_cast<std::size_t>(cfg.bench.steps);

  // sq[p][step][component]
  std::vector<std::vector<State>> sq(predictors.size(), std::vector<State>(steps + 1, State::Zero()));
  std::size_t used = 0, failed = 0;
  for (std::size_t s = 0; s < cfg.bench.samples; ++s) {
    State x0;
    for (int i = 0; i < kStateDim; ++i) x0(i) = state(g);
    std::vector<double> u(steps), w(steps, cfg.fit.data.w0);
    for (auto& v : u) {
      const bool off = unit(g) < cfg.fit.data.p_off;
      const double on = band(g);
      v = off ? 0.0 : on;
    }
    std::vector<State> truth;
    try {
      truth = simulate(plant, x0, u, w, cfg.fit.data.h, cfg.integrator);
    } catch (const PlantError&) {
      ++failed;
      continue;
    }
    ++used;
    for (std::size_t p = 0; p < predictors.size(); ++p) {
      const auto pred = predict(predictors[p].second, x0, u, w);
      for (std::size_t k = 0; k <= steps; ++k) sq[p][k] += (pred[k] - truth[k]).cwiseAbs2();
    }
  }

  json report = {{"samples", cfg.bench.samples},
                 {"used", used},
                 {"failed", failed},
                 {"steps", steps},
                 {"seed", cfg.seed},
                 {"state_range", {cfg.bench.state_lo, cfg.bench.state_hi}},
                 {"predictors", json::array()}};
  for (std::size_t p = 0; p < predictors.size(); ++p) {
    json rmse = json::array();
    for (std::size_t k = 0; k <= steps; ++k) {
      const State r = used > 0 ? State((sq[p][k] / static_cast<double>(used)).cwiseSqrt()) : State::Constant(std::nan(""));
      rmse.push_back(std::vector<double>(r.data(), r.data() + kStateDim));
    }
    const auto& lp = predictors[p].second;
    report["predictors"].push_back({{"name", predictors[p].first},
                                    {"kind", lp.meta.value("kind", lp.is_local() ? "local" : "edmd")},
                                    {"dim", lp.dim()},
                                    {"rmse", rmse}});
  }
  if (local_error) report["local_error"] = *local_error;
  write_json(cfg.out_dir / "bench_report.json", report);
  log << "bench: " << used << " rollouts of " << steps << " steps";
  for (const auto& pj : report["predictors"]) {
    const auto& last = pj["rmse"].back();
    log << ", " << pj["name"].get<std::string>() << " final y RMSE " << last[4].dump();
  }
  log << '\n';
  return kSuccess;
}

}  // namespace wws::exp
