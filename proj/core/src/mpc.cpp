#include "wws/mpc.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "wws/error.hpp"
#include "wws/optimizer/condense.hpp"
#include "wws/stl/monitor.hpp"
#include "wws/stl/parser.hpp"

namespace wws {

std::size_t ControllerConfig::steps() const { return static_cast<std::size_t>(std::llround(end_time / h)); }

void ControllerConfig::validate() const {
  if (Np < 1) throw ConfigError("Np must be at least 1");
  if (!(h > 0.0)) throw ConfigError("h must be positive (seconds)");
  if (!(Q > 0.0) || !(R > 0.0)) throw ConfigError("Q and R must be positive");
  if (!(u_min <= u_max)) throw ConfigError("u_min must not exceed u_max (kW)");
  if (!(end_time >= 0.0)) throw ConfigError("end_time must be non-negative (seconds)");
  if (std::abs(end_time / h - std::round(end_time / h)) > 1e-9) {
    throw ConfigError("end_time must be a multiple of h");
  }
  if (!(eps > 0.0) || !(big_m > 0.0)) throw ConfigError("eps and big_m must be positive");
  if (!(z_box_lo < z_box_hi)) throw ConfigError("empty lifted-state box");
  if (!std::isfinite(w_forecast) || !std::isfinite(reference)) throw ConfigError("non-finite reference or forecast");
}

nlohmann::json ControllerConfig::to_json() const {
  return {{"Np", Np},
          {"h", h},
          {"Q", Q},
          {"R", R},
          {"reference", reference},
          {"u_min", u_min},
          {"u_max", u_max},
          {"end_time", end_time},
          {"w_forecast", w_forecast},
          {"stl_spec", stl_spec},
          {"z_bounds", z_bounds},
          {"z_box", {z_box_lo, z_box_hi}},
          {"eps", eps},
          {"big_m", big_m},
          {"warm_start", warm_start},
          {"gap_tol", solver.gap_tol},
          {"max_binaries", solver.max_binaries},
          {"max_nodes", solver.max_nodes}};
}

ControllerConfig ControllerConfig::from_json(const nlohmann::json& doc) { return from_json(doc, ControllerConfig{}); }

ControllerConfig ControllerConfig::from_json(const nlohmann::json& doc, const ControllerConfig& base) {
  ControllerConfig c = base;
  if (!doc.is_object()) throw ConfigError("controller configuration must be a JSON object");
  try {
    c.Np = doc.value("Np", c.Np);
    c.h = doc.value("h", c.h);
    c.Q = doc.value("Q", c.Q);
    c.R = doc.value("R", c.R);
    c.reference = doc.value("reference", c.reference);
    c.u_min = doc.value("u_min", c.u_min);
    c.u_max = doc.value("u_max", c.u_max);
    c.end_time = doc.value("end_time", c.end_time);
    c.w_forecast = doc.value("w_forecast", c.w_forecast);
    c.stl_spec = doc.value("stl_spec", c.stl_spec);
    c.z_bounds = doc.value("z_bounds", c.z_bounds);
    if (doc.contains("z_box")) {
      const auto& zb = doc.at("z_box");
      c.z_box_lo = zb.at(0).get<double>();
      c.z_box_hi = zb.at(1).get<double>();
    }
    c.eps = doc.value("eps", c.eps);
    c.big_m = doc.value("big_m", c.big_m);
    c.warm_start = doc.value("warm_start", c.warm_start);
    c.solver.gap_tol = doc.value("gap_tol", c.solver.gap_tol);
    c.solver.max_binaries = doc.value("max_binaries", c.solver.max_binaries);
    c.solver.max_nodes = doc.value("max_nodes", c.solver.max_nodes);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("controller configuration: ") + e.what());
  }
  c.validate();
  return c;
}

Controller::Controller(ControllerConfig cfg, LinearPredictor predictor)
    : cfg_(std::move(cfg)), predictor_(std::move(predictor)) {
  cfg_.validate();
  predictor_.validate();
  if (std::abs(predictor_.h - cfg_.h) > 1e-9 * cfg_.h) {
    throw ConfigError("predictor sampling period " + std::to_string(predictor_.h) + " s differs from controller h " +
                      std::to_string(cfg_.h) + " s");
  }
  for (const auto& text : cfg_.stl_spec) formulas_.push_back(stl::parse(text));
  if (cfg_.z_bounds) z_bounds_ = predictor_.lifted_bounds(cfg_.z_box_lo, cfg_.z_box_hi);
}

opt::MiqpProblem Controller::build_step_problem(const History& hist, const State& x_k, std::size_t k,
                                                std::vector<stl::EncodingStats>* stats) const {
  if (hist.y.size() != k + 1 || hist.u.size() != k) {
    throw ConfigError("history must hold y_0..y_k and u_0..u_{k-1} at step " + std::to_string(k));
  }
  const int Np = cfg_.Np;
  const std::vector<double> w(static_cast<std::size_t>(Np), cfg_.w_forecast);
  const opt::CondensedMaps maps = opt::condense(predictor_, predictor_.lift(x_k), Np, w, 4);
  opt::HorizonBounds bounds{cfg_.u_min, cfg_.u_max, z_bounds_};
  opt::ProblemBuilder b = opt::build_problem(maps, {cfg_.Q, cfg_.R, cfg_.reference}, bounds);

  if (!formulas_.empty()) {
    stl::SymbolicSignal sig(cfg_.h);
    for (const char* ch : {"y", "u", "x1", "x2", "x3", "x4", "x5", "x6"}) sig.declare(ch);
    for (std::size_t j = 0; j <= k; ++j) sig.set_constant("y", j, hist.y[j]);
    for (std::size_t j = 0; j < k; ++j) sig.set_constant("u", j, hist.u[j]);
    for (std::size_t j = 0; j < hist.x.size() && j <= k; ++j) {
      for (int c = 0; c < kStateDim; ++c) sig.set_constant("x" + std::to_string(c + 1), j, hist.x[j](c));
    }
    const Eigen::MatrixXd& C = predictor_.C;
    const State off = predictor_.output_offset();
    for (int i = 1; i <= Np; ++i) {
      const std::size_t j = k + static_cast<std::size_t>(i);
      sig.set("y", j, maps.output(i));
      for (int c = 0; c < kStateDim; ++c) {
        opt::AffineExpr e(C.row(c).dot(maps.g[static_cast<std::size_t>(i)]) + off(c));
        const Eigen::RowVectorXd row = C.row(c) * maps.G[static_cast<std::size_t>(i)];
        for (int v = 0; v < Np; ++v) {
          if (row(v) != 0.0) e.terms.emplace_back(v, row(v));
        }
        sig.set("x" + std::to_string(c + 1), j, std::move(e));
      }
    }
    for (int i = 0; i < Np; ++i) sig.set("u", k + static_cast<std::size_t>(i), opt::AffineExpr::variable(i));

    stl::EncodingConfig ec;
    ec.big_m = cfg_.big_m;
    ec.eps = cfg_.eps;
    ec.end_time = cfg_.end_time;
    ec.availability = stl::Availability::Defer;
    for (std::size_t f = 0; f < formulas_.size(); ++f) {
      const auto st = stl::encode(formulas_[f], sig, 0, b, ec, "phi" + std::to_string(f));
      if (stats) stats->push_back(st);
    }
  }
  return b.build();
}

PlanResult Controller::plan_step(const History& hist, const State& x_k, std::size_t k) {
  const auto t0 = std::chrono::steady_clock::now();
  const opt::MiqpProblem prob = build_step_problem(hist, x_k, k);
  const std::vector<int> bins = prob.binaries();

  opt::MiqpOptions so = cfg_.solver;
  if (cfg_.warm_start && last_) {
    Eigen::VectorXd ws = Eigen::VectorXd::Zero(prob.num_vars());
    for (int i = 0; i < cfg_.Np; ++i) {
      const Eigen::Index src = std::min<Eigen::Index>(i + 1, last_->u.size() - 1);
      ws(i) = last_->u(src);
    }
    for (int v : bins) {
      const auto it = last_->binaries.find(prob.names[static_cast<std::size_t>(v)]);
      ws(v) = it != last_->binaries.end() ? it->second : 0.0;
    }
    so.warm_start = ws;
  }

  PlanResult r;
  r.binaries = bins.size();
  if (prob.trivially_infeasible) {
    r.status = opt::Status::Infeasible;
    r.message = "recorded history violates the specification";
  } else {
    const opt::SolveResult sr = opt::solve_miqp(prob, so);
    r.status = sr.status;
    r.nodes = sr.nodes;
    r.qp_solves = sr.qp_solves;
    r.message = sr.message;
    if (sr.x.size() == prob.num_vars()) {
      r.has_solution = true;
      r.objective = sr.objective;
      r.u_plan = sr.x.head(cfg_.Np);
      r.u0 = sr.x(0);
      Stored s{r.u_plan, {}};
      for (int v : bins) s.binaries[prob.names[static_cast<std::size_t>(v)]] = std::round(sr.x(v));
      last_ = std::move(s);
    }
  }
  r.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

stl::SampledSignal ClosedLoopTrace::signal() const {
  stl::SampledSignal s;
  s.h = h;
  auto& y = s.channels["y"];
  auto& u = s.channels["u"];
  std::vector<std::vector<double>*> xs;
  for (int c = 0; c < kStateDim; ++c) xs.push_back(&s.channels["x" + std::to_string(c + 1)]);
  for (const auto& r : rows) {
    y.push_back(r.y);
    u.push_back(r.u);
    for (int c = 0; c < kStateDim; ++c) xs[static_cast<std::size_t>(c)]->push_back(r.x(c));
  }
  return s;
}

std::vector<double> ClosedLoopTrace::final_robustness() const {
  const stl::SampledSignal s = signal();
  stl::MonitorOptions mo;
  mo.end_time = end_time;
  mo.skip_missing = true;
  std::vector<double> out;
  for (const auto& text : formulas) out.push_back(stl::robustness(*stl::parse(text), s, 0, mo));
  return out;
}

double ClosedLoopTrace::total_solve_seconds() const {
  double t = 0.0;
  for (const auto& r : rows) t += r.solve_seconds;
  return t;
}

ClosedLoopTrace run_closed_loop(const PlantModel& plant, const ControllerConfig& cfg, const LinearPredictor& predictor,
                                const State& x0, const RunOptions& opts) {
  Controller ctl(cfg, predictor);
  ClosedLoopTrace trace;
  trace.formulas = cfg.stl_spec;
  trace.h = cfg.h;
  trace.end_time = cfg.end_time;

  const std::size_t K = cfg.steps();
  History hist;
  State x = x0;
  double prev_u = 0.0;
  stl::MonitorOptions mo;
  mo.end_time = cfg.end_time;
  mo.skip_missing = true;

  for (std::size_t k = 0; k <= K; ++k) {
    hist.x.push_back(x);
    hist.y.push_back(output(x));

    TraceRow row;
    row.t = static_cast<double>(k) * cfg.h;
    row.x = x;
    row.y = output(x);
    row.w = cfg.w_forecast;

    const PlanResult plan = ctl.plan_step(hist, x, k);
    row.status = plan.status;
    row.binaries = plan.binaries;
    row.nodes = plan.nodes;
    row.solve_seconds = plan.solve_seconds;
    row.objective = plan.has_solution ? plan.objective : std::nan("");
    if (plan.has_solution) {
      row.u = plan.u0;
    } else {
      row.u = prev_u;
    }
    if (plan.status != opt::Status::Optimal && !trace.first_infeasible) trace.first_infeasible = k;

    hist.u.push_back(row.u);
    {
      stl::SampledSignal s;
      s.h = cfg.h;
      s.channels["y"] = hist.y;
      s.channels["u"] = hist.u;
      for (int c = 0; c < kStateDim; ++c) {
        auto& ch = s.channels["x" + std::to_string(c + 1)];
        for (const auto& xs : hist.x) ch.push_back(xs(c));
      }
      for (const auto& f : ctl.formulas()) row.robustness.push_back(stl::robustness(*f, s, 0, mo));
    }
    trace.rows.push_back(row);
    prev_u = row.u;

    if (opts.stop_on_infeasible && trace.first_infeasible) break;
    if (k == K) break;
    try {
      x = step(plant, x, row.u, row.w, cfg.h, opts.integrator);
    } catch (const PlantError& e) {
      trace.abort_reason = "plant failure after step " + std::to_string(k) + ": " + e.what();
      break;
    }
  }
  return trace;
}

bool SweepResult::monotone() const {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (std::size_t j = 0; j < cells[i].size(); ++j) {
      if (i + 1 < cells.size() && cells[i + 1][j] < cells[i][j]) return false;
      if (j + 1 < cells[i].size() && cells[i][j + 1] < cells[i][j]) return false;
    }
  }
  return true;
}

SweepResult feasibility_sweep(const PlantModel& plant, const ControllerConfig& cfg, const LinearPredictor& predictor,
                              const std::vector<double>& initial_temps, const std::vector<double>& start_times,
                              unsigned threads, const RunOptions& opts) {
  if (cfg.stl_spec.empty()) throw ConfigError("feasibility sweep needs at least one formula");
  const stl::FormulaPtr base = stl::parse(cfg.stl_spec.front());

  SweepResult res;
  res.initial_temps = initial_temps;
  res.start_times = start_times;
  res.cells.assign(initial_temps.size(), std::vector<int>(start_times.size(), 0));
  res.notes.assign(initial_temps.size(), std::vector<std::string>(start_times.size()));

  const std::size_t n_cells = initial_temps.size() * start_times.size();
  RunOptions run = opts;
  run.stop_on_infeasible = true;

  const auto work = [&](std::size_t cell) {
    const std::size_t i = cell / start_times.size();
    const std::size_t j = cell % start_times.size();
    try {
      ControllerConfig c = cfg;
      c.stl_spec.front() = stl::print(*stl::with_start_time(base, start_times[j]));
      const ClosedLoopTrace tr = run_closed_loop(plant, c, predictor, State::Constant(initial_temps[i]), run);
      if (tr.abort_reason) {
        res.notes[i][j] = *tr.abort_reason;
      } else if (!tr.all_feasible()) {
        res.notes[i][j] = "infeasible at step " + std::to_string(*tr.first_infeasible);
      } else {
        const auto rho = tr.final_robustness();
        const bool ok = std::all_of(rho.begin(), rho.end(), [](double r) { return r >= -1e-6; });
        res.cells[i][j] = ok ? 1 : 0;
        if (!ok) res.notes[i][j] = "realised trace violates the specification";
      }
    } catch (const std::exception& e) {
      res.notes[i][j] = std::string("error: ") + e.what();
    }
  };

  unsigned n_threads = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, std::max<std::size_t>(n_cells, 1)));
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t c = next++; c < n_cells; c = next++) work(c);
      });
    }
  }
  return res;
}

}  // namespace wws
