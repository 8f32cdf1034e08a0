#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "wws/optimizer/miqp.hpp"
#include "wws/plant.hpp"
#include "wws/predictor.hpp"
#include "wws/stl/encoder.hpp"
#include "wws/stl/formula.hpp"
#include "wws/stl/monitor.hpp"

namespace wws {

/// Warm water must be supplied from 420 s on.
inline constexpr const char* kSupplySpec = "alw_[420,end] (y >= 40)";
/// The heat pump is either off (near-zero band) or within its running range.
inline constexpr const char* kInputSpec =
    "alw_[0,end] (((u > 0.001) and (u < 0.01)) or ((u >= 21.2) and (u <= 26.5)))";

struct ControllerConfig {
  int Np = 10;
  double h = 60.0;
  double Q = 1.0;
  double R = 10.0;
  double reference = 40.0;
  double u_min = 0.0;
  double u_max = 26.5;
  double end_time = 1200.0;
  double w_forecast = 10.0;
  std::vector<std::string> stl_spec{kSupplySpec, kInputSpec};
  /// Bound the lifted state by lifting the physical box [z_box_lo, z_box_hi]^6.
  bool z_bounds = true;
  double z_box_lo = 0.0;
  double z_box_hi = 100.0;
  double eps = 1e-6;
  double big_m = 1e4;
  bool warm_start = true;
  opt::MiqpOptions solver;

  /// Number of closed-loop steps, end_time / h.
  std::size_t steps() const;
  /// Throws ConfigError on out-of-range values.
  void validate() const;

  nlohmann::json to_json() const;
  /// Missing keys keep the values of `base`.
  static ControllerConfig from_json(const nlohmann::json& doc, const ControllerConfig& base);
  static ControllerConfig from_json(const nlohmann::json& doc);
};

/// Measured samples up to the current step k: y_0..y_k, x_0..x_k and the applied u_0..u_{k-1}.
struct History {
  std::vector<double> y;
  std::vector<State> x;
  std::vector<double> u;
};

struct PlanResult {
  opt::Status status = opt::Status::Infeasible;
  /// Input to apply; already resolved by the infeasibility policy when called from the closed loop.
  double u0 = 0.0;
  double objective = opt::kInf;
  std::size_t binaries = 0;
  std::size_t nodes = 0;
  std::size_t qp_solves = 0;
  /// Planned inputs over the horizon (empty when no incumbent exists).
  Eigen::VectorXd u_plan;
  bool has_solution = false;
  double solve_seconds = 0.0;
  std::string message;
};

/// Receding-horizon controller with STL constraints.
///
/// At step k, recorded samples enter the encoding as constants, the Np predicted
/// samples as affine functions of the inputs, and samples past k + Np are deferred.
/// Formulas are evaluated at time index 0 with `end` = end_time.
class Controller {
 public:
  Controller(ControllerConfig cfg, LinearPredictor predictor);

  const ControllerConfig& config() const { return cfg_; }
  const LinearPredictor& predictor() const { return predictor_; }
  const std::vector<stl::FormulaPtr>& formulas() const { return formulas_; }

  /// Assembles the step-k MIQP. `stats` receives one entry per formula.
  opt::MiqpProblem build_step_problem(const History& hist, const State& x_k, std::size_t k,
                                      std::vector<stl::EncodingStats>* stats = nullptr) const;

  /// Builds, solves and returns the first input. Updates the warm-start store on success.
  PlanResult plan_step(const History& hist, const State& x_k, std::size_t k);

  void reset_warm_start() { last_.reset(); }

 private:
  struct Stored {
    Eigen::VectorXd u;
    std::map<std::string, double> binaries;
  };

  ControllerConfig cfg_;
  LinearPredictor predictor_;
  std::vector<stl::FormulaPtr> formulas_;
  std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>> z_bounds_;
  std::optional<Stored> last_;
};

struct TraceRow {
  double t = 0.0;
  State x = State::Zero();
  double u = 0.0;
  double w = 0.0;
  double y = 0.0;
  opt::Status status = opt::Status::Optimal;
  double objective = 0.0;
  std::size_t binaries = 0;
  std::size_t nodes = 0;
  /// Robustness of each formula over the samples recorded so far (unseen samples ignored).
  std::vector<double> robustness;
  double solve_seconds = 0.0;
};

struct ClosedLoopTrace {
  std::vector<TraceRow> rows;
  std::vector<std::string> formulas;
  double h = 60.0;
  double end_time = 1200.0;
  std::optional<std::string> abort_reason;
  /// Step at which the first infeasible plan occurred.
  std::optional<std::size_t> first_infeasible;

  bool all_feasible() const { return !first_infeasible.has_value(); }
  /// Channels y, u and x1..x6 of the recorded rows.
  stl::SampledSignal signal() const;
  /// Robustness of every formula on the full recorded trace.
  std::vector<double> final_robustness() const;
  double total_solve_seconds() const;
};

struct RunOptions {
  IntegratorOptions integrator;
  /// Stop at the first infeasible step (used by the feasibility sweep).
  bool stop_on_infeasible = false;
};

/// Closed loop k = 0..end/h: plan from the measured state, apply u*_0 under zero-order hold.
/// Infeasible steps apply the incumbent if one exists, otherwise hold the previous input
/// (zero at k = 0). A plant failure ends the loop with `abort_reason` set.
ClosedLoopTrace run_closed_loop(const PlantModel& plant, const ControllerConfig& cfg, const LinearPredictor& predictor,
                                const State& x0, const RunOptions& opts = {});

struct SweepResult {
  std::vector<double> initial_temps;
  std::vector<double> start_times;
  /// cells[i][j] for initial_temps[i], start_times[j].
  std::vector<std::vector<int>> cells;
  std::vector<std::vector<std::string>> notes;

  /// Feasibility non-decreasing in both the initial temperature and the start time.
  bool monotone() const;
};

/// For each cell: replace the start time of the first formula, run from the uniform
/// initial state, and record 1 when every step was feasible and the realised trace
/// satisfies every formula (robustness >= -1e-6). Cells run on `threads` workers.
SweepResult feasibility_sweep(const PlantModel& plant, const ControllerConfig& cfg, const LinearPredictor& predictor,
                              const std::vector<double>& initial_temps, const std::vector<double>& start_times,
                              unsigned threads = 0, const RunOptions& opts = {});

}  // namespace wws
