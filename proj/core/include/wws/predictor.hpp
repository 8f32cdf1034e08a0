#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "wws/plant.hpp"

namespace wws {

/// Exponent vector of a monomial over x1..x6.
using Exponents = std::array<int, kStateDim>;

/// Ordered monomial dictionary used to lift the state.
class ObservableSet {
 public:
  ObservableSet() = default;
  explicit ObservableSet(std::vector<Exponents> terms);

  /// x1..x6, the squares and cubes of x3..x5 and the four mixed cubic terms of the plant.
  static ObservableSet default_set();
  /// The six identity coordinates only.
  static ObservableSet identity();

  std::size_t size() const { return terms_.size(); }
  const std::vector<Exponents>& terms() const { return terms_; }
  /// True when the first six entries are x1..x6 in order.
  bool has_identity_prefix() const;

  Eigen::VectorXd lift(const State& x) const;
  /// Interval image of the box [lo, hi]^6 under every monomial.
  std::pair<Eigen::VectorXd, Eigen::VectorXd> lift_box(double lo, double hi) const;

  nlohmann::json to_json() const;
  static ObservableSet from_json(const nlohmann::json& doc);

  bool operator==(const ObservableSet&) const = default;

 private:
  std::vector<Exponents> terms_;
};

inline Eigen::VectorXd lift(const ObservableSet& obs, const State& x) { return obs.lift(x); }

/// Equilibrium (x*, u*, w*) around which a local-linearisation predictor works in deviations.
struct OperatingPoint {
  State x = State::Zero();
  double u = 0.0;
  double w = 0.0;
};

/// Discrete-time lifted linear model z+ = A z + bu u + bd w, x^ = C z.
///
/// The local-linearisation baseline stores its operating point and applies the
/// same map to deviations; `drift()` and `output_offset()` fold that affine part
/// back in so callers can treat both kinds identically.
struct LinearPredictor {
  Eigen::MatrixXd A;
  Eigen::VectorXd bu;
  Eigen::VectorXd bd;
  Eigen::MatrixXd C;
  double h = 60.0;
  ObservableSet observables;
  std::optional<OperatingPoint> operating_point;
  nlohmann::json meta = nlohmann::json::object();

  Eigen::Index dim() const { return A.rows(); }
  bool is_local() const { return operating_point.has_value(); }

  /// z = psi(x), or x - x* for the local baseline.
  Eigen::VectorXd lift(const State& x) const;
  /// Constant term of the lifted dynamics (zero for EDMD predictors).
  Eigen::VectorXd drift() const;
  /// Constant term of the reconstruction x^ = C z + offset.
  State output_offset() const;
  Eigen::VectorXd next(const Eigen::VectorXd& z, double u, double w) const;
  State reconstruct(const Eigen::VectorXd& z) const;

  /// Bounds on lifted coordinates induced by the physical box [lo, hi]^6.
  std::pair<Eigen::VectorXd, Eigen::VectorXd> lifted_bounds(double lo, double hi) const;

  /// Throws PredictorError on inconsistent dimensions, non-positive h or non-finite entries.
  void validate() const;

  nlohmann::json to_json() const;
  static LinearPredictor from_json(const nlohmann::json& doc);
  void save(const std::filesystem::path& path) const;
  static LinearPredictor load(const std::filesystem::path& path);
};

/// Open-loop rollout: returns x^_0 .. x^_n.
std::vector<State> predict(const LinearPredictor& p, const State& x0, std::span<const double> u_seq,
                           std::span<const double> w_seq);

struct DatasetConfig {
  std::size_t K = 10000;
  double state_lo = 10.0;
  double state_hi = 40.0;
  double u_lo = 21.2;
  double u_hi = 26.5;
  double p_off = 0.2;
  double w0 = 10.0;
  double h = 60.0;
  std::uint64_t seed = 1;
  /// Draw one temperature per sample and use it for all six components.
  bool shared_state_draw = false;
  /// Worker threads; 0 selects hardware concurrency.
  unsigned threads = 0;

  void validate(std::size_t lifted_dim) const;
};

struct Dataset {
  Eigen::MatrixXd X;      // 6 x K
  Eigen::RowVectorXd U;   // 1 x K
  Eigen::RowVectorXd W;   // 1 x K
  Eigen::MatrixXd Xnext;  // 6 x K
  double h = 60.0;
};

/// Random one-step snapshot pairs of the plant. Columns are independent: column i
/// draws from a generator seeded by (seed, i), so any thread count gives the same data.
Dataset generate_dataset(const PlantModel& model, const DatasetConfig& cfg, const IntegratorOptions& integrator = {});

struct FitDiagnostics {
  Eigen::Index regressor_rank = 0;
  Eigen::Index lift_rank = 0;
  double regressor_condition = 0.0;
  double lift_condition = 0.0;
  bool rank_deficient = false;
  double dynamics_residual_max = 0.0;
  double dynamics_residual_rms = 0.0;
  double output_residual_max = 0.0;

  nlohmann::json to_json() const;
};

struct FitResult {
  LinearPredictor predictor;
  FitDiagnostics diagnostics;
};

/// Least-squares fit on already-lifted snapshot matrices:
/// [A bu bd] = Zn * pinv([Z; U; W]),  C = X * pinv(Z).
FitResult fit_lifted(const ObservableSet& obs, const Eigen::MatrixXd& Z, const Eigen::RowVectorXd& U,
                     const Eigen::RowVectorXd& W, const Eigen::MatrixXd& Znext, const Eigen::MatrixXd& X, double h);

/// EDMD fit: lifts X and Xnext through `obs` and calls fit_lifted.
FitResult fit_edmd(const ObservableSet& obs, const Eigen::MatrixXd& X, const Eigen::RowVectorXd& U,
                   const Eigen::RowVectorXd& W, const Eigen::MatrixXd& Xnext, double h);
FitResult fit_edmd(const ObservableSet& obs, const Dataset& data);

struct EquilibriumOptions {
  int max_iter = 100;
  double tol = 1e-10;
  double u_min = 0.0;
  double u_max = 26.5;
};

struct Equilibrium {
  State x = State::Zero();
  double u = 0.0;
  double w = 0.0;
  double residual = 0.0;
  /// Rounding floor of the residual at this point (64 eps times the largest row magnitude).
  double residual_floor = 0.0;
  int iterations = 0;
  bool input_in_range = true;
};

/// Solves f(x, u, w) = 0 together with x5 = target_y for (x, u).
Equilibrium find_equilibrium(const PlantModel& model, double w, double target_y, const EquilibriumOptions& opts = {});
/// Solves f(x, u, w) = 0 for x with the input held fixed.
Equilibrium find_equilibrium_for_input(const PlantModel& model, double u, double w,
                                       const EquilibriumOptions& opts = {});

/// Jacobian linearisation at an equilibrium, discretised exactly under zero-order hold.
LinearPredictor linearize_local(const PlantModel& model, const State& x_star, double u_star, double w_star, double h);

}  // namespace wws
