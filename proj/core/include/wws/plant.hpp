#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "wws/error.hpp"

namespace wws {

constexpr int kStateDim = 6;
constexpr std::size_t kCoefficientCount = 42;

/// Temperatures of heat pump, pipe 1, tank layers 1-3 and pipe 2, in degC.
using State = Eigen::Matrix<double, kStateDim, 1>;
using StateRate = Eigen::Matrix<double, kStateDim, 1>;
using StateJacobian = Eigen::Matrix<double, kStateDim, kStateDim>;

/// Coefficients a1..a42 of the six-state polynomial warm-water supply model.
/// Stored zero-based: coefficient a_i lives in `a[i - 1]`.
struct PlantModel {
  std::array<double, kCoefficientCount> a{};
  int output_index = 5;  // 1-based

  /// Accessor using the 1-based numbering of the coefficient table.
  double coef(int i) const { return a[static_cast<std::size_t>(i - 1)]; }

  /// The tabulated coefficient set shipped with the library.
  static PlantModel tabulated();

  static PlantModel from_json(const nlohmann::json& doc);
  static PlantModel load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  double output(const State& x) const { return x(output_index - 1); }
};

/// y = x5, the third tank layer.
inline double output(const State& x) { return x(4); }

/// Right-hand side f(x, u, w). Throws PlantError{NonFiniteState} on non-finite input.
StateRate vector_field(const PlantModel& model, const State& x, double u, double w);

/// Same as vector_field without input validation; used in the integrator inner loop.
StateRate vector_field_unchecked(const PlantModel& model, const State& x, double u, double w) noexcept;

/// Analytic partial derivatives of the vector field.
struct PlantJacobian {
  StateJacobian dx;   // df/dx
  StateRate du;       // df/du
  StateRate dw;       // df/dw
};
PlantJacobian jacobian(const PlantModel& model, const State& x, double u, double w);

enum class IntegratorKind { DormandPrince, Trapezoidal };

struct IntegratorOptions {
  IntegratorKind kind = IntegratorKind::DormandPrince;
  double abs_tol = 1e-8;
  double rel_tol = 0.0;
  /// Hard ceiling on the explicit substep. The fastest tabulated mode is ~3e3 1/s.
  double max_substep = 2e-4;
  double min_substep = 1e-12;
  /// Fixed substep of the implicit trapezoidal rule.
  double trapezoid_substep = 1e-2;
  int newton_max_iter = 25;
  double newton_tol = 1e-12;
  /// States leaving this band are reported as divergence.
  double lower_limit = -50.0;
  double upper_limit = 150.0;
};

/// Integrates the plant over [0, h] with u and w held constant.
State step(const PlantModel& model, const State& x, double u, double w, double h,
           const IntegratorOptions& opts = {});

/// Repeated zero-order-hold steps. Returns n + 1 states starting with x0.
std::vector<State> simulate(const PlantModel& model, const State& x0, std::span<const double> u_seq,
                            std::span<const double> w_seq, double h, const IntegratorOptions& opts = {});

}  // namespace wws
