#include "wws/plant.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include <Eigen/LU>
#include <nlohmann/json.hpp>

namespace wws {
namespace {

constexpr std::array<double, kCoefficientCount> kTableA1 = {
    -9.8e-2, 4.0e-2,  9.8e-2,  3.8,     -2.4e2,  2.4e2,   3.0e-2,  -3.0e3,  1.1,     -1.7e-3, 1.7e-3,
    -6.0e-6, 6.0e-6,  -3.0e-6, 3.0e-6,  3.0e3,   1.1,     -2.0e3,  1.1,     1.7e-3,  -3.4e-3, 1.7e-3,
    6.0e-6,  -6.0e-6, -6.0e-6, 6.0e-6,  3.0e-6,  -6.0e-6, 3.0e-6,  2.0e3,   1.1,     -3.0e3,  1.7e-3,
    -1.7e-3, 6.0e-6,  -6.0e-6, 3.0e-6,  -3.0e-6, 3.0e3,   3.8,     -2.4e2,  2.4e2};

bool all_finite(const State& x) { return x.allFinite(); }

void check_band(const State& x, const IntegratorOptions& opts, double t) {
  for (int i = 0; i < kStateDim; ++i) {
    if (!std::isfinite(x(i)) || x(i) < opts.lower_limit || x(i) > opts.upper_limit) {
      throw PlantError(PlantError::Kind::Divergence,
                       "state x" + std::to_string(i + 1) + " = " + std::to_string(x(i)) + " left [" +
                           std::to_string(opts.lower_limit) + ", " + std::to_string(opts.upper_limit) +
                           "] degC at t = " + std::to_string(t) + " s");
    }
  }
}

// Dormand-Prince 5(4) tableau. The field is autonomous over a hold interval, so stage times are unused.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

State step_dormand_prince(const PlantModel& m, const State& x0, double u, double w, double h,
                          const IntegratorOptions& opts) {
  State x = x0;
  double t = 0.0;
  double hs = std::min(opts.max_substep, h);
  StateRate k1 = vector_field_unchecked(m, x, u, w);
  while (t < h) {
    const double remaining = h - t;
    bool last = false;
    if (hs >= remaining) {
      hs = remaining;
      last = true;
    }
    const StateRate k2 = vector_field_unchecked(m, x + hs * (a21 * k1), u, w);
    const StateRate k3 = vector_field_unchecked(m, x + hs * (a31 * k1 + a32 * k2), u, w);
    const StateRate k4 = vector_field_unchecked(m, x + hs * (a41 * k1 + a42 * k2 + a43 * k3), u, w);
    const StateRate k5 = vector_field_unchecked(m, x + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), u, w);
    const StateRate k6 =
        vector_field_unchecked(m, x + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), u, w);
    const State xn = x + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const StateRate k7 = vector_field_unchecked(m, xn, u, w);
    const StateRate err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double err_norm = 0.0;
    for (int i = 0; i < kStateDim; ++i) {
      const double scale = opts.abs_tol + opts.rel_tol * std::max(std::abs(x(i)), std::abs(xn(i)));
      err_norm = std::max(err_norm, std::abs(err(i)) / scale);
    }
    if (!std::isfinite(err_norm)) err_norm = 1e10;

    if (err_norm <= 1.0) {
      t = last ? h : t + hs;
      x = xn;
      k1 = k7;
      check_band(x, opts, t);
    }
    const double factor = err_norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err_norm, -0.2), 0.2, 5.0);
    if (err_norm <= 1.0 && last) break;
    hs = std::min(opts.max_substep, hs * factor);
    if (hs < opts.min_substep) {
      throw PlantError(PlantError::Kind::StepSizeUnderflow,
                       "adaptive substep underflow (" + std::to_string(hs) + " s) at t = " + std::to_string(t));
    }
  }
  return x;
}

State step_trapezoidal(const PlantModel& m, const State& x0, double u, double w, double h,
                       const IntegratorOptions& opts) {
  const auto n = static_cast<long>(std::ceil(h / opts.trapezoid_substep - 1e-12));
  const double hs = h / static_cast<double>(std::max(n, 1L));
  State x = x0;
  for (long s = 0; s < std::max(n, 1L); ++s) {
    const StateRate fx = vector_field_unchecked(m, x, u, w);
    State y = x + hs * fx;  // explicit Euler predictor
    bool converged = false;
    for (int it = 0; it < opts.newton_max_iter; ++it) {
      const State residual = y - x - 0.5 * hs * (fx + vector_field_unchecked(m, y, u, w));
      const StateJacobian jac = StateJacobian::Identity() - 0.5 * hs * jacobian(m, y, u, w).dx;
      const State delta = jac.partialPivLu().solve(residual);
      y -= delta;
      if (!y.allFinite()) break;
      if (delta.cwiseAbs().maxCoeff() <= opts.newton_tol * (1.0 + y.cwiseAbs().maxCoeff())) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      throw PlantError(PlantError::Kind::NewtonFailure,
                       "trapezoidal Newton iteration did not converge at substep " + std::to_string(s));
    }
    x = y;
    check_band(x, opts, static_cast<double>(s + 1) * hs);
  }
  return x;
}

}  // namespace

PlantModel PlantModel::tabulated() {
  PlantModel m;
  m.a = kTableA1;
  m.output_index = 5;
  return m;
}

PlantModel PlantModel::from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("a") || !doc["a"].is_array()) {
    throw ConfigError("plant file: expected an object with an array field \"a\"");
  }
  const auto& arr = doc["a"];
  if (arr.size() != kCoefficientCount) {
    throw ConfigError("plant file: expected 42 coefficients, got " + std::to_string(arr.size()));
  }
  PlantModel m;
  for (std::size_t i = 0; i < kCoefficientCount; ++i) {
    if (!arr[i].is_number()) throw ConfigError("plant file: coefficient a" + std::to_string(i + 1) + " is not a number");
    m.a[i] = arr[i].get<double>();
    if (!std::isfinite(m.a[i])) throw ConfigError("plant file: coefficient a" + std::to_string(i + 1) + " is not finite");
  }
  m.output_index = doc.value("output_index", 5);
  if (m.output_index < 1 || m.output_index > kStateDim) {
    throw ConfigError("plant file: output_index must be in 1..6");
  }
  return m;
}

PlantModel PlantModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open plant file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("plant file " + path.string() + ": " + e.what());
  }
  return from_json(doc);
}

nlohmann::json PlantModel::to_json() const {
  return {{"a", std::vector<double>(a.begin(), a.end())}, {"output_index", output_index}};
}

StateRate vector_field_unchecked(const PlantModel& model, const State& x, double u, double w) noexcept {
  const auto& a = model.a;
  const double x1 = x(0), x2 = x(1), x3 = x(2), x4 = x(3), x5 = x(4), x6 = x(5);
  const double x3s = x3 * x3, x4s = x4 * x4, x5s = x5 * x5;
  StateRate r;
  r(0) = a[0] * x1 + a[1] * x6 + a[2] * u;
  r(1) = a[3] * x1 + a[4] * x2 + a[5] * w;
  r(2) = a[6] * x2 + a[7] * x3 + a[8] * x4 + a[9] * x3s + a[10] * x4s + a[11] * x3s * x4 + a[12] * x3 * x4s +
         a[13] * x3s * x3 + a[14] * x4s * x4 + a[15] * w;
  r(3) = a[16] * x3 + a[17] * x4 + a[18] * x5 + a[19] * x3s + a[20] * x4s + a[21] * x5s + a[22] * x3s * x4 +
         a[23] * x3 * x4s + a[24] * x4s * x5 + a[25] * x4 * x5s + a[26] * x3s * x3 + a[27] * x4s * x4 +
         a[28] * x5s * x5 + a[29] * w;
  r(4) = a[30] * x4 + a[31] * x5 + a[32] * x4s + a[33] * x5s + a[34] * x4s * x5 + a[35] * x4 * x5s +
         a[36] * x4s * x4 + a[37] * x5s * x5 + a[38] * w;
  r(5) = a[39] * x5 + a[40] * x6 + a[41] * w;
  return r;
}

StateRate vector_field(const PlantModel& model, const State& x, double u, double w) {
  if (!all_finite(x) || !std::isfinite(u) || !std::isfinite(w)) {
    throw PlantError(PlantError::Kind::NonFiniteState, "non-finite state");
  }
  return vector_field_unchecked(model, x, u, w);
}

PlantJacobian jacobian(const PlantModel& model, const State& x, double /*u*/, double /*w*/) {
  const auto c = [&](int i) { return model.coef(i); };
  const double x3 = x(2), x4 = x(3), x5 = x(4);
  PlantJacobian j;
  j.dx.setZero();
  j.dx(0, 0) = c(1);
  j.dx(0, 5) = c(2);

  j.dx(1, 0) = c(4);
  j.dx(1, 1) = c(5);

  j.dx(2, 1) = c(7);
  j.dx(2, 2) = c(8) + 2 * c(10) * x3 + 2 * c(12) * x3 * x4 + c(13) * x4 * x4 + 3 * c(14) * x3 * x3;
  j.dx(2, 3) = c(9) + 2 * c(11) * x4 + c(12) * x3 * x3 + 2 * c(13) * x3 * x4 + 3 * c(15) * x4 * x4;

  j.dx(3, 2) = c(17) + 2 * c(20) * x3 + 2 * c(23) * x3 * x4 + c(24) * x4 * x4 + 3 * c(27) * x3 * x3;
  j.dx(3, 3) = c(18) + 2 * c(21) * x4 + c(23) * x3 * x3 + 2 * c(24) * x3 * x4 + 2 * c(25) * x4 * x5 +
               c(26) * x5 * x5 + 3 * c(28) * x4 * x4;
  j.dx(3, 4) = c(19) + 2 * c(22) * x5 + c(25) * x4 * x4 + 2 * c(26) * x4 * x5 + 3 * c(29) * x5 * x5;

  j.dx(4, 3) = c(31) + 2 * c(33) * x4 + 2 * c(35) * x4 * x5 + c(36) * x5 * x5 + 3 * c(37) * x4 * x4;
  j.dx(4, 4) = c(32) + 2 * c(34) * x5 + c(35) * x4 * x4 + 2 * c(36) * x4 * x5 + 3 * c(38) * x5 * x5;

  j.dx(5, 4) = c(40);
  j.dx(5, 5) = c(41);

  j.du.setZero();
  j.du(0) = c(3);

  j.dw << 0.0, c(6), c(16), c(30), c(39), c(42);
  return j;
}

State step(const PlantModel& model, const State& x, double u, double w, double h, const IntegratorOptions& opts) {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw PlantError(PlantError::Kind::InvalidArgument, "step: interval h must be positive, got " + std::to_string(h));
  }
  if (!all_finite(x) || !std::isfinite(u) || !std::isfinite(w)) {
    throw PlantError(PlantError::Kind::NonFiniteState, "non-finite state");
  }
  switch (opts.kind) {
    case IntegratorKind::DormandPrince:
      return step_dormand_prince(model, x, u, w, h, opts);
    case IntegratorKind::Trapezoidal:
      return step_trapezoidal(model, x, u, w, h, opts);
  }
  return x;
}

std::vector<State> simulate(const PlantModel& model, const State& x0, std::span<const double> u_seq,
                            std::span<const double> w_seq, double h, const IntegratorOptions& opts) {
  if (u_seq.size() != w_seq.size() || u_seq.empty()) {
    throw PlantError(PlantError::Kind::InvalidArgument, "simulate: u and w sequences must have equal length >= 1");
  }
  std::vector<State> out;
  out.reserve(u_seq.size() + 1);
  out.push_back(x0);
  for (std::size_t k = 0; k < u_seq.size(); ++k) {
    try {
      out.push_back(step(model, out.back(), u_seq[k], w_seq[k], h, opts));
    } catch (const PlantError& e) {
      throw PlantError(e.kind(), "step " + std::to_string(k) + ": " + e.what(), k);
    }
  }
  return out;
}

}  // namespace wws
