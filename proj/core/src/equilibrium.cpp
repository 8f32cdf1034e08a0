#include <cmath>
#include <limits>

#include <Eigen/QR>

#include "wws/linalg.hpp"
#include "wws/predictor.hpp"

namespace wws {
namespace {

using Vec7 = Eigen::Matrix<double, 7, 1>;
using Mat7 = Eigen::Matrix<double, 7, 7>;

// Largest sum of absolute term magnitudes over the six rows; sets the rounding floor of the residual.
double row_magnitude(const PlantModel& model, const State& x, double u, double w) {
  PlantModel abs_model = model;
  for (double& c : abs_model.a) c = std::abs(c);
  return vector_field_unchecked(abs_model, x.cwiseAbs(), std::abs(u), std::abs(w)).maxCoeff();
}

// Scalar Newton on a polynomial row; returns `start` when it fails to converge.
template <class F, class DF>
double scalar_root(F f, DF df, double start) {
  double x = start;
  for (int it = 0; it < 200; ++it) {
    const double d = df(x);
    if (d == 0.0 || !std::isfinite(d)) return start;
    const double dx = f(x) / d;
    x -= dx;
    if (!std::isfinite(x)) return start;
    if (std::abs(dx) <= 1e-14 * (1.0 + std::abs(x))) return x;
  }
  return start;
}

// Back-substitution along the plant's chain structure, given the output temperature.
// Exact when the scalar root solves converge; used as the Newton starting point.
Vec7 chain_guess(const PlantModel& m, double w, double y) {
  const auto a = [&](int i) { return m.coef(i); };
  Vec7 v;
  v.setConstant(y);
  const double x5 = y;
  const double x4 = scalar_root(
      [&](double x4) {
        return a(31) * x4 + a(32) * x5 + a(33) * x4 * x4 + a(34) * x5 * x5 + a(35) * x4 * x4 * x5 +
               a(36) * x4 * x5 * x5 + a(37) * x4 * x4 * x4 + a(38) * x5 * x5 * x5 + a(39) * w;
      },
      [&](double x4) {
        return a(31) + 2 * a(33) * x4 + 2 * a(35) * x4 * x5 + a(36) * x5 * x5 + 3 * a(37) * x4 * x4;
      },
      x5);
  const double x3 = scalar_root(
      [&](double x3) {
        return a(17) * x3 + a(18) * x4 + a(19) * x5 + a(20) * x3 * x3 + a(21) * x4 * x4 + a(22) * x5 * x5 +
               a(23) * x3 * x3 * x4 + a(24) * x3 * x4 * x4 + a(25) * x4 * x4 * x5 + a(26) * x4 * x5 * x5 +
               a(27) * x3 * x3 * x3 + a(28) * x4 * x4 * x4 + a(29) * x5 * x5 * x5 + a(30) * w;
      },
      [&](double x3) {
        return a(17) + 2 * a(20) * x3 + 2 * a(23) * x3 * x4 + a(24) * x4 * x4 + 3 * a(27) * x3 * x3;
      },
      x4);
  v(2) = x3;
  v(3) = x4;
  v(4) = x5;
  if (a(7) != 0.0) {
    const double rest = a(8) * x3 + a(9) * x4 + a(10) * x3 * x3 + a(11) * x4 * x4 + a(12) * x3 * x3 * x4 +
                        a(13) * x3 * x4 * x4 + a(14) * x3 * x3 * x3 + a(15) * x4 * x4 * x4 + a(16) * w;
    v(1) = -rest / a(7);
  }
  if (a(41) != 0.0) v(5) = -(a(40) * x5 + a(42) * w) / a(41);
  if (a(4) != 0.0) v(0) = -(a(5) * v(1) + a(6) * w) / a(4);
  v(6) = a(3) != 0.0 ? -(a(1) * v(0) + a(2) * v(5)) / a(3) : 0.0;
  if (!v.allFinite()) v.setConstant(y);
  return v;
}

struct NewtonOutcome {
  Vec7 v;
  double residual;
  int iterations;
};

// Damped Newton on F(v) = 0 with a column-scaled, pivoted QR solve.
template <class Residual, class Jac>
NewtonOutcome damped_newton(Vec7 v, Residual residual, Jac jac, int active, int max_iter, double tol) {
  Vec7 r = residual(v);
  double norm = r.head(active).cwiseAbs().maxCoeff();
  int it = 0;
  for (; it < max_iter && norm > tol; ++it) {
    Mat7 j = jac(v);
    const Eigen::MatrixXd js = j.topLeftCorner(active, active);
    Eigen::VectorXd scale = js.colwise().norm().transpose();
    for (Eigen::Index i = 0; i < scale.size(); ++i) {
      if (scale(i) == 0.0) scale(i) = 1.0;
    }
    const Eigen::MatrixXd jscaled = js * scale.cwiseInverse().asDiagonal();
    const Eigen::VectorXd dy = jscaled.colPivHouseholderQr().solve(-r.head(active));
    const Eigen::VectorXd dv = dy.cwiseQuotient(scale);
    double t = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 40; ++ls) {
      Vec7 trial = v;
      trial.head(active) += t * dv;
      const Vec7 rt = residual(trial);
      const double nt = rt.head(active).cwiseAbs().maxCoeff();
      if (std::isfinite(nt) && nt < norm) {
        v = trial;
        r = rt;
        norm = nt;
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) break;  // stagnated at the rounding floor
  }
  return {v, norm, it};
}

}  // namespace

Equilibrium find_equilibrium(const PlantModel& model, double w, double target_y, const EquilibriumOptions& opts) {
  const int oi = model.output_index - 1;
  auto residual = [&](const Vec7& v) {
    Vec7 r;
    r.head<6>() = vector_field_unchecked(model, v.head<6>(), v(6), w);
    r(6) = v(oi) - target_y;
    return r;
  };
  auto jac = [&](const Vec7& v) {
    const PlantJacobian pj = jacobian(model, v.head<6>(), v(6), w);
    Mat7 j = Mat7::Zero();
    j.topLeftCorner<6, 6>() = pj.dx;
    j.block<6, 1>(0, 6) = pj.du;
    j(6, oi) = 1.0;
    return j;
  };

  Vec7 start = oi == 4 ? chain_guess(model, w, target_y) : Vec7::Constant(target_y);
  const NewtonOutcome res = damped_newton(start, residual, jac, 7, opts.max_iter, opts.tol);

  Equilibrium e;
  e.x = res.v.head<6>();
  e.u = res.v(6);
  e.w = w;
  e.residual = res.residual;
  e.iterations = res.iterations;
  e.residual_floor = 64.0 * std::numeric_limits<double>::epsilon() * row_magnitude(model, e.x, e.u, w);
  if (!(res.residual <= std::max(opts.tol, e.residual_floor))) {
    throw PredictorError("equilibrium solve did not converge: residual " + std::to_string(res.residual) + " after " +
                         std::to_string(res.iterations) + " iterations");
  }
  e.input_in_range = e.u >= opts.u_min && e.u <= opts.u_max;
  return e;
}

Equilibrium find_equilibrium_for_input(const PlantModel& model, double u, double w, const EquilibriumOptions& opts) {
  auto residual = [&](const Vec7& v) {
    Vec7 r = Vec7::Zero();
    r.head<6>() = vector_field_unchecked(model, v.head<6>(), u, w);
    return r;
  };
  auto jac = [&](const Vec7& v) {
    Mat7 j = Mat7::Zero();
    j.topLeftCorner<6, 6>() = jacobian(model, v.head<6>(), u, w).dx;
    return j;
  };
  // Start from the nearly linear fixed point of the linear part of the model.
  Vec7 start = Vec7::Zero();
  {
    const PlantJacobian pj = jacobian(model, State::Zero(), u, w);
    const State rhs = -(pj.du * u + pj.dw * w);
    start.head<6>() = pj.dx.colPivHouseholderQr().solve(rhs);
    if (!start.allFinite()) start.setConstant(w);
  }
  const NewtonOutcome res = damped_newton(start, residual, jac, 6, opts.max_iter, opts.tol);
  Equilibrium e;
  e.x = res.v.head<6>();
  e.u = u;
  e.w = w;
  e.residual = res.residual;
  e.iterations = res.iterations;
  e.residual_floor = 64.0 * std::numeric_limits<double>::epsilon() * row_magnitude(model, e.x, u, w);
  if (!(res.residual <= std::max(opts.tol, e.residual_floor))) {
    throw PredictorError("equilibrium solve did not converge: residual " + std::to_string(res.residual));
  }
  e.input_in_range = u >= opts.u_min && u <= opts.u_max;
  return e;
}

LinearPredictor linearize_local(const PlantModel& model, const State& x_star, double u_star, double w_star, double h) {
  const PlantJacobian j = jacobian(model, x_star, u_star, w_star);
  Eigen::MatrixXd b(kStateDim, 2);
  b.col(0) = j.du;
  b.col(1) = j.dw;
  const auto [ad, bdisc] = discretize_zoh(j.dx, b, h);

  LinearPredictor p;
  p.A = ad;
  p.bu = bdisc.col(0);
  p.bd = bdisc.col(1);
  p.C = Eigen::MatrixXd::Identity(kStateDim, kStateDim);
  p.h = h;
  p.observables = ObservableSet::identity();
  p.operating_point = OperatingPoint{x_star, u_star, w_star};
  p.validate();
  return p;
}

}  // namespace wws
