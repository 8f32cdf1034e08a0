#include "wws/optimizer/qp.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "wws/error.hpp"

namespace wws::opt {

const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::IterationLimit: return "iteration-limit";
  }
  return "?";
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// min 1/2 x'Px + q'x  s.t.  Gx <= h,  Ax = b.
struct Standard {
  MatrixXd P;
  VectorXd q;
  MatrixXd G;
  VectorXd h;
  MatrixXd A;
  VectorXd b;

  Eigen::Index n() const { return q.size(); }
  Eigen::Index m() const { return h.size(); }
  Eigen::Index p() const { return b.size(); }
};

enum class RowKind { Ineq, Lower, Upper };

struct RowOrigin {
  RowKind kind;
  Eigen::Index index;
  double scale;
};

/// The problem after substituting fixed variables and turning bounds into scaled rows.
struct Reduction {
  std::vector<Eigen::Index> free;
  VectorXd x_full;  // fixed values in place, free entries overwritten by the solve
  std::vector<RowOrigin> rows;
  std::vector<double> eq_scale;
  std::vector<Eigen::Index> eq_index;
  Standard s;
  bool trivially_infeasible = false;
  Certificate cert;
};

void init_certificate(Certificate& c, const MiqpProblem& qp) {
  c.ineq = VectorXd::Zero(qp.A_ineq.rows());
  c.eq = VectorXd::Zero(qp.A_eq.rows());
  c.lower = VectorXd::Zero(qp.num_vars());
  c.upper = VectorXd::Zero(qp.num_vars());
}

// Moves the column residual of fixed variables onto their bound multipliers.
void fold_fixed(Certificate& c, const MiqpProblem& qp, const std::vector<bool>& fixed) {
  VectorXd r = VectorXd::Zero(qp.num_vars());
  if (qp.A_ineq.rows() > 0) r += qp.A_ineq.transpose() * c.ineq;
  if (qp.A_eq.rows() > 0) r += qp.A_eq.transpose() * c.eq;
  r += c.upper - c.lower;
  for (Eigen::Index j = 0; j < r.size(); ++j) {
    if (!fixed[static_cast<std::size_t>(j)]) continue;
    if (r(j) > 0.0) {
      c.lower(j) += r(j);
    } else {
      c.upper(j) -= r(j);
    }
  }
}

Reduction reduce(const MiqpProblem& qp, const VectorXd& lb, const VectorXd& ub) {
  const Eigen::Index n = qp.num_vars();
  Reduction red;
  red.x_full = VectorXd::Zero(n);
  std::vector<bool> fixed(static_cast<std::size_t>(n), false);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (lb(j) > ub(j)) {
      red.trivially_infeasible = true;
      init_certificate(red.cert, qp);
      red.cert.lower(j) = 1.0;
      red.cert.upper(j) = 1.0;
      return red;
    }
    if (lb(j) == ub(j)) {
      fixed[static_cast<std::size_t>(j)] = true;
      red.x_full(j) = lb(j);
    } else {
      red.free.push_back(j);
    }
  }
  const auto nf = static_cast<Eigen::Index>(red.free.size());
  const auto pick_cols = [&](const MatrixXd& m) {
    MatrixXd out(m.rows(), nf);
    for (Eigen::Index k = 0; k < nf; ++k) out.col(k) = m.col(red.free[static_cast<std::size_t>(k)]);
    return out;
  };

  Standard& s = red.s;
  s.P.resize(nf, nf);
  s.q.resize(nf);
  const VectorXd hx = qp.H * red.x_full;
  for (Eigen::Index a = 0; a < nf; ++a) {
    const Eigen::Index ia = red.free[static_cast<std::size_t>(a)];
    s.q(a) = qp.f(ia) + hx(ia);
    for (Eigen::Index b = 0; b < nf; ++b) s.P(a, b) = qp.H(ia, red.free[static_cast<std::size_t>(b)]);
  }

  std::vector<VectorXd> g_rows;
  std::vector<double> h_vals;
  const auto trivial = [&](auto&& fill) {
    red.trivially_infeasible = true;
    init_certificate(red.cert, qp);
    fill(red.cert);
    fold_fixed(red.cert, qp, fixed);
  };

  if (qp.A_ineq.rows() > 0) {
    const MatrixXd gf = pick_cols(qp.A_ineq);
    const VectorXd rhs = qp.b_ineq - qp.A_ineq * red.x_full;
    for (Eigen::Index r = 0; r < gf.rows(); ++r) {
      const double scale = nf > 0 ? gf.row(r).cwiseAbs().maxCoeff() : 0.0;
      // Range of the row over the box of free variables.
      double lo = 0.0, hi = 0.0;
      for (Eigen::Index k = 0; k < nf; ++k) {
        const double a = gf(r, k);
        if (a == 0.0) continue;
        const Eigen::Index j = red.free[static_cast<std::size_t>(k)];
        lo += a > 0.0 ? a * lb(j) : a * ub(j);
        hi += a > 0.0 ? a * ub(j) : a * lb(j);
      }
      if (lo > rhs(r) + 1e-12 * (1.0 + std::abs(rhs(r)))) {
        trivial([&](Certificate& c) {
          c.ineq(r) = 1.0;
          for (Eigen::Index k = 0; k < nf; ++k) {
            const Eigen::Index j = red.free[static_cast<std::size_t>(k)];
            if (gf(r, k) > 0.0) c.lower(j) = gf(r, k);
            if (gf(r, k) < 0.0) c.upper(j) = -gf(r, k);
          }
        });
        return red;
      }
      // Rows that cannot bind anywhere in the box are dropped; this also removes rows whose
      // coefficients are negligible next to their constant and would not survive normalisation.
      if (scale == 0.0 || hi <= rhs(r)) continue;
      g_rows.emplace_back(gf.row(r).transpose() / scale);
      h_vals.push_back(rhs(r) / scale);
      red.rows.push_back({RowKind::Ineq, r, scale});
    }
  }
  for (Eigen::Index k = 0; k < nf; ++k) {
    const Eigen::Index j = red.free[static_cast<std::size_t>(k)];
    if (std::isfinite(ub(j))) {
      g_rows.emplace_back(VectorXd::Unit(nf, k));
      h_vals.push_back(ub(j));
      red.rows.push_back({RowKind::Upper, j, 1.0});
    }
    if (std::isfinite(lb(j))) {
      g_rows.emplace_back(-VectorXd::Unit(nf, k));
      h_vals.push_back(-lb(j));
      red.rows.push_back({RowKind::Lower, j, 1.0});
    }
  }
  s.G.resize(static_cast<Eigen::Index>(g_rows.size()), nf);
  s.h.resize(static_cast<Eigen::Index>(h_vals.size()));
  for (std::size_t i = 0; i < g_rows.size(); ++i) {
    s.G.row(static_cast<Eigen::Index>(i)) = g_rows[i].transpose();
    s.h(static_cast<Eigen::Index>(i)) = h_vals[i];
  }

  std::vector<VectorXd> a_rows;
  std::vector<double> b_vals;
  if (qp.A_eq.rows() > 0) {
    const MatrixXd af = pick_cols(qp.A_eq);
    const VectorXd rhs = qp.b_eq - qp.A_eq * red.x_full;
    for (Eigen::Index r = 0; r < af.rows(); ++r) {
      const double scale = nf > 0 ? af.row(r).cwiseAbs().maxCoeff() : 0.0;
      if (scale == 0.0) {
        if (std::abs(rhs(r)) > 1e-12 * (1.0 + std::abs(qp.b_eq(r)))) {
          trivial([&](Certificate& c) { c.eq(r) = rhs(r) > 0.0 ? -1.0 : 1.0; });
          return red;
        }
        continue;
      }
      a_rows.emplace_back(af.row(r).transpose() / scale);
      b_vals.push_back(rhs(r) / scale);
      red.eq_scale.push_back(scale);
      red.eq_index.push_back(r);
    }
  }
  s.A.resize(static_cast<Eigen::Index>(a_rows.size()), nf);
  s.b.resize(static_cast<Eigen::Index>(b_vals.size()));
  for (std::size_t i = 0; i < a_rows.size(); ++i) {
    s.A.row(static_cast<Eigen::Index>(i)) = a_rows[i].transpose();
    s.b(static_cast<Eigen::Index>(i)) = b_vals[i];
  }
  return red;
}

/// Newton systems [[K, A'], [A, 0]] with K = P + G' W G, solved by a Jacobi-scaled, regularised LU
/// followed by iterative refinement against the unregularised matrix.
class KktSystem {
 public:
  explicit KktSystem(const Standard& s) : s_(s) {}

  void factor(const VectorXd& w) {
    const Eigen::Index n = s_.n(), p = s_.p();
    exact_.setZero(n + p, n + p);
    exact_.topLeftCorner(n, n) = s_.P;
    if (s_.m() > 0) exact_.topLeftCorner(n, n).noalias() += s_.G.transpose() * w.asDiagonal() * s_.G;
    if (p > 0) {
      exact_.topRightCorner(n, p) = s_.A.transpose();
      exact_.bottomLeftCorner(p, n) = s_.A;
    }
    // Symmetric Jacobi scaling keeps the regularisation relative to each variable's curvature
    // when z/s spans many orders of magnitude.
    d_ = VectorXd::Ones(n + p);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double k = exact_(i, i);
      if (k > 0.0) d_(i) = 1.0 / std::sqrt(k);
    }
    MatrixXd reg = d_.asDiagonal() * exact_ * d_.asDiagonal();
    const double delta = 1e-13 * (1.0 + reg.cwiseAbs().maxCoeff());
    reg.topLeftCorner(n, n).diagonal().array() += delta;
    reg.bottomRightCorner(p, p).diagonal().array() -= delta;
    lu_.compute(reg);
  }

  VectorXd solve(const VectorXd& rhs) const {
    const auto apply = [&](const VectorXd& r) { return VectorXd(d_.cwiseProduct(lu_.solve(d_.cwiseProduct(r)))); };
    VectorXd sol = apply(rhs);
    for (int k = 0; k < 3; ++k) sol += apply(rhs - exact_ * sol);
    return sol;
  }

 private:
  const Standard& s_;
  MatrixXd exact_;
  VectorXd d_;
  Eigen::PartialPivLU<MatrixXd> lu_;
};

struct IpmPoint {
  VectorXd x, s, z, y;
  int iterations = 0;
  bool converged = false;
  double pres = kInf, dres = kInf, gap = kInf;
};

double max_step(const VectorXd& v, const VectorXd& dv) {
  double a = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
  }
  return a;
}

/// Mehrotra predictor-corrector on the standard form. Requires m > 0.
IpmPoint interior_point(const Standard& st, double tol, int max_iter) {
  const Eigen::Index n = st.n(), m = st.m(), p = st.p();
  KktSystem kkt(st);
  IpmPoint pt;

  // Start: minimiser of the objective plus 1/2 ||Gx - h||^2 on the equality set.
  kkt.factor(VectorXd::Ones(m));
  VectorXd rhs(n + p);
  rhs.head(n) = -st.q + st.G.transpose() * st.h;
  rhs.tail(p) = st.b;
  const VectorXd sol0 = kkt.solve(rhs);
  pt.x = sol0.head(n);
  pt.y = VectorXd::Zero(p);
  pt.s = (st.h - st.G * pt.x).cwiseMax(1.0);
  pt.z = VectorXd::Ones(m);
  if (!pt.x.allFinite()) pt.x.setZero();

  const double qn = 1.0 + (n > 0 ? st.q.cwiseAbs().maxCoeff() : 0.0);
  const double hn = 1.0 + st.h.cwiseAbs().maxCoeff();
  const double bn = 1.0 + (p > 0 ? st.b.cwiseAbs().maxCoeff() : 0.0);

  // Near the solution the Newton systems lose accuracy, so the best iterate seen is returned
  // once progress stalls there.
  IpmPoint best;
  double best_merit = kInf;
  int since_best = 0;
  for (int it = 0; it <= max_iter; ++it) {
    const VectorXd rd = st.P * pt.x + st.q + st.G.transpose() * pt.z + (p > 0 ? VectorXd(st.A.transpose() * pt.y)
                                                                              : VectorXd::Zero(n));
    const VectorXd rpi = st.G * pt.x + pt.s - st.h;
    const VectorXd rpe = p > 0 ? VectorXd(st.A * pt.x - st.b) : VectorXd();
    const double mu = pt.s.dot(pt.z) / static_cast<double>(m);
    const double obj = 0.5 * pt.x.dot(st.P * pt.x) + st.q.dot(pt.x);
    pt.dres = (n > 0 ? rd.cwiseAbs().maxCoeff() : 0.0) / qn;
    pt.pres = std::max(rpi.cwiseAbs().maxCoeff() / hn, p > 0 ? rpe.cwiseAbs().maxCoeff() / bn : 0.0);
    pt.gap = pt.s.dot(pt.z) / (1.0 + std::abs(obj));
    pt.iterations = it;
    if (pt.dres <= tol && pt.pres <= tol && pt.gap <= tol) {
      pt.converged = true;
      return pt;
    }
    const double merit = std::max({pt.dres, pt.pres, pt.gap});
    if (merit < best_merit) {
      best_merit = merit;
      best = pt;
      since_best = 0;
    } else if (++since_best >= 5 && best_merit < std::sqrt(tol)) {
      break;
    }
    if (it == max_iter) break;

    const VectorXd w = pt.z.cwiseQuotient(pt.s);
    kkt.factor(w);
    // Solves P dx + G'dz + A'dy = -ed, A dx = -ee, G dx + ds = -ei, s.dz + z.ds = -ec by
    // elimination onto the reduced system.
    const auto eliminate = [&](const VectorXd& ed, const VectorXd& ee, const VectorXd& ei, const VectorXd& ec,
                               VectorXd& dx, VectorXd& dy, VectorXd& dz, VectorXd& ds) {
      VectorXd r(n + p);
      r.head(n) = -ed - st.G.transpose() * (w.cwiseProduct(ei) - ec.cwiseQuotient(pt.s));
      if (p > 0) r.tail(p) = -ee;
      const VectorXd d = kkt.solve(r);
      dx = d.head(n);
      dy = d.tail(p);
      const VectorXd gdx = st.G * dx;
      dz = w.cwiseProduct(gdx + ei) - ec.cwiseQuotient(pt.s);
      ds = -ei - gdx;
    };
    // The elimination amplifies rounding by the spread of z/s, so the step is refined against
    // the unreduced Newton system.
    const auto direction = [&](const VectorXd& rc, VectorXd& dx, VectorXd& dy, VectorXd& dz, VectorXd& ds) {
      eliminate(rd, rpe, rpi, rc, dx, dy, dz, ds);
      VectorXd cx, cy, cz, cs;
      for (int k = 0; k < 2; ++k) {
        VectorXd ed = rd + st.P * dx + st.G.transpose() * dz;
        if (p > 0) ed += st.A.transpose() * dy;
        const VectorXd ee = p > 0 ? VectorXd(rpe + st.A * dx) : VectorXd();
        const VectorXd ei = rpi + st.G * dx + ds;
        const VectorXd ec = rc + pt.s.cwiseProduct(dz) + pt.z.cwiseProduct(ds);
        eliminate(ed, ee, ei, ec, cx, cy, cz, cs);
        if (!cx.allFinite()) break;
        dx += cx;
        dy += cy;
        dz += cz;
        ds += cs;
      }
    };

    VectorXd dx, dy, dz, ds;
    const VectorXd rc_aff = pt.s.cwiseProduct(pt.z);
    direction(rc_aff, dx, dy, dz, ds);
    const double a_aff = std::min(max_step(pt.s, ds), max_step(pt.z, dz));
    const double mu_aff = (pt.s + a_aff * ds).dot(pt.z + a_aff * dz) / static_cast<double>(m);
    const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

    const VectorXd rc = rc_aff + ds.cwiseProduct(dz) - VectorXd::Constant(m, sigma * mu);
    direction(rc, dx, dy, dz, ds);
    double alpha = std::min(1.0, 0.99 * std::min(max_step(pt.s, ds), max_step(pt.z, dz)));
    const auto mu_after = [&](double a) { return (pt.s + a * ds).dot(pt.z + a * dz) / static_cast<double>(m); };
    // When the second-order term overshoots, the corrected step raises complementarity and
    // the iterates cycle through a few values of mu. The uncorrected, more centred direction,
    // shortened until mu decreases, breaks the cycle.
    if (alpha < 0.1 || mu_after(alpha) >= mu) {
      direction(rc_aff - VectorXd::Constant(m, std::max(sigma, 0.5) * mu), dx, dy, dz, ds);
      alpha = std::min(1.0, 0.99 * std::min(max_step(pt.s, ds), max_step(pt.z, dz)));
      for (int k = 0; k < 30 && mu_after(alpha) >= mu; ++k) alpha *= 0.5;
    }
    if (!(alpha > 1e-14) || !dx.allFinite()) break;
    pt.x += alpha * dx;
    pt.y += alpha * dy;
    pt.z += alpha * dz;
    pt.s += alpha * ds;
    pt.s = pt.s.cwiseMax(1e-300);
    pt.z = pt.z.cwiseMax(1e-300);
  }
  if (best_merit < kInf) {
    best.iterations = pt.iterations;
    return best;
  }
  return pt;
}

/// Max of stationarity (relative to the gradient scale), primal violation and complementarity.
double kkt_residual(const Standard& st, const VectorXd& x, const VectorXd& z, const VectorXd& y) {
  double r = 0.0;
  if (st.n() > 0) {
    const VectorXd grad = st.P * x + st.q;
    VectorXd rd = grad;
    if (st.m() > 0) rd += st.G.transpose() * z;
    if (st.p() > 0) rd += st.A.transpose() * y;
    r = rd.cwiseAbs().maxCoeff() / (1.0 + grad.cwiseAbs().maxCoeff());
  }
  if (st.m() > 0) {
    const VectorXd slack = st.h - st.G * x;
    r = std::max(r, (-slack).maxCoeff());
    r = std::max(r, slack.cwiseProduct(z).cwiseAbs().maxCoeff());
    r = std::max(r, (-z).maxCoeff());
  }
  if (st.p() > 0) r = std::max(r, (st.A * x - st.b).cwiseAbs().maxCoeff());
  return r;
}

/// Exact solution of the equality QP on the rows the interior point marks active.
bool polish(const Standard& st, IpmPoint& pt) {
  const Eigen::Index n = st.n(), p = st.p();
  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < st.m(); ++i) {
    if (pt.z(i) > pt.s(i)) active.push_back(i);
  }
  const auto na = static_cast<Eigen::Index>(active.size());
  MatrixXd k = MatrixXd::Zero(n + na + p, n + na + p);
  VectorXd rhs = VectorXd::Zero(n + na + p);
  k.topLeftCorner(n, n) = st.P;
  rhs.head(n) = -st.q;
  for (Eigen::Index a = 0; a < na; ++a) {
    const auto row = st.G.row(active[static_cast<std::size_t>(a)]);
    k.block(n + a, 0, 1, n) = row;
    k.block(0, n + a, n, 1) = row.transpose();
    rhs(n + a) = st.h(active[static_cast<std::size_t>(a)]);
  }
  if (p > 0) {
    k.block(n + na, 0, p, n) = st.A;
    k.block(0, n + na, n, p) = st.A.transpose();
    rhs.tail(p) = st.b;
  }
  const VectorXd sol = k.completeOrthogonalDecomposition().solve(rhs);
  if (!sol.allFinite()) return false;
  const VectorXd x = sol.head(n);
  VectorXd z = VectorXd::Zero(st.m());
  for (Eigen::Index a = 0; a < na; ++a) z(active[static_cast<std::size_t>(a)]) = sol(n + a);
  const VectorXd y = sol.tail(p);
  constexpr double kTol = 1e-9;
  const double z_scale = 1.0 + (st.m() > 0 ? z.cwiseAbs().maxCoeff() : 0.0);
  if (st.m() > 0 && ((st.G * x - st.h).maxCoeff() > kTol * (1.0 + st.h.cwiseAbs().maxCoeff()) ||
                     z.minCoeff() < -kTol * z_scale)) {
    return false;
  }
  if (kkt_residual(st, x, z.cwiseMax(0.0), y) > kTol * z_scale) return false;
  const double before = 0.5 * pt.x.dot(st.P * pt.x) + st.q.dot(pt.x);
  const double after = 0.5 * x.dot(st.P * x) + st.q.dot(x);
  if (after > before + kTol * (1.0 + std::abs(before))) return false;
  pt.x = x;
  pt.z = z.cwiseMax(0.0);
  pt.y = y;
  pt.s = (st.h - st.G * x).cwiseMax(0.0);
  return true;
}

/// Elastic LP: min tau + sum(e+ + e-)  s.t.  Gx - tau <= h, tau >= 0, Ax + e+ - e- = b, e >= 0.
Standard phase_one(const Standard& st) {
  const Eigen::Index n = st.n(), m = st.m(), p = st.p();
  const Eigen::Index n1 = n + 1 + 2 * p;
  Standard ph;
  ph.P = MatrixXd::Zero(n1, n1);
  ph.q = VectorXd::Zero(n1);
  ph.q.segment(n, 1 + 2 * p).setOnes();
  ph.G = MatrixXd::Zero(m + 1 + 2 * p, n1);
  ph.h = VectorXd::Zero(m + 1 + 2 * p);
  ph.G.topLeftCorner(m, n) = st.G;
  ph.G.block(0, n, m, 1).setConstant(-1.0);
  ph.h.head(m) = st.h;
  ph.G(m, n) = -1.0;
  for (Eigen::Index k = 0; k < 2 * p; ++k) ph.G(m + 1 + k, n + 1 + k) = -1.0;
  ph.A = MatrixXd::Zero(p, n1);
  if (p > 0) {
    ph.A.leftCols(n) = st.A;
    ph.A.block(0, n + 1, p, p) = MatrixXd::Identity(p, p);
    ph.A.block(0, n + 1 + p, p, p) = -MatrixXd::Identity(p, p);
  }
  ph.b = st.b;
  return ph;
}

}  // namespace

SolveResult solve_qp(const MiqpProblem& qp, const QpOptions& opts) { return solve_qp(qp, qp.lb, qp.ub, opts); }

SolveResult solve_qp(const MiqpProblem& qp, const VectorXd& lb, const VectorXd& ub, const QpOptions& opts) {
  if (lb.size() != qp.num_vars() || ub.size() != qp.num_vars()) throw OptimizerError("solve_qp: bound size mismatch");
  SolveResult res;
  res.nodes = 1;
  res.qp_solves = 1;
  if (qp.trivially_infeasible) {
    res.status = Status::Infeasible;
    res.message = "constant constraint violated";
    return res;
  }
  Reduction red = reduce(qp, lb, ub);
  if (red.trivially_infeasible) {
    res.status = Status::Infeasible;
    res.certificate = std::move(red.cert);
    res.message = "a row cannot be satisfied within the variable bounds";
    return res;
  }
  const Standard& st = red.s;
  const Eigen::Index n = st.n();

  const auto finish = [&](const VectorXd& xr) {
    for (Eigen::Index k = 0; k < n; ++k) red.x_full(red.free[static_cast<std::size_t>(k)]) = xr(k);
    red.x_full = red.x_full.cwiseMax(lb).cwiseMin(ub);
    for (Eigen::Index j = 0; j < red.x_full.size(); ++j) {
      double& v = red.x_full(j);
      if (std::isfinite(lb(j)) && std::abs(v - lb(j)) <= 1e-12 * (1.0 + std::abs(lb(j)))) v = lb(j);
      if (std::isfinite(ub(j)) && std::abs(v - ub(j)) <= 1e-12 * (1.0 + std::abs(ub(j)))) v = ub(j);
    }
    res.x = red.x_full;
    res.objective = qp.objective(res.x);
    res.best_bound = res.objective;
    res.gap = 0.0;
  };

  if (st.m() == 0) {
    // Equality-constrained (or unconstrained) QP: one KKT solve.
    const Eigen::Index p = st.p();
    MatrixXd k = MatrixXd::Zero(n + p, n + p);
    k.topLeftCorner(n, n) = st.P;
    if (p > 0) {
      k.topRightCorner(n, p) = st.A.transpose();
      k.bottomLeftCorner(p, n) = st.A;
    }
    VectorXd rhs(n + p);
    rhs.head(n) = -st.q;
    rhs.tail(p) = st.b;
    // Every variable may be fixed, leaving an empty system.
    const VectorXd sol = n + p > 0 ? VectorXd(k.completeOrthogonalDecomposition().solve(rhs)) : VectorXd();
    const VectorXd resid = k * sol - rhs;
    const double scale = 1.0 + (n + p > 0 ? rhs.cwiseAbs().maxCoeff() + k.cwiseAbs().maxCoeff() : 0.0);
    if (p > 0 && (st.A * sol.head(n) - st.b).cwiseAbs().maxCoeff() > opts.feas_tol * (1.0 + st.b.cwiseAbs().maxCoeff())) {
      // Inconsistent equalities: the least-squares residual direction separates.
      const VectorXd r = st.A * sol.head(n) - st.b;
      init_certificate(res.certificate, qp);
      for (Eigen::Index i = 0; i < p; ++i) {
        res.certificate.eq(red.eq_index[static_cast<std::size_t>(i)]) = r(i) / red.eq_scale[static_cast<std::size_t>(i)];
      }
      std::vector<bool> fixed(static_cast<std::size_t>(qp.num_vars()), true);
      for (auto j : red.free) fixed[static_cast<std::size_t>(j)] = false;
      fold_fixed(res.certificate, qp, fixed);
      res.status = Status::Infeasible;
      res.message = "inconsistent equality constraints";
      return res;
    }
    if (n + p > 0 && resid.cwiseAbs().maxCoeff() > 1e-8 * scale) {
      res.status = Status::IterationLimit;
      res.message = "objective unbounded below";
      return res;
    }
    finish(sol.head(n));
    res.status = Status::Optimal;
    res.kkt_residual = n + p > 0 ? resid.cwiseAbs().maxCoeff() : 0.0;
    return res;
  }

  // Phase 1.
  const Standard ph = phase_one(st);
  IpmPoint p1 = interior_point(ph, std::min(opts.tol, 1e-10), opts.max_iter);
  res.iterations += p1.iterations;
  const double infeas = ph.q.dot(p1.x);
  if (infeas > opts.feas_tol) {
    init_certificate(res.certificate, qp);
    for (Eigen::Index i = 0; i < st.m(); ++i) {
      const RowOrigin& o = red.rows[static_cast<std::size_t>(i)];
      const double zi = p1.z(i) / o.scale;
      switch (o.kind) {
        case RowKind::Ineq: res.certificate.ineq(o.index) = zi; break;
        case RowKind::Lower: res.certificate.lower(o.index) = zi; break;
        case RowKind::Upper: res.certificate.upper(o.index) = zi; break;
      }
    }
    for (Eigen::Index i = 0; i < st.p(); ++i) {
      res.certificate.eq(red.eq_index[static_cast<std::size_t>(i)]) = p1.y(i) / red.eq_scale[static_cast<std::size_t>(i)];
    }
    std::vector<bool> fixed(static_cast<std::size_t>(qp.num_vars()), true);
    for (auto j : red.free) fixed[static_cast<std::size_t>(j)] = false;
    fold_fixed(res.certificate, qp, fixed);
    res.status = Status::Infeasible;
    res.message = "phase-1 infeasibility " + std::to_string(infeas);
    return res;
  }

  // Phase 2.
  IpmPoint pt = interior_point(st, opts.tol, opts.max_iter);
  res.iterations += pt.iterations;
  if (!pt.x.allFinite()) {
    res.status = Status::IterationLimit;
    res.message = "interior point diverged";
    return res;
  }
  if (opts.polish) res.polished = polish(st, pt);
  res.kkt_residual = kkt_residual(st, pt.x, pt.z, pt.y);
  const bool acceptable = pt.converged || res.polished || (pt.pres <= 1e-7 && pt.dres <= 1e-7 && pt.gap <= 1e-7);
  finish(pt.x);
  if (!acceptable) {
    res.status = Status::IterationLimit;
    res.message = "interior point did not converge";
    return res;
  }
  res.status = Status::Optimal;
  return res;
}

bool verify_certificate(const MiqpProblem& qp, const VectorXd& lb, const VectorXd& ub, const Certificate& cert,
                        double tol) {
  const Eigen::Index n = qp.num_vars();
  if (cert.ineq.size() != qp.A_ineq.rows() || cert.eq.size() != qp.A_eq.rows() || cert.lower.size() != n ||
      cert.upper.size() != n) {
    return false;
  }
  if ((cert.ineq.size() > 0 && cert.ineq.minCoeff() < 0.0) || (n > 0 && cert.lower.minCoeff() < 0.0) ||
      (n > 0 && cert.upper.minCoeff() < 0.0)) {
    return false;
  }
  VectorXd r = cert.upper - cert.lower;
  if (qp.A_ineq.rows() > 0) r += qp.A_ineq.transpose() * cert.ineq;
  if (qp.A_eq.rows() > 0) r += qp.A_eq.transpose() * cert.eq;
  double value = 0.0;
  double mag = 0.0;
  const auto add = [&](double v) {
    value += v;
    mag += std::abs(v);
  };
  for (Eigen::Index i = 0; i < cert.ineq.size(); ++i) add(qp.b_ineq(i) * cert.ineq(i));
  for (Eigen::Index i = 0; i < cert.eq.size(); ++i) add(qp.b_eq(i) * cert.eq(i));
  for (Eigen::Index j = 0; j < n; ++j) {
    if (cert.lower(j) > 0.0) {
      if (!std::isfinite(lb(j))) return false;
      add(-lb(j) * cert.lower(j));
    }
    if (cert.upper(j) > 0.0) {
      if (!std::isfinite(ub(j))) return false;
      add(ub(j) * cert.upper(j));
    }
  }
  const double weight = 1.0 + cert.ineq.cwiseAbs().sum() + cert.eq.cwiseAbs().sum() + cert.lower.sum() + cert.upper.sum();
  const double stationarity = n > 0 ? r.cwiseAbs().maxCoeff() : 0.0;
  return stationarity <= tol * weight && value < -1e-12 * (1.0 + mag);
}

}  // namespace wws::opt
