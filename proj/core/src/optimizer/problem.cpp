#include "wws/optimizer/problem.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include <Eigen/Eigenvalues>

#include "wws/error.hpp"

namespace wws::opt {

AffineExpr& AffineExpr::normalize() {
  std::map<int, double> merged;
  for (const auto& [i, c] : terms) merged[i] += c;
  terms.clear();
  for (const auto& [i, c] : merged) {
    if (c != 0.0) terms.emplace_back(i, c);
  }
  return *this;
}

AffineExpr& AffineExpr::operator+=(const AffineExpr& o) {
  terms.insert(terms.end(), o.terms.begin(), o.terms.end());
  constant += o.constant;
  return normalize();
}

AffineExpr& AffineExpr::operator-=(const AffineExpr& o) {
  for (const auto& [i, c] : o.terms) terms.emplace_back(i, -c);
  constant -= o.constant;
  return normalize();
}

AffineExpr& AffineExpr::operator*=(double s) {
  for (auto& t : terms) t.second *= s;
  constant *= s;
  return normalize();
}

double AffineExpr::evaluate(const Eigen::VectorXd& x) const {
  double v = constant;
  for (const auto& [i, c] : terms) v += c * x(i);
  return v;
}

std::vector<int> MiqpProblem::binaries() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < types.size(); ++i) {
    if (types[i] == VarType::Binary) out.push_back(static_cast<int>(i));
  }
  return out;
}

double MiqpProblem::objective(const Eigen::VectorXd& x) const { return 0.5 * x.dot(H * x) + f.dot(x) + c; }

double MiqpProblem::max_violation(const Eigen::VectorXd& x, bool check_integrality) const {
  double v = 0.0;
  if (A_ineq.rows() > 0) v = std::max(v, (A_ineq * x - b_ineq).maxCoeff());
  if (A_eq.rows() > 0) v = std::max(v, (A_eq * x - b_eq).cwiseAbs().maxCoeff());
  for (int i = 0; i < num_vars(); ++i) {
    v = std::max(v, lb(i) - x(i));
    v = std::max(v, x(i) - ub(i));
    if (check_integrality && types[static_cast<std::size_t>(i)] == VarType::Binary) {
      v = std::max(v, std::abs(x(i) - std::round(x(i))));
    }
  }
  return v;
}

void MiqpProblem::validate() const {
  const int n = num_vars();
  if (H.rows() != n || H.cols() != n || lb.size() != n || ub.size() != n ||
      static_cast<int>(types.size()) != n || A_ineq.cols() != (A_ineq.rows() > 0 ? n : A_ineq.cols()) ||
      A_eq.cols() != (A_eq.rows() > 0 ? n : A_eq.cols()) || b_ineq.size() != A_ineq.rows() ||
      b_eq.size() != A_eq.rows()) {
    throw OptimizerError("problem: inconsistent dimensions");
  }
  if (n > 0 && (H - H.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + H.cwiseAbs().maxCoeff())) {
    throw OptimizerError("problem: Hessian is not symmetric");
  }
  if (n > 0) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
    const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() < -1e-9 * scale) {
      throw OptimizerError("problem: Hessian is not positive semidefinite (min eigenvalue " +
                           std::to_string(es.eigenvalues().minCoeff()) + ")");
    }
  }
  for (int b : binaries()) {
    const bool in_obj = f(b) != 0.0 || H.row(b).cwiseAbs().maxCoeff() > 0.0;
    const bool in_rows = (A_ineq.rows() > 0 && A_ineq.col(b).cwiseAbs().maxCoeff() > 0.0) ||
                         (A_eq.rows() > 0 && A_eq.col(b).cwiseAbs().maxCoeff() > 0.0);
    if (!in_obj && !in_rows) {
      const std::string name = names.empty() ? "x" + std::to_string(b) : names[static_cast<std::size_t>(b)];
      throw OptimizerError("problem: binary " + name + " is unused");
    }
    if (lb(b) < 0.0 || ub(b) > 1.0) throw OptimizerError("problem: binary bounds must lie in [0, 1]");
  }
}

void MiqpProblem::write_lp(std::ostream& out) const {
  const auto var = [&](int i) { return names.empty() ? "x" + std::to_string(i) : names[static_cast<std::size_t>(i)]; };
  const auto term = [&](double c, const std::string& v) {
    out << (c < 0 ? " - " : " + ") << std::abs(c) << ' ' << v;
  };
  out.precision(17);
  out << "\\ objective constant: " << c << "\n";
  out << "Minimize\n obj:";
  for (int i = 0; i < num_vars(); ++i) {
    if (f(i) != 0.0) term(f(i), var(i));
  }
  bool opened = false;
  for (int i = 0; i < num_vars(); ++i) {
    for (int j = i; j < num_vars(); ++j) {
      const double h = i == j ? H(i, i) : 2.0 * H(i, j);
      if (h == 0.0) continue;
      if (!opened) {
        out << " + [";
        opened = true;
      }
      term(h, i == j ? var(i) + " ^ 2" : var(i) + " * " + var(j));
    }
  }
  if (opened) out << " ] / 2";
  out << "\nSubject To\n";
  for (Eigen::Index r = 0; r < A_ineq.rows(); ++r) {
    out << " c" << r << ":";
    for (int i = 0; i < num_vars(); ++i) {
      if (A_ineq(r, i) != 0.0) term(A_ineq(r, i), var(i));
    }
    out << " <= " << b_ineq(r) << '\n';
  }
  for (Eigen::Index r = 0; r < A_eq.rows(); ++r) {
    out << " e" << r << ":";
    for (int i = 0; i < num_vars(); ++i) {
      if (A_eq(r, i) != 0.0) term(A_eq(r, i), var(i));
    }
    out << " = " << b_eq(r) << '\n';
  }
  out << "Bounds\n";
  for (int i = 0; i < num_vars(); ++i) {
    out << ' ';
    if (std::isinf(lb(i))) out << "-inf"; else out << lb(i);
    out << " <= " << var(i) << " <= ";
    if (std::isinf(ub(i))) out << "+inf"; else out << ub(i);
    out << '\n';
  }
  const auto bins = binaries();
  if (!bins.empty()) {
    out << "Binaries\n";
    for (int b : bins) out << ' ' << var(b) << '\n';
  }
  out << "End\n";
}

int ProblemBuilder::add_variable(double lb, double ub, VarType type, std::string name) {
  if (!(lb <= ub)) throw OptimizerError("variable " + name + ": empty bounds");
  if (type == VarType::Binary) {
    lb = std::max(lb, 0.0);
    ub = std::min(ub, 1.0);
  }
  lb_.push_back(lb);
  ub_.push_back(ub);
  types_.push_back(type);
  names_.push_back(std::move(name));
  return static_cast<int>(lb_.size()) - 1;
}

void ProblemBuilder::add_constraint(AffineExpr expr, double lo, double hi) {
  expr.normalize();
  for (const auto& [i, c] : expr.terms) {
    if (i < 0 || i >= num_vars()) throw OptimizerError("constraint references unknown variable " + std::to_string(i));
  }
  if (expr.is_constant()) {
    constexpr double tol = 1e-12;
    if (expr.constant < lo - tol || expr.constant > hi + tol) infeasible_ = true;
    return;
  }
  rows_.push_back({std::move(expr), lo, hi});
}

void ProblemBuilder::set_objective(Eigen::MatrixXd H, Eigen::VectorXd f, double c) {
  if (H.rows() != H.cols() || H.rows() != f.size() || f.size() > num_vars()) {
    throw OptimizerError("objective dimension mismatch");
  }
  H_ = std::move(H);
  f_ = std::move(f);
  c_ = c;
}

std::pair<double, double> ProblemBuilder::range(const AffineExpr& e) const {
  double lo = e.constant, hi = e.constant;
  for (const auto& [i, c] : e.terms) {
    const double a = c * lb_[static_cast<std::size_t>(i)];
    const double b = c * ub_[static_cast<std::size_t>(i)];
    lo += std::min(a, b);
    hi += std::max(a, b);
  }
  return {lo, hi};
}

MiqpProblem ProblemBuilder::build() const {
  const int n = num_vars();
  MiqpProblem p;
  p.H = Eigen::MatrixXd::Zero(n, n);
  p.f = Eigen::VectorXd::Zero(n);
  if (H_.rows() > 0) {
    p.H.topLeftCorner(H_.rows(), H_.cols()) = H_;
    p.f.head(f_.size()) = f_;
  }
  p.c = c_;
  p.lb = Eigen::Map<const Eigen::VectorXd>(lb_.data(), n);
  p.ub = Eigen::Map<const Eigen::VectorXd>(ub_.data(), n);
  p.types = types_;
  p.names = names_;
  p.trivially_infeasible = infeasible_;

  std::size_t n_le = 0, n_eq = 0;
  for (const auto& r : rows_) {
    if (r.lo == r.hi) {
      ++n_eq;
    } else {
      n_le += (std::isfinite(r.hi) ? 1 : 0) + (std::isfinite(r.lo) ? 1 : 0);
    }
  }
  p.A_ineq = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_le), n);
  p.b_ineq = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_le));
  p.A_eq = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_eq), n);
  p.b_eq = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_eq));
  Eigen::Index ie = 0, ii = 0;
  for (const auto& r : rows_) {
    if (r.lo == r.hi) {
      for (const auto& [j, c] : r.expr.terms) p.A_eq(ie, j) += c;
      p.b_eq(ie++) = r.lo - r.expr.constant;
      continue;
    }
    if (std::isfinite(r.hi)) {
      for (const auto& [j, c] : r.expr.terms) p.A_ineq(ii, j) += c;
      p.b_ineq(ii++) = r.hi - r.expr.constant;
    }
    if (std::isfinite(r.lo)) {
      for (const auto& [j, c] : r.expr.terms) p.A_ineq(ii, j) -= c;
      p.b_ineq(ii++) = r.expr.constant - r.lo;
    }
  }
  return p;
}

}  // namespace wws::opt
