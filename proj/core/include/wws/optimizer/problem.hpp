#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace wws::opt {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Sparse affine expression sum_j c_j x_j + constant over problem variables.
struct AffineExpr {
  std::vector<std::pair<int, double>> terms;
  double constant = 0.0;

  AffineExpr() = default;
  explicit AffineExpr(double c) : constant(c) {}
  static AffineExpr variable(int index, double coef = 1.0) {
    AffineExpr e;
    e.terms.emplace_back(index, coef);
    return e;
  }

  bool is_constant() const { return terms.empty(); }
  /// Merges duplicate indices and drops zero coefficients.
  AffineExpr& normalize();

  AffineExpr& operator+=(const AffineExpr& o);
  AffineExpr& operator-=(const AffineExpr& o);
  AffineExpr& operator*=(double s);
  friend AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
  friend AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a -= b; }
  friend AffineExpr operator*(double s, AffineExpr a) { return a *= s; }

  double evaluate(const Eigen::VectorXd& x) const;
};

enum class VarType { Continuous, Binary };

/// min 1/2 x'Hx + f'x + c  s.t.  A_ineq x <= b_ineq,  A_eq x = b_eq,  lb <= x <= ub,  x_i in {0,1} for binaries.
struct MiqpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd f;
  double c = 0.0;
  Eigen::MatrixXd A_ineq;
  Eigen::VectorXd b_ineq;
  Eigen::MatrixXd A_eq;
  Eigen::VectorXd b_eq;
  Eigen::VectorXd lb;
  Eigen::VectorXd ub;
  std::vector<VarType> types;
  std::vector<std::string> names;
  /// Set when a constraint with no variables was violated while building.
  bool trivially_infeasible = false;

  int num_vars() const { return static_cast<int>(f.size()); }
  std::vector<int> binaries() const;

  double objective(const Eigen::VectorXd& x) const;
  /// Largest violation of rows, bounds and integrality at x.
  double max_violation(const Eigen::VectorXd& x, bool check_integrality = true) const;

  /// Checks dimensions, symmetric PSD Hessian and that every binary is used.
  void validate() const;

  /// CPLEX-LP-style text dump for cross-checking with external solvers.
  void write_lp(std::ostream& out) const;
};

/// Incremental construction of a MiqpProblem with ranged rows lo <= expr <= hi.
class ProblemBuilder {
 public:
  int add_variable(double lb, double ub, VarType type, std::string name);
  int num_vars() const { return static_cast<int>(lb_.size()); }
  double lower(int i) const { return lb_[static_cast<std::size_t>(i)]; }
  double upper(int i) const { return ub_[static_cast<std::size_t>(i)]; }
  VarType type(int i) const { return types_[static_cast<std::size_t>(i)]; }
  const std::string& name(int i) const { return names_[static_cast<std::size_t>(i)]; }

  void add_constraint(AffineExpr expr, double lo, double hi);
  void add_le(AffineExpr expr, double hi) { add_constraint(std::move(expr), -kInf, hi); }
  void add_ge(AffineExpr expr, double lo) { add_constraint(std::move(expr), lo, kInf); }
  void add_eq(AffineExpr expr, double value) { add_constraint(std::move(expr), value, value); }
  std::size_t num_constraints() const { return rows_.size(); }

  /// Objective over the variables created so far (later variables get zero cost).
  void set_objective(Eigen::MatrixXd H, Eigen::VectorXd f, double c);

  /// Interval of an affine expression over the variable boxes.
  std::pair<double, double> range(const AffineExpr& e) const;

  bool trivially_infeasible() const { return infeasible_; }

  MiqpProblem build() const;

 private:
  struct Row {
    AffineExpr expr;
    double lo;
    double hi;
  };
  std::vector<double> lb_, ub_;
  std::vector<VarType> types_;
  std::vector<std::string> names_;
  std::vector<Row> rows_;
  Eigen::MatrixXd H_;
  Eigen::VectorXd f_;
  double c_ = 0.0;
  bool infeasible_ = false;
};

}  // namespace wws::opt
