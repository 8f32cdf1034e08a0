#pragma once

#include <cstddef>
#include <string>

#include <Eigen/Core>

#include "wws/optimizer/problem.hpp"

namespace wws::opt {

enum class Status { Optimal, Infeasible, IterationLimit };
const char* to_string(Status s);

/// Farkas multipliers proving infeasibility of {A_ineq x <= b_ineq, A_eq x = b_eq, lb <= x <= ub}:
/// A_ineq' ineq + A_eq' eq - lower + upper = 0, ineq, lower, upper >= 0 and
/// b_ineq' ineq + b_eq' eq - lb' lower + ub' upper < 0.
struct Certificate {
  Eigen::VectorXd ineq;
  Eigen::VectorXd eq;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  bool empty() const { return ineq.size() == 0 && eq.size() == 0 && lower.size() == 0; }
};

struct SolveResult {
  Status status = Status::IterationLimit;
  double objective = kInf;
  Eigen::VectorXd x;
  /// Branch-and-bound statistics; a single QP solve reports one node.
  std::size_t nodes = 0;
  double gap = kInf;
  double best_bound = -kInf;
  std::size_t qp_solves = 0;
  int iterations = 0;
  /// Max of stationarity (relative to the gradient), primal and complementarity residuals of the returned point.
  double kkt_residual = kInf;
  bool polished = false;
  Certificate certificate;
  std::string message;
};

struct QpOptions {
  double tol = 1e-10;
  int max_iter = 80;
  /// Phase-1 infeasibility threshold in row-normalised units.
  double feas_tol = 1e-7;
  /// Snap the interior-point solution to the exact solution of its active set when that is valid.
  bool polish = true;
};

/// Convex QP: min 1/2 x'Hx + f'x + c  s.t.  A_ineq x <= b_ineq, A_eq x = b_eq, lb <= x <= ub.
/// Integrality of a MiqpProblem is ignored.
///
/// Variables with lb == ub are substituted out. A phase-1 elastic LP decides feasibility
/// and yields the certificate; phase 2 is a Mehrotra predictor-corrector interior-point
/// method on the remaining variables.
SolveResult solve_qp(const MiqpProblem& qp, const QpOptions& opts = {});
SolveResult solve_qp(const MiqpProblem& qp, const Eigen::VectorXd& lb, const Eigen::VectorXd& ub,
                     const QpOptions& opts = {});

/// Checks the Farkas conditions above to a relative tolerance.
bool verify_certificate(const MiqpProblem& qp, const Eigen::VectorXd& lb, const Eigen::VectorXd& ub,
                        const Certificate& cert, double tol = 1e-7);

}  // namespace wws::opt
