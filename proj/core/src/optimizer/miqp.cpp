#include "wws/optimizer/miqp.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

#include "wws/error.hpp"

namespace wws::opt {
namespace {

struct Node {
  double bound;
  std::size_t seq;
  Eigen::VectorXd lb;
  Eigen::VectorXd ub;
  Eigen::VectorXd x;
};

struct WorseFirst {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.seq > b.seq;
  }
};

}  // namespace

SolveResult solve_miqp(const MiqpProblem& problem, const MiqpOptions& opts) {
  problem.validate();
  const std::vector<int> bins = problem.binaries();
  if (bins.size() > opts.max_binaries) {
    throw OptimizerError("problem has " + std::to_string(bins.size()) + " binaries, limit is " +
                         std::to_string(opts.max_binaries));
  }

  SolveResult out;
  out.status = Status::Infeasible;
  std::size_t seq = 0;
  // Relaxations that neither converged nor proved infeasibility leave their subtree unexplored.
  std::size_t unresolved = 0;
  double incumbent = kInf;
  Eigen::VectorXd best;

  const auto relax = [&](const Eigen::VectorXd& lb, const Eigen::VectorXd& ub) {
    SolveResult r = solve_qp(problem, lb, ub, opts.qp);
    ++out.qp_solves;
    out.iterations += r.iterations;
    return r;
  };

  // Re-solves with every binary fixed at its rounded value and records an improvement.
  const auto try_integral = [&](const Eigen::VectorXd& x, Eigen::VectorXd lb, Eigen::VectorXd ub) {
    for (int b : bins) {
      const double v = std::round(std::clamp(x(b), 0.0, 1.0));
      if (v < lb(b) || v > ub(b)) return Status::Infeasible;
      lb(b) = ub(b) = v;
    }
    const SolveResult r = relax(lb, ub);
    if (r.status == Status::Optimal && r.objective < incumbent) {
      incumbent = r.objective;
      best = r.x;
    }
    return r.status;
  };

  if (opts.warm_start && opts.warm_start->size() == problem.num_vars()) {
    try_integral(*opts.warm_start, problem.lb, problem.ub);
  }

  std::priority_queue<Node, std::vector<Node>, WorseFirst> open;
  bool limit_hit = false;
  {
    const SolveResult root = relax(problem.lb, problem.ub);
    ++out.nodes;
    if (root.status == Status::Infeasible) {
      out.certificate = root.certificate;
      out.message = root.message;
      out.best_bound = kInf;
      return out;
    }
    if (root.status == Status::Optimal) {
      open.push({root.objective, seq++, problem.lb, problem.ub, root.x});
    } else {
      limit_hit = true;
      out.message = "root relaxation: " + root.message;
    }
  }

  while (!open.empty()) {
    if (open.top().bound >= incumbent - opts.gap_tol) break;
    if (out.nodes >= opts.max_nodes) {
      limit_hit = true;
      break;
    }
    Node node = open.top();
    open.pop();

    int branch = -1;
    double frac_best = opts.int_tol;
    for (int b : bins) {
      const double frac = std::abs(node.x(b) - std::round(node.x(b)));
      if (frac > frac_best) {
        frac_best = frac;
        branch = b;
      }
    }
    if (branch < 0) {
      if (try_integral(node.x, node.lb, node.ub) == Status::IterationLimit) ++unresolved;
      continue;
    }

    for (const double v : {0.0, 1.0}) {
      Node child{0.0, seq++, node.lb, node.ub, {}};
      child.lb(branch) = child.ub(branch) = v;
      const SolveResult r = relax(child.lb, child.ub);
      ++out.nodes;
      if (r.status == Status::IterationLimit) ++unresolved;
      if (r.status != Status::Optimal) continue;
      if (r.objective >= incumbent - opts.gap_tol) continue;
      child.bound = std::max(r.objective, node.bound);
      child.x = r.x;
      open.push(std::move(child));
    }
  }

  if (unresolved > 0) {
    limit_hit = true;
    out.message += std::to_string(unresolved) + " node relaxations did not converge";
  }
  double bound = incumbent;
  if (!open.empty()) bound = std::min(bound, open.top().bound);
  out.best_bound = bound;
  if (std::isfinite(incumbent)) {
    out.x = best;
    out.objective = incumbent;
    out.gap = incumbent - bound;
    out.status = limit_hit ? Status::IterationLimit : Status::Optimal;
    if (limit_hit) out.message = "search incomplete, returning the incumbent. " + out.message;
    return out;
  }
  out.status = limit_hit ? Status::IterationLimit : Status::Infeasible;
  if (limit_hit) out.message = "search incomplete without an incumbent. " + out.message;
  return out;
}

}  // namespace wws::opt
