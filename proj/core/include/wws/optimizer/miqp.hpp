#pragma once

#include <cstddef>
#include <optional>

#include <Eigen/Core>

#include "wws/optimizer/problem.hpp"
#include "wws/optimizer/qp.hpp"

namespace wws::opt {

struct MiqpOptions {
  /// Absolute optimality gap.
  double gap_tol = 1e-6;
  std::size_t max_binaries = 128;
  std::size_t max_nodes = 200000;
  /// Distance from {0, 1} below which a relaxed binary counts as integral.
  double int_tol = 1e-6;
  /// Candidate assignment; its rounded binaries seed the incumbent when feasible.
  std::optional<Eigen::VectorXd> warm_start;
  QpOptions qp;
};

/// Best-first branch and bound over the binaries with convex-QP relaxations.
/// Branches on the most fractional binary (ties: lowest index); open nodes are
/// ordered by (bound, creation order), so the search is deterministic.
/// Throws OptimizerError when the problem is invalid or has too many binaries.
SolveResult solve_miqp(const MiqpProblem& problem, const MiqpOptions& opts = {});

}  // namespace wws::opt
