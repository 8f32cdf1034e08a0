#pragma once

#include <Eigen/Core>

namespace wws {

/// Relative singular-value cutoff used by every pseudo-inverse in the library.
constexpr double kPinvRelativeCutoff = 1e-12;

struct PinvInfo {
  Eigen::Index rank = 0;
  double sigma_max = 0.0;
  /// Smallest singular value kept above the cutoff.
  double sigma_min_kept = 0.0;
  /// sigma_max / sigma_min over all singular values (infinity when singular).
  double condition = 0.0;
  bool rank_deficient = false;
};

/// SVD-based minimum-norm pseudo-inverse with cutoff sigma_max * rel_cutoff.
Eigen::MatrixXd pinv(const Eigen::MatrixXd& m, double rel_cutoff = kPinvRelativeCutoff, PinvInfo* info = nullptr);

/// Computes lhs * pinv(m) without materialising the (possibly very wide) pseudo-inverse.
Eigen::MatrixXd times_pinv(const Eigen::MatrixXd& lhs, const Eigen::MatrixXd& m,
                           double rel_cutoff = kPinvRelativeCutoff, PinvInfo* info = nullptr);

/// Zero-order-hold discretisation of x' = Ac x + B v via the augmented matrix exponential.
/// Returns {Ad, Bd}. Throws PredictorError when the exponential is not finite.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> discretize_zoh(const Eigen::MatrixXd& ac, const Eigen::MatrixXd& b,
                                                           double h);

}  // namespace wws
