#include "wws/linalg.hpp"

#include <limits>

#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

#include "wws/error.hpp"

namespace wws {
namespace {

struct ThinSvd {
  Eigen::MatrixXd U;
  Eigen::VectorXd S;
  Eigen::MatrixXd V;
};

ThinSvd thin_svd(const Eigen::MatrixXd& m) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

Eigen::VectorXd inverted_singular_values(const Eigen::VectorXd& s, double rel_cutoff, PinvInfo* info) {
  const double smax = s.size() > 0 ? s.maxCoeff() : 0.0;
  const double cutoff = smax * rel_cutoff;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  Eigen::Index rank = 0;
  double smin_kept = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) {
      inv(i) = 1.0 / s(i);
      ++rank;
      smin_kept = smin_kept == 0.0 ? s(i) : std::min(smin_kept, s(i));
    }
  }
  if (info != nullptr) {
    info->rank = rank;
    info->sigma_max = smax;
    info->sigma_min_kept = smin_kept;
    const double smin = s.size() > 0 ? s.minCoeff() : 0.0;
    info->condition = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    info->rank_deficient = rank < s.size();
  }
  return inv;
}

}  // namespace

Eigen::MatrixXd pinv(const Eigen::MatrixXd& m, double rel_cutoff, PinvInfo* info) {
  if (m.size() == 0) return Eigen::MatrixXd::Zero(m.cols(), m.rows());
  const ThinSvd svd = thin_svd(m);
  const Eigen::VectorXd inv = inverted_singular_values(svd.S, rel_cutoff, info);
  return svd.V * inv.asDiagonal() * svd.U.transpose();
}

Eigen::MatrixXd times_pinv(const Eigen::MatrixXd& lhs, const Eigen::MatrixXd& m, double rel_cutoff, PinvInfo* info) {
  if (lhs.cols() != m.cols()) throw Error("times_pinv: column count mismatch");
  // m = U S V^T  =>  lhs * pinv(m) = (lhs V) S^+ U^T
  const ThinSvd svd = thin_svd(m);
  const Eigen::VectorXd inv = inverted_singular_values(svd.S, rel_cutoff, info);
  return (lhs * svd.V) * inv.asDiagonal() * svd.U.transpose();
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> discretize_zoh(const Eigen::MatrixXd& ac, const Eigen::MatrixXd& b,
                                                           double h) {
  const Eigen::Index n = ac.rows();
  const Eigen::Index m = b.cols();
  if (ac.cols() != n || b.rows() != n) throw PredictorError("discretize_zoh: dimension mismatch");
  if (!(h > 0.0)) throw PredictorError("discretize_zoh: h must be positive");
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = ac * h;
  aug.topRightCorner(n, m) = b * h;
  const Eigen::MatrixXd e = aug.exp();
  if (!e.allFinite()) throw PredictorError("matrix exponential did not converge (non-finite result)");
  return {e.topLeftCorner(n, n), e.topRightCorner(n, m)};
}

}  // namespace wws
