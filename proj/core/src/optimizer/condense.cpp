#include "wws/optimizer/condense.hpp"

#include <string>

#include "wws/error.hpp"

namespace wws::opt {

AffineExpr CondensedMaps::output(int i, int first_var) const {
  if (i < 0 || i > Np) throw OptimizerError("output index " + std::to_string(i) + " outside the horizon");
  AffineExpr e(b[static_cast<std::size_t>(i)]);
  const Eigen::RowVectorXd& row = a[static_cast<std::size_t>(i)];
  for (int j = 0; j < Np; ++j) {
    if (row(j) != 0.0) e.terms.emplace_back(first_var + j, row(j));
  }
  return e;
}

CondensedMaps condense(const LinearPredictor& p, const Eigen::VectorXd& z0, int Np, std::span<const double> w_seq,
                       int output_row) {
  if (Np < 1) throw OptimizerError("horizon must be at least one step");
  if (static_cast<int>(w_seq.size()) < Np) throw OptimizerError("disturbance forecast shorter than the horizon");
  if (z0.size() != p.dim()) throw OptimizerError("initial lifted state has the wrong dimension");
  if (output_row < 0 || output_row >= p.C.rows()) throw OptimizerError("output row out of range");

  const Eigen::Index n = p.dim();
  const Eigen::VectorXd drift = p.drift();
  const Eigen::RowVectorXd c = p.C.row(output_row);
  const double offset = p.output_offset()(output_row);

  CondensedMaps m;
  m.Np = Np;
  m.G.reserve(static_cast<std::size_t>(Np) + 1);
  m.g.reserve(static_cast<std::size_t>(Np) + 1);
  m.G.emplace_back(Eigen::MatrixXd::Zero(n, Np));
  m.g.emplace_back(z0);
  for (int i = 0; i < Np; ++i) {
    Eigen::MatrixXd gi = p.A * m.G.back();
    gi.col(i) += p.bu;
    Eigen::VectorXd vi = p.A * m.g.back() + p.bd * w_seq[static_cast<std::size_t>(i)] + drift;
    m.G.push_back(std::move(gi));
    m.g.push_back(std::move(vi));
  }
  for (int i = 0; i <= Np; ++i) {
    m.a.emplace_back(c * m.G[static_cast<std::size_t>(i)]);
    m.b.push_back(c.dot(m.g[static_cast<std::size_t>(i)]) + offset);
  }
  return m;
}

ProblemBuilder build_problem(const CondensedMaps& maps, const CostWeights& w, const HorizonBounds& bounds) {
  if (!(w.Q >= 0.0) || !(w.R >= 0.0)) throw OptimizerError("cost weights must be non-negative");
  if (!(bounds.u_min <= bounds.u_max)) throw OptimizerError("empty input bounds");
  const int Np = maps.Np;
  ProblemBuilder b;
  for (int i = 0; i < Np; ++i) b.add_variable(bounds.u_min, bounds.u_max, VarType::Continuous, "u" + std::to_string(i));

  Eigen::MatrixXd H = 2.0 * w.R * Eigen::MatrixXd::Identity(Np, Np);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(Np);
  double c = 0.0;
  for (int i = 1; i <= Np; ++i) {
    const Eigen::RowVectorXd& a = maps.a[static_cast<std::size_t>(i)];
    const double r = maps.b[static_cast<std::size_t>(i)] - w.reference;
    H.noalias() += 2.0 * w.Q * a.transpose() * a;
    f.noalias() += 2.0 * w.Q * r * a.transpose();
    c += w.Q * r * r;
  }
  H = 0.5 * (H + H.transpose());
  b.set_objective(std::move(H), std::move(f), c);

  if (bounds.z) {
    const auto& [lo, hi] = *bounds.z;
    const Eigen::Index n = maps.g.front().size();
    if (lo.size() != n || hi.size() != n) throw OptimizerError("lifted-state bounds have the wrong dimension");
    for (int i = 1; i <= Np; ++i) {
      const Eigen::MatrixXd& G = maps.G[static_cast<std::size_t>(i)];
      const Eigen::VectorXd& g = maps.g[static_cast<std::size_t>(i)];
      for (Eigen::Index r = 0; r < n; ++r) {
        AffineExpr e(g(r));
        for (int j = 0; j < Np; ++j) {
          if (G(r, j) != 0.0) e.terms.emplace_back(j, G(r, j));
        }
        b.add_constraint(std::move(e), lo(r), hi(r));
      }
    }
  }
  return b;
}

}  // namespace wws::opt
