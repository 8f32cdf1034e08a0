#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "wws/optimizer/problem.hpp"
#include "wws/predictor.hpp"

namespace wws::opt {

/// z_i = G_i u + g_i and y_i = a_i u + b_i for i = 0..Np, with u = (u_0..u_{Np-1}).
struct CondensedMaps {
  int Np = 0;
  std::vector<Eigen::MatrixXd> G;
  std::vector<Eigen::VectorXd> g;
  std::vector<Eigen::RowVectorXd> a;
  std::vector<double> b;

  /// y_i as an affine expression over decision variables first_var .. first_var + Np - 1.
  AffineExpr output(int i, int first_var = 0) const;
};

/// Forward substitution of the lifted dynamics: G_0 = 0, g_0 = z0,
/// G_{i+1} = A G_i + bu e_i',  g_{i+1} = A g_i + bd w_i + drift.
/// The output row is `output_row` (0-based) of the reconstruction C z + offset.
CondensedMaps condense(const LinearPredictor& p, const Eigen::VectorXd& z0, int Np, std::span<const double> w_seq,
                       int output_row = 4);

struct CostWeights {
  double Q = 1.0;
  double R = 10.0;
  double reference = 40.0;
};

struct HorizonBounds {
  double u_min = 0.0;
  double u_max = 26.5;
  /// Bounds on z_1..z_Np; absent disables the lifted-state rows.
  std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>> z;
};

/// Creates u_0..u_{Np-1} as variables 0..Np-1 of a fresh builder, sets
/// sum_{i<Np} Q (y_{i+1} - ref)^2 + R u_i^2 as the objective and adds the box and lifted-state rows.
/// Further constraints (the STL encoding) are added by the caller.
ProblemBuilder build_problem(const CondensedMaps& maps, const CostWeights& w, const HorizonBounds& bounds);

}  // namespace wws::opt
