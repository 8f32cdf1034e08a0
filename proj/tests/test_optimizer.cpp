#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "support/generators.hpp"
#include "wws/error.hpp"
#include "wws/mpc.hpp"
#include "wws/optimizer/condense.hpp"
#include "wws/optimizer/miqp.hpp"
#include "wws/optimizer/qp.hpp"
#include "wws/stl/encoder.hpp"
#include "wws/stl/parser.hpp"

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using namespace wws::opt;
using wws::test::random_matrix;
using wws::test::random_miqp;
using wws::test::random_psd;

MiqpProblem continuous_problem(MatrixXd H, VectorXd f, double lb, double ub) {
  MiqpProblem p;
  const auto n = f.size();
  p.H = std::move(H);
  p.f = std::move(f);
  p.A_ineq.resize(0, n);
  p.b_ineq.resize(0);
  p.A_eq.resize(0, n);
  p.b_eq.resize(0);
  p.lb = VectorXd::Constant(n, lb);
  p.ub = VectorXd::Constant(n, ub);
  p.types.assign(static_cast<std::size_t>(n), VarType::Continuous);
  return p;
}

// Independent oracle for small strictly convex QPs: min 1/2 x'Hx + f'x s.t. G x <= g.
// Every subset of rows is tried as the active set; the unique optimum is the one
// whose equality-KKT solution is primal feasible with non-negative multipliers.
struct OracleResult {
  bool found = false;
  VectorXd x;
  double value = 0.0;
};

OracleResult active_set_oracle(const MatrixXd& H, const VectorXd& f, const MatrixXd& G, const VectorXd& g) {
  const Eigen::Index n = H.rows();
  const Eigen::Index m = G.rows();
  OracleResult best;
  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    std::vector<Eigen::Index> act;
    for (Eigen::Index r = 0; r < m; ++r) {
      if (mask & (1u << r)) act.push_back(r);
    }
    if (static_cast<Eigen::Index>(act.size()) > n) continue;
    const auto k = static_cast<Eigen::Index>(act.size());
    MatrixXd K = MatrixXd::Zero(n + k, n + k);
    VectorXd rhs(n + k);
    K.topLeftCorner(n, n) = H;
    rhs.head(n) = -f;
    for (Eigen::Index i = 0; i < k; ++i) {
      K.block(0, n + i, n, 1) = G.row(act[static_cast<std::size_t>(i)]).transpose();
      K.block(n + i, 0, 1, n) = G.row(act[static_cast<std::size_t>(i)]);
      rhs(n + i) = g(act[static_cast<std::size_t>(i)]);
    }
    Eigen::FullPivLU<MatrixXd> lu(K);
    if (lu.rank() < n + k) continue;
    const VectorXd sol = lu.solve(rhs);
    const VectorXd x = sol.head(n);
    if (((G * x - g).array() > 1e-9).any()) continue;
    if ((sol.tail(k).array() < -1e-9).any()) continue;
    best.found = true;
    best.x = x;
    best.value = 0.5 * x.dot(H * x) + f.dot(x);
    return best;
  }
  return best;
}

// Enumeration oracle; every leaf must settle.
double enumerate_optimum(const MiqpProblem& p, VectorXd* best_x = nullptr) {
  const wws::test::Enumeration e = wws::test::enumerate_binaries(p);
  EXPECT_EQ(e.unresolved, 0);
  if (best_x) *best_x = e.x;
  return e.best;
}

// Farkas conditions checked directly on the problem data.
void expect_farkas(const MiqpProblem& p, const Certificate& cert) {
  const Eigen::Index n = p.num_vars();
  VectorXd comb = VectorXd::Zero(n);
  double rhs = 0.0;
  double scale = 0.0;
  if (cert.ineq.size() > 0) {
    ASSERT_EQ(cert.ineq.size(), p.A_ineq.rows());
    EXPECT_GE(cert.ineq.minCoeff(), 0.0);
    comb += p.A_ineq.transpose() * cert.ineq;
    rhs += p.b_ineq.dot(cert.ineq);
    scale = std::max(scale, cert.ineq.cwiseAbs().maxCoeff());
  }
  if (cert.eq.size() > 0) {
    comb += p.A_eq.transpose() * cert.eq;
    rhs += p.b_eq.dot(cert.eq);
    scale = std::max(scale, cert.eq.cwiseAbs().maxCoeff());
  }
  for (Eigen::Index i = 0; i < cert.lower.size(); ++i) {
    EXPECT_GE(cert.lower(i), 0.0);
    if (cert.lower(i) > 0) rhs -= p.lb(i) * cert.lower(i);
    comb(i) -= cert.lower(i);
  }
  for (Eigen::Index i = 0; i < cert.upper.size(); ++i) {
    EXPECT_GE(cert.upper(i), 0.0);
    if (cert.upper(i) > 0) rhs += p.ub(i) * cert.upper(i);
    comb(i) += cert.upper(i);
  }
  ASSERT_GT(scale + (cert.lower.size() ? cert.lower.maxCoeff() : 0.0) + (cert.upper.size() ? cert.upper.maxCoeff() : 0.0),
            0.0);
  EXPECT_LT(comb.cwiseAbs().maxCoeff(), 1e-7 * std::max(1.0, scale));
  EXPECT_LT(rhs, 0.0);
}

// A hand-built predictor of the default lifted dimension with a contracting A.
wws::LinearPredictor random_predictor(std::mt19937_64& rng) {
  wws::LinearPredictor p;
  p.observables = wws::ObservableSet::default_set();
  const Eigen::Index n = p.observables.size();
  p.A = random_matrix(rng, n, n);
  const double rho = Eigen::EigenSolver<MatrixXd>(p.A).eigenvalues().cwiseAbs().maxCoeff();
  p.A *= 0.9 / rho;
  p.bu = random_matrix(rng, n, 1).col(0);
  p.bd = random_matrix(rng, n, 1, 0.1).col(0);
  p.C = random_matrix(rng, 6, n);
  return p;
}

// Hand-built condensed maps for a single-step scalar problem y_1 = y0 + gain * u_0.
CondensedMaps scalar_maps(double y0, double gain) {
  CondensedMaps m;
  m.Np = 1;
  m.G = {MatrixXd::Zero(1, 1), MatrixXd::Constant(1, 1, gain)};
  m.g = {VectorXd::Constant(1, y0), VectorXd::Constant(1, y0)};
  m.a = {Eigen::RowVectorXd::Zero(1), Eigen::RowVectorXd::Constant(1, gain)};
  m.b = {y0, y0};
  return m;
}

TEST(Qp, ClampedScalarExample) {
  // (u - 3)^2 = 1/2 * 2 u^2 - 6 u + 9 with u <= 2.
  MiqpProblem p = continuous_problem(MatrixXd::Constant(1, 1, 2.0), VectorXd::Constant(1, -6.0), -kInf, kInf);
  p.c = 9.0;
  p.A_ineq = MatrixXd::Constant(1, 1, 1.0);
  p.b_ineq = VectorXd::Constant(1, 2.0);
  const SolveResult r = solve_qp(p);
  ASSERT_EQ(r.status, Status::Optimal) << r.message;
  EXPECT_NEAR(r.x(0), 2.0, 1e-9);
  EXPECT_NEAR(r.objective, 1.0, 1e-9);
}

TEST(Qp, BoundOnlyExample) {
  MiqpProblem p = continuous_problem(MatrixXd::Constant(1, 1, 2.0), VectorXd::Constant(1, -6.0), 0.0, 2.0);
  p.c = 9.0;
  const SolveResult r = solve_qp(p);
  ASSERT_EQ(r.status, Status::Optimal);
  EXPECT_NEAR(r.x(0), 2.0, 1e-9);
  EXPECT_NEAR(r.objective, 1.0, 1e-9);
}

TEST(Qp, ContradictoryRowsGiveCertificate) {
  // u >= 1 and u <= 0.
  MiqpProblem p = continuous_problem(MatrixXd::Zero(1, 1), VectorXd::Zero(1), -10.0, 10.0);
  p.A_ineq = (MatrixXd(2, 1) << -1.0, 1.0).finished();
  p.b_ineq = (VectorXd(2) << -1.0, 0.0).finished();
  const SolveResult r = solve_qp(p);
  ASSERT_EQ(r.status, Status::Infeasible);
  EXPECT_TRUE(verify_certificate(p, p.lb, p.ub, r.certificate));
  expect_farkas(p, r.certificate);
}

TEST(Qp, RowAgainstBoxGivesCertificate) {
  // x0 + x1 >= 5 while both lie in [0, 2].
  MiqpProblem p = continuous_problem(MatrixXd::Identity(2, 2), VectorXd::Zero(2), 0.0, 2.0);
  p.A_ineq = (MatrixXd(1, 2) << -1.0, -1.0).finished();
  p.b_ineq = VectorXd::Constant(1, -5.0);
  const SolveResult r = solve_qp(p);
  ASSERT_EQ(r.status, Status::Infeasible);
  EXPECT_TRUE(verify_certificate(p, p.lb, p.ub, r.certificate));
  expect_farkas(p, r.certificate);
}

TEST(Qp, InconsistentEqualitiesGiveCertificate) {
  MiqpProblem p = continuous_problem(MatrixXd::Identity(3, 3), VectorXd::Zero(3), -kInf, kInf);
  p.A_eq = (MatrixXd(2, 3) << 1.0, 1.0, 0.0, 2.0, 2.0, 0.0).finished();
  p.b_eq = (VectorXd(2) << 1.0, 3.0).finished();
  const SolveResult r = solve_qp(p);
  ASSERT_EQ(r.status, Status::Infeasible);
  expect_farkas(p, r.certificate);
}

TEST(Qp, TamperedCertificateIsRejected) {
  MiqpProblem p = continuous_problem(MatrixXd::Zero(1, 1), VectorXd::Zero(1), -10.0, 10.0);
  p.A_ineq = (MatrixXd(2, 1) << -1.0, 1.0).finished();
  p.b_ineq = (VectorXd(2) << -1.0, 0.0).finished();
  Certificate cert = solve_qp(p).certificate;
  ASSERT_TRUE(verify_certificate(p, p.lb, p.ub, cert));
  cert.ineq(0) *= 2.0;
  EXPECT_FALSE(verify_certificate(p, p.lb, p.ub, cert));
}

TEST(Qp, EqualityConstrainedMatchesDenseKkt) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const MatrixXd H = random_psd(rng, 5, 0.1);
    const VectorXd f = random_matrix(rng, 5, 1).col(0);
    MiqpProblem p = continuous_problem(H, f, -kInf, kInf);
    p.A_eq = random_matrix(rng, 2, 5);
    p.b_eq = random_matrix(rng, 2, 1).col(0);

    MatrixXd K = MatrixXd::Zero(7, 7);
    K.topLeftCorner(5, 5) = H;
    K.topRightCorner(5, 2) = p.A_eq.transpose();
    K.bottomLeftCorner(2, 5) = p.A_eq;
    VectorXd rhs(7);
    rhs << -f, p.b_eq;
    const VectorXd expected = K.fullPivLu().solve(rhs).head(5);

    const SolveResult r = solve_qp(p);
    ASSERT_EQ(r.status, Status::Optimal) << "trial " << trial;
    EXPECT_LT((r.x - expected).cwiseAbs().maxCoeff(), 1e-8) << "trial " << trial;
  }
}

TEST(Qp, InequalityQpsMatchActiveSetOracle) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int active_seen = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 3;
    const int m = 2 + trial % 4;
    const MatrixXd H = random_psd(rng, n, 0.05);
    const VectorXd f = random_matrix(rng, n, 1, 5.0).col(0);
    MiqpProblem p = continuous_problem(H, f, -3.0, 3.0);
    const VectorXd x0 = random_matrix(rng, n, 1, 1.0).col(0);
    p.A_ineq = random_matrix(rng, m, n);
    p.b_ineq = p.A_ineq * x0;
    for (int r = 0; r < m; ++r) p.b_ineq(r) += 0.3 * unit(rng);

    MatrixXd G(m + 2 * n, n);
    VectorXd g(m + 2 * n);
    G << p.A_ineq, MatrixXd::Identity(n, n), -MatrixXd::Identity(n, n);
    g << p.b_ineq, VectorXd::Constant(n, 3.0), VectorXd::Constant(n, 3.0);
    const OracleResult o = active_set_oracle(H, f, G, g);
    ASSERT_TRUE(o.found) << "trial " << trial;
    if (((G * o.x - g).array() > -1e-7).any()) ++active_seen;

    const SolveResult r = solve_qp(p);
    ASSERT_EQ(r.status, Status::Optimal) << "trial " << trial << ": " << r.message;
    EXPECT_NEAR(r.objective, o.value, 1e-8 * std::max(1.0, std::abs(o.value))) << "trial " << trial;
    EXPECT_LT((r.x - o.x).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;
    EXPECT_LT(p.max_violation(r.x), 1e-8);
  }
  // The generator must exercise binding constraints, not just interior optima.
  EXPECT_GT(active_seen, 100);
}

TEST(Qp, FixedVariablesAreSubstituted) {
  std::mt19937_64 rng(13);
  const MatrixXd H = random_psd(rng, 4, 0.1);
  const VectorXd f = random_matrix(rng, 4, 1).col(0);
  MiqpProblem p = continuous_problem(H, f, -5.0, 5.0);
  p.lb(1) = p.ub(1) = 0.75;
  p.lb(3) = p.ub(3) = -1.25;
  const SolveResult r = solve_qp(p);
  ASSERT_EQ(r.status, Status::Optimal);
  EXPECT_EQ(r.x(1), 0.75);
  EXPECT_EQ(r.x(3), -1.25);

  // Reduced problem over x0, x2 solved directly.
  const std::vector<int> free = {0, 2};
  MatrixXd Hr(2, 2);
  VectorXd fr(2);
  VectorXd fixed = VectorXd::Zero(4);
  fixed(1) = 0.75;
  fixed(3) = -1.25;
  const VectorXd grad_fixed = H * fixed;
  for (int i = 0; i < 2; ++i) {
    fr(i) = f(free[i]) + grad_fixed(free[i]);
    for (int j = 0; j < 2; ++j) Hr(i, j) = H(free[i], free[j]);
  }
  const VectorXd xr = Hr.ldlt().solve(-fr);
  if ((xr.cwiseAbs().array() < 5.0).all()) {
    EXPECT_NEAR(r.x(0), xr(0), 1e-8);
    EXPECT_NEAR(r.x(2), xr(1), 1e-8);
  }
}

TEST(Qp, CrossedBoundsAreInfeasible) {
  MiqpProblem p = continuous_problem(MatrixXd::Identity(2, 2), VectorXd::Zero(2), 0.0, 1.0);
  p.lb(1) = 2.0;
  EXPECT_EQ(solve_qp(p).status, Status::Infeasible);
}

TEST(Qp, EveryVariableFixed) {
  MiqpProblem p = continuous_problem(MatrixXd::Identity(2, 2), VectorXd::Ones(2), 1.0, 1.0);
  p.A_ineq = MatrixXd::Ones(1, 2);
  p.b_ineq = VectorXd::Constant(1, 3.0);
  const SolveResult ok = solve_qp(p);
  ASSERT_EQ(ok.status, Status::Optimal);
  EXPECT_NEAR(ok.objective, 3.0, 1e-12);
  p.b_ineq(0) = 1.0;
  EXPECT_EQ(solve_qp(p).status, Status::Infeasible);
}

// One leaf of this instance (strictly feasible, slack margin 0.06) used to make the
// predictor-corrector cycle through three values of mu until the iteration limit.
TEST(Qp, ComplementarityDecreasesOnEveryLeaf) {
  std::mt19937_64 rng(777);
  MiqpProblem p;
  for (int i = 0; i <= 119; ++i) p = random_miqp(rng, 1 + i % 4, 1 + i % 12, 2 + i % 6, i % 3 == 0);
  const auto bins = p.binaries();
  int optimal = 0;
  for (unsigned mask = 0; mask < (1u << bins.size()); ++mask) {
    VectorXd lb = p.lb, ub = p.ub;
    for (std::size_t j = 0; j < bins.size(); ++j) lb(bins[j]) = ub(bins[j]) = (mask >> j) & 1u;
    const SolveResult r = solve_qp(p, lb, ub);
    ASSERT_NE(r.status, Status::IterationLimit) << "mask " << mask << ": " << r.message;
    if (r.status == Status::Optimal) {
      EXPECT_LE(r.kkt_residual, 1e-7) << "mask " << mask;
      ++optimal;
    }
  }
  EXPECT_GT(optimal, 0);
}

TEST(Qp, Deterministic) {
  std::mt19937_64 rng(14);
  MiqpProblem p = random_miqp(rng, 6, 0, 5, true);
  const SolveResult a = solve_qp(p);
  const SolveResult b = solve_qp(p);
  ASSERT_EQ(a.status, Status::Optimal);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.objective, b.objective);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Problem, ValidateRejectsBadInput) {
  MiqpProblem p = continuous_problem(MatrixXd::Identity(2, 2), VectorXd::Zero(2), 0.0, 1.0);
  EXPECT_NO_THROW(p.validate());
  MiqpProblem q = p;
  q.H(0, 0) = -1.0;
  EXPECT_THROW(q.validate(), wws::OptimizerError);
  q = p;
  q.H(0, 1) = 0.5;
  EXPECT_THROW(q.validate(), wws::OptimizerError);
  q = p;
  q.types[0] = VarType::Binary;
  q.ub(0) = 2.0;
  EXPECT_THROW(q.validate(), wws::OptimizerError);
  q = p;
  q.H = MatrixXd::Zero(2, 2);
  q.types[1] = VarType::Binary;
  EXPECT_THROW(q.validate(), wws::OptimizerError);
}

TEST(Problem, BuilderRowsAndRanges) {
  ProblemBuilder b;
  const int x = b.add_variable(0.0, 2.0, VarType::Continuous, "x");
  // Binary bounds are clipped to [0, 1].
  const int y = b.add_variable(-1.0, 1.0, VarType::Binary, "y");
  EXPECT_EQ(b.lower(y), 0.0);
  AffineExpr e = AffineExpr::variable(x, 2.0) + AffineExpr::variable(y, -3.0) + AffineExpr(1.0);
  const auto [lo, hi] = b.range(e);
  EXPECT_DOUBLE_EQ(lo, -2.0);
  EXPECT_DOUBLE_EQ(hi, 5.0);
  b.add_constraint(e, 0.0, 4.0);
  b.add_eq(AffineExpr::variable(x) + AffineExpr::variable(x), 1.0);
  b.add_le(AffineExpr(3.0), 1.0);
  EXPECT_TRUE(b.trivially_infeasible());
  b.set_objective(MatrixXd::Identity(2, 2), VectorXd::Zero(2), 0.0);
  const MiqpProblem p = b.build();
  EXPECT_TRUE(p.trivially_infeasible);
  EXPECT_EQ(p.binaries(), std::vector<int>{1});
  EXPECT_EQ(p.A_eq.rows(), 1);
  EXPECT_DOUBLE_EQ(p.A_eq(0, 0), 2.0);
  VectorXd pt(2);
  pt << 0.5, 0.0;
  EXPECT_NEAR(p.max_violation(pt), 0.0, 1e-15);
  pt << 0.5, 0.5;
  EXPECT_NEAR(p.max_violation(pt), 0.5, 1e-15);
}

TEST(Problem, LpDumpNamesEverything) {
  ProblemBuilder b;
  b.add_variable(0.0, 26.5, VarType::Continuous, "u0");
  b.add_variable(0.0, 1.0, VarType::Binary, "phi_p1_0");
  b.add_le(AffineExpr::variable(0) + AffineExpr::variable(1, -26.5), 0.0);
  b.set_objective(MatrixXd::Identity(2, 2), VectorXd::Ones(2), 0.0);
  std::ostringstream out;
  b.build().write_lp(out);
  const std::string lp = out.str();
  for (const char* token : {"Minimize", "Subject To", "Bounds", "u0", "phi_p1_0", "End"}) {
    EXPECT_NE(lp.find(token), std::string::npos) << token;
  }
}

TEST(Miqp, MatchesEnumeration) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const int n_bin = 1 + trial % 9;
    const MiqpProblem p = random_miqp(rng, 2 + trial % 3, n_bin, 3 + trial % 4, trial % 2 == 0);
    const double expected = enumerate_optimum(p);
    const SolveResult r = solve_miqp(p);
    ASSERT_EQ(r.status, Status::Optimal) << "trial " << trial << ": " << r.message;
    EXPECT_NEAR(r.objective, expected, 1e-6 * std::max(1.0, std::abs(expected))) << "trial " << trial;
    EXPECT_LT(p.max_violation(r.x), 1e-7);
    EXPECT_NEAR(p.objective(r.x), r.objective, 1e-9 * std::max(1.0, std::abs(r.objective)));
    EXPECT_LE(r.best_bound, r.objective + 1e-9);
  }
}

TEST(Miqp, RelaxationBoundsTheIntegerOptimum) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const MiqpProblem p = random_miqp(rng, 3, 4, 4, false);
    const SolveResult relaxed = solve_qp(p);
    const SolveResult integer = solve_miqp(p);
    ASSERT_EQ(relaxed.status, Status::Optimal);
    ASSERT_EQ(integer.status, Status::Optimal);
    EXPECT_LE(relaxed.objective, integer.objective + 1e-9);
  }
}

TEST(Miqp, FixedBinariesReduceToTheQp) {
  std::mt19937_64 rng(23);
  MiqpProblem p = random_miqp(rng, 3, 4, 4, false);
  VectorXd x_enum;
  enumerate_optimum(p, &x_enum);
  for (int i : p.binaries()) p.lb(i) = p.ub(i) = std::round(x_enum(i));
  const SolveResult m = solve_miqp(p);
  const SolveResult q = solve_qp(p);
  ASSERT_EQ(m.status, Status::Optimal);
  ASSERT_EQ(q.status, Status::Optimal);
  EXPECT_NEAR(m.objective, q.objective, 1e-9 * std::max(1.0, std::abs(q.objective)));
  EXPECT_LE(m.nodes, 1u);
}

TEST(Miqp, InfeasibleIntegerProblem) {
  // b0 + b1 = 1.5 has a continuous solution but no integral one.
  MiqpProblem p = continuous_problem(MatrixXd::Identity(2, 2), VectorXd::Zero(2), 0.0, 1.0);
  p.types = {VarType::Binary, VarType::Binary};
  p.A_eq = MatrixXd::Ones(1, 2);
  p.b_eq = VectorXd::Constant(1, 1.5);
  const SolveResult r = solve_miqp(p);
  EXPECT_EQ(r.status, Status::Infeasible);
  EXPECT_EQ(solve_qp(p).status, Status::Optimal);
}

TEST(Miqp, DeterministicAndWarmStartInvariant) {
  std::mt19937_64 rng(24);
  const MiqpProblem p = random_miqp(rng, 3, 8, 5, true);
  const SolveResult a = solve_miqp(p);
  const SolveResult b = solve_miqp(p);
  ASSERT_EQ(a.status, Status::Optimal);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.nodes, b.nodes);

  MiqpOptions warm;
  warm.warm_start = a.x;
  const SolveResult c = solve_miqp(p, warm);
  ASSERT_EQ(c.status, Status::Optimal);
  EXPECT_NEAR(c.objective, a.objective, 1e-6 * std::max(1.0, std::abs(a.objective)));
}

TEST(Miqp, TooManyBinariesThrows) {
  std::mt19937_64 rng(25);
  const MiqpProblem p = random_miqp(rng, 1, 5, 2, false);
  MiqpOptions opts;
  opts.max_binaries = 4;
  EXPECT_THROW(solve_miqp(p, opts), wws::OptimizerError);
}

TEST(Miqp, NodeLimitIsReportedNotHidden) {
  std::mt19937_64 rng(26);
  const MiqpProblem p = random_miqp(rng, 2, 10, 6, false);
  MiqpOptions opts;
  opts.max_nodes = 1;
  opts.warm_start.reset();
  const SolveResult r = solve_miqp(p, opts);
  if (r.status == Status::Optimal) {
    EXPECT_LE(r.gap, opts.gap_tol);
  } else {
    EXPECT_EQ(r.status, Status::IterationLimit);
  }
}

TEST(Miqp, InputBandSelectsTheOffBranch) {
  // y_1 = 40 + 0.5 u_0: the reference is met with the heater off, so the near-zero band wins.
  const CondensedMaps maps = scalar_maps(40.0, 0.5);
  ProblemBuilder b = build_problem(maps, CostWeights{1.0, 10.0, 40.0}, HorizonBounds{0.0, 26.5, std::nullopt});
  wws::stl::SymbolicSignal s;
  s.set("u", 0, AffineExpr::variable(0));
  wws::stl::EncodingConfig cfg;
  cfg.end_time = 0.0;
  cfg.availability = wws::stl::Availability::Defer;
  const auto stats = wws::stl::encode(wws::stl::parse(wws::kInputSpec), s, 0, b, cfg);
  EXPECT_EQ(stats.binaries, 4u);
  const MiqpProblem p = b.build();
  const SolveResult r = solve_miqp(p);
  ASSERT_EQ(r.status, Status::Optimal) << r.message;
  EXPECT_GT(r.x(0), 0.001);
  EXPECT_LT(r.x(0), 0.0011);
  EXPECT_NEAR(r.objective, enumerate_optimum(p), 1e-8);
}

TEST(Miqp, InputBandSelectsTheRunningBranch) {
  // y_1 = 30 + 0.5 u_0 needs u_0 = 20 unconstrained; with R = 0.1 the running band is cheaper.
  const CondensedMaps maps = scalar_maps(30.0, 0.5);
  ProblemBuilder b = build_problem(maps, CostWeights{1.0, 0.1, 40.0}, HorizonBounds{0.0, 26.5, std::nullopt});
  wws::stl::SymbolicSignal s;
  s.set("u", 0, AffineExpr::variable(0));
  wws::stl::EncodingConfig cfg;
  cfg.end_time = 0.0;
  cfg.availability = wws::stl::Availability::Defer;
  wws::stl::encode(wws::stl::parse(wws::kInputSpec), s, 0, b, cfg);
  const SolveResult r = solve_miqp(b.build());
  ASSERT_EQ(r.status, Status::Optimal);
  EXPECT_NEAR(r.x(0), 21.2, 1e-6);
}

TEST(Condense, SingleStep) {
  std::mt19937_64 rng(31);
  const wws::LinearPredictor p = random_predictor(rng);
  const VectorXd z0 = random_matrix(rng, p.dim(), 1).col(0);
  const std::vector<double> w = {7.0};
  const CondensedMaps m = condense(p, z0, 1, w);
  ASSERT_EQ(m.G.size(), 2u);
  EXPECT_EQ(m.G[0], MatrixXd::Zero(p.dim(), 1));
  EXPECT_EQ(m.g[0], z0);
  EXPECT_LT((m.G[1].col(0) - p.bu).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((m.g[1] - (p.A * z0 + 7.0 * p.bd)).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_NEAR(m.b[0], p.C.row(4).dot(z0), 1e-13);
}

TEST(Condense, IntegratorIsARunningSum) {
  wws::LinearPredictor p;
  p.observables = wws::ObservableSet::default_set();
  const Eigen::Index n = p.observables.size();
  p.A = MatrixXd::Identity(n, n);
  p.bu = VectorXd::Unit(n, 0);
  p.bd = VectorXd::Zero(n);
  p.C = MatrixXd::Zero(6, n);
  p.C(4, 0) = 1.0;
  VectorXd z0 = VectorXd::Zero(n);
  z0(0) = 3.0;
  const std::vector<double> w(5, 10.0);
  const CondensedMaps m = condense(p, z0, 5, w);
  for (int i = 0; i <= 5; ++i) {
    EXPECT_EQ(m.b[static_cast<std::size_t>(i)], 3.0);
    for (int j = 0; j < 5; ++j) EXPECT_EQ(m.a[static_cast<std::size_t>(i)](j), j < i ? 1.0 : 0.0) << i << "," << j;
  }
  const AffineExpr y3 = m.output(3, 2);
  ASSERT_EQ(y3.terms.size(), 3u);
  EXPECT_EQ(y3.terms[0].first, 2);
  EXPECT_EQ(y3.constant, 3.0);
  EXPECT_THROW(m.output(6), wws::OptimizerError);
}

TEST(Condense, MatchesExplicitRollout) {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> ud(0.0, 26.5);
  std::uniform_real_distribution<double> wd(5.0, 15.0);
  for (int trial = 0; trial < 20; ++trial) {
    const wws::LinearPredictor p = random_predictor(rng);
    const VectorXd z0 = random_matrix(rng, p.dim(), 1).col(0);
    std::vector<double> w(10);
    VectorXd u(10);
    for (int i = 0; i < 10; ++i) {
      w[static_cast<std::size_t>(i)] = wd(rng);
      u(i) = ud(rng);
    }
    const CondensedMaps m = condense(p, z0, 10, w);
    VectorXd z = z0;
    for (int i = 0; i <= 10; ++i) {
      const VectorXd zc = m.G[static_cast<std::size_t>(i)] * u + m.g[static_cast<std::size_t>(i)];
      const double scale = std::max(1.0, z.cwiseAbs().maxCoeff());
      EXPECT_LT((zc - z).cwiseAbs().maxCoeff(), 1e-10 * scale) << "trial " << trial << " step " << i;
      const double y = p.C.row(4).dot(z);
      EXPECT_NEAR(m.output(i).evaluate(u), y, 1e-10 * std::max(1.0, std::abs(y)));
      if (i < 10) z = p.next(z, u(i), w[static_cast<std::size_t>(i)]);
    }
  }
}

TEST(Condense, RejectsBadArguments) {
  std::mt19937_64 rng(33);
  const wws::LinearPredictor p = random_predictor(rng);
  const VectorXd z0 = VectorXd::Zero(p.dim());
  const std::vector<double> w(3, 10.0);
  EXPECT_THROW(condense(p, z0, 0, w), wws::OptimizerError);
  EXPECT_THROW(condense(p, z0, 4, w), wws::OptimizerError);
  EXPECT_THROW(condense(p, VectorXd::Zero(3), 3, w), wws::OptimizerError);
  EXPECT_THROW(condense(p, z0, 3, w, 6), wws::OptimizerError);
}

TEST(Condense, HessianIsPositiveSemidefinite) {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 10; ++trial) {
    const wws::LinearPredictor p = random_predictor(rng);
    const std::vector<double> w(10, 10.0);
    const CondensedMaps m = condense(p, random_matrix(rng, p.dim(), 1).col(0), 10, w);
    for (double R : {0.0, 10.0}) {
      const MiqpProblem prob = build_problem(m, CostWeights{1.0, R, 40.0}, HorizonBounds{}).build();
      EXPECT_TRUE(prob.H.isApprox(prob.H.transpose(), 0.0));
      const VectorXd ev = Eigen::SelfAdjointEigenSolver<MatrixXd>(prob.H).eigenvalues();
      EXPECT_GE(ev.minCoeff(), -1e-9 * std::max(1.0, ev.maxCoeff()));
      EXPECT_NO_THROW(prob.validate());
    }
  }
}

TEST(Condense, ObjectiveMatchesDirectCost) {
  std::mt19937_64 rng(35);
  const wws::LinearPredictor p = random_predictor(rng);
  const std::vector<double> w(6, 10.0);
  const VectorXd z0 = random_matrix(rng, p.dim(), 1).col(0);
  const CondensedMaps m = condense(p, z0, 6, w);
  const CostWeights cw{2.0, 3.0, 40.0};
  const MiqpProblem prob = build_problem(m, cw, HorizonBounds{}).build();
  const VectorXd u = random_matrix(rng, 6, 1, 20.0).col(0);
  double direct = 0.0;
  for (int i = 0; i < 6; ++i) {
    const double y = m.output(i + 1).evaluate(u);
    direct += cw.Q * (y - 40.0) * (y - 40.0) + cw.R * u(i) * u(i);
  }
  EXPECT_NEAR(prob.objective(u), direct, 1e-9 * direct);
}

TEST(Condense, TrackingOptimumReachesTheReference) {
  const CondensedMaps maps = scalar_maps(0.0, 1.0);
  const MiqpProblem p = build_problem(maps, CostWeights{1.0, 0.0, 40.0}, HorizonBounds{0.0, 100.0, std::nullopt}).build();
  const SolveResult r = solve_qp(p);
  ASSERT_EQ(r.status, Status::Optimal);
  EXPECT_NEAR(r.x(0), 40.0, 1e-8);
  EXPECT_NEAR(r.objective, 0.0, 1e-8);
}

// The condensed QP and the QP with explicit lifted states and dynamics equalities
// describe the same problem, so their optima coincide.
TEST(Condense, MatchesExplicitStateFormulation) {
  std::mt19937_64 rng(36);
  const int Np = 4;
  for (int trial = 0; trial < 8; ++trial) {
    wws::LinearPredictor p = random_predictor(rng);
    p.C.row(4) *= 5.0;
    const Eigen::Index n = p.dim();
    const VectorXd z0 = random_matrix(rng, n, 1).col(0);
    const std::vector<double> w(Np, 10.0);
    const CostWeights cw{1.0, 0.01, 4.0};
    const HorizonBounds hb{0.0, 1.0, std::nullopt};
    const SolveResult condensed = solve_qp(build_problem(condense(p, z0, Np, w), cw, hb).build());
    ASSERT_EQ(condensed.status, Status::Optimal);

    // Variables: u_0..u_{Np-1}, then z_1..z_Np.
    const Eigen::Index nv = Np + Np * n;
    const auto zi = [&](int i) { return Np + (i - 1) * n; };
    MiqpProblem e = continuous_problem(MatrixXd::Zero(nv, nv), VectorXd::Zero(nv), -kInf, kInf);
    e.lb.head(Np).setConstant(0.0);
    e.ub.head(Np).setConstant(1.0);
    const Eigen::RowVectorXd c = p.C.row(4);
    for (int i = 0; i < Np; ++i) {
      e.H(i, i) += 2.0 * cw.R;
      const Eigen::Index o = zi(i + 1);
      e.H.block(o, o, n, n) += 2.0 * cw.Q * c.transpose() * c;
      e.f.segment(o, n) += -2.0 * cw.Q * cw.reference * c.transpose();
      e.c += cw.Q * cw.reference * cw.reference;
    }
    e.A_eq = MatrixXd::Zero(Np * n, nv);
    e.b_eq = VectorXd::Zero(Np * n);
    for (int i = 0; i < Np; ++i) {
      const Eigen::Index r = i * n;
      e.A_eq.block(r, zi(i + 1), n, n) = MatrixXd::Identity(n, n);
      e.A_eq.block(r, i, n, 1) = -p.bu;
      if (i == 0) {
        e.b_eq.segment(r, n) = p.A * z0 + p.bd * w[0];
      } else {
        e.A_eq.block(r, zi(i), n, n) = -p.A;
        e.b_eq.segment(r, n) = p.bd * w[static_cast<std::size_t>(i)];
      }
    }
    const SolveResult expl = solve_qp(e);
    ASSERT_EQ(expl.status, Status::Optimal) << expl.message;
    EXPECT_NEAR(condensed.objective, expl.objective, 1e-6 * std::max(1.0, std::abs(expl.objective)))
        << "trial " << trial;
    EXPECT_LT((condensed.x - expl.x.head(Np)).cwiseAbs().maxCoeff(), 1e-5) << "trial " << trial;
  }
}

}  // namespace
