#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "wws/plant.hpp"
#include "wws/predictor.hpp"

namespace {

using wws::State;

// Coefficient table typed in by hand, independent of the bundled data file.
constexpr std::array<double, 42> kTable = {
    -9.8e-2, 4.0e-2,  9.8e-2,  3.8,     -2.4e2,  2.4e2,   3.0e-2,  -3.0e3,  1.1,     -1.7e-3, 1.7e-3,
    -6.0e-6, 6.0e-6,  -3.0e-6, 3.0e-6,  3.0e3,   1.1,     -2.0e3,  1.1,     1.7e-3,  -3.4e-3, 1.7e-3,
    6.0e-6,  -6.0e-6, -6.0e-6, 6.0e-6,  3.0e-6,  -6.0e-6, 3.0e-6,  2.0e3,   1.1,     -3.0e3,  1.7e-3,
    -1.7e-3, 6.0e-6,  -6.0e-6, 3.0e-6,  -3.0e-6, 3.0e3,   3.8,     -2.4e2,  2.4e2};

// Term-by-term evaluation of the six polynomials, written out independently of the library.
State reference_field(const std::array<double, 42>& a, const State& x, double u, double w) {
  const auto c = [&](int i) { return a[static_cast<std::size_t>(i - 1)]; };
  const double x1 = x(0), x2 = x(1), x3 = x(2), x4 = x(3), x5 = x(4), x6 = x(5);
  State f;
  f(0) = c(1) * x1 + c(2) * x6 + c(3) * u;
  f(1) = c(4) * x1 + c(5) * x2 + c(6) * w;
  f(2) = c(7) * x2 + c(8) * x3 + c(9) * x4 + c(10) * x3 * x3 + c(11) * x4 * x4 + c(12) * x3 * x3 * x4 +
         c(13) * x3 * x4 * x4 + c(14) * x3 * x3 * x3 + c(15) * x4 * x4 * x4 + c(16) * w;
  f(3) = c(17) * x3 + c(18) * x4 + c(19) * x5 + c(20) * x3 * x3 + c(21) * x4 * x4 + c(22) * x5 * x5 +
         c(23) * x3 * x3 * x4 + c(24) * x3 * x4 * x4 + c(25) * x4 * x4 * x5 + c(26) * x4 * x5 * x5 +
         c(27) * x3 * x3 * x3 + c(28) * x4 * x4 * x4 + c(29) * x5 * x5 * x5 + c(30) * w;
  f(4) = c(31) * x4 + c(32) * x5 + c(33) * x4 * x4 + c(34) * x5 * x5 + c(35) * x4 * x4 * x5 + c(36) * x4 * x5 * x5 +
         c(37) * x4 * x4 * x4 + c(38) * x5 * x5 * x5 + c(39) * w;
  f(5) = c(40) * x5 + c(41) * x6 + c(42) * w;
  return f;
}

State random_state(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  State x;
  for (int i = 0; i < 6; ++i) x(i) = d(rng);
  return x;
}

double rel_err(const State& a, const State& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

const wws::PlantModel& model() {
  static const wws::PlantModel m = wws::PlantModel::tabulated();
  return m;
}

TEST(Plant, BundledTableMatchesTypedTable) {
  for (std::size_t i = 0; i < 42; ++i) EXPECT_EQ(model().a[i], kTable[i]) << "a" << i + 1;
  EXPECT_EQ(model().output_index, 5);
}

TEST(Plant, DataFileIsBitEqualToBuiltInTable) {
  const wws::PlantModel file = wws::PlantModel::load(std::string(WWS_DATA_DIR) + "/plant_tabulated.json");
  EXPECT_EQ(file.a, model().a);
  EXPECT_EQ(file.output_index, 5);
}

TEST(Plant, JsonRoundTrip) {
  const auto back = wws::PlantModel::from_json(model().to_json());
  EXPECT_EQ(back.a, model().a);
}

TEST(Plant, RejectsMalformedCoefficientFile) {
  nlohmann::json doc = model().to_json();
  doc["a"].erase(doc["a"].begin());
  EXPECT_THROW(wws::PlantModel::from_json(doc), wws::ConfigError);
  doc = model().to_json();
  doc["output_index"] = 7;
  EXPECT_THROW(wws::PlantModel::from_json(doc), wws::ConfigError);
}

TEST(PlantField, ZeroIsAnEquilibriumOfTheUnforcedField) {
  EXPECT_EQ(wws::vector_field(model(), State::Zero(), 0.0, 0.0), State::Zero());
}

TEST(PlantField, AllOnesUnforced) {
  const State f = wws::vector_field(model(), State::Ones(), 0.0, 0.0);
  EXPECT_NEAR(f(0), -0.058, 1e-15);
  EXPECT_NEAR(f(1), -236.2, 1e-12);
  EXPECT_LE(rel_err(f, reference_field(kTable, State::Ones(), 0.0, 0.0)), 1e-15);
}

TEST(PlantField, AllOnesWithUnitInputOnlyChangesFirstComponent) {
  const State f0 = wws::vector_field(model(), State::Ones(), 0.0, 0.0);
  const State f1 = wws::vector_field(model(), State::Ones(), 1.0, 0.0);
  EXPECT_NEAR(f1(0), 0.04, 1e-15);
  for (int i = 1; i < 6; ++i) EXPECT_EQ(f1(i), f0(i));
}

TEST(PlantField, MatchesReferenceAtRandomPoints) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> du(0.0, 30.0), dw(-10.0, 30.0);
  for (int trial = 0; trial < 200; ++trial) {
    const State x = random_state(rng, -20.0, 80.0);
    const double u = du(rng), w = dw(rng);
    EXPECT_LE(rel_err(wws::vector_field(model(), x, u, w), reference_field(kTable, x, u, w)), 1e-13);
  }
}

TEST(PlantField, AffineInInputAndDisturbance) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> d(-30.0, 30.0);
  for (int trial = 0; trial < 100; ++trial) {
    const State x = random_state(rng, 0.0, 60.0);
    const double u = d(rng), w = d(rng);
    const State base = wws::vector_field(model(), x, 0.0, 0.0);
    const State eu = wws::vector_field(model(), x, 1.0, 0.0) - base;
    const State ew = wws::vector_field(model(), x, 0.0, 1.0) - base;
    const State lhs = wws::vector_field(model(), x, u, w) - base;
    const State rhs = u * eu + w * ew;
    EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-9 * (1.0 + base.cwiseAbs().maxCoeff()));
  }
}

TEST(PlantField, RejectsNonFiniteState) {
  State x = State::Ones();
  x(2) = std::nan("");
  try {
    wws::vector_field(model(), x, 0.0, 0.0);
    FAIL() << "expected PlantError";
  } catch (const wws::PlantError& e) {
    EXPECT_EQ(e.kind(), wws::PlantError::Kind::NonFiniteState);
  }
}

// Central differences with step 1e-5 per coordinate.
TEST(PlantJacobian, MatchesCentralDifferences) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> du(0.0, 26.5), dw(0.0, 20.0);
  for (int trial = 0; trial < 10; ++trial) {
    const State x = random_state(rng, 10.0, 40.0);
    const double u = du(rng), w = dw(rng);
    const wws::PlantJacobian j = wws::jacobian(model(), x, u, w);
    constexpr double step = 1e-5;
    wws::StateJacobian fd;
    for (int c = 0; c < 6; ++c) {
      State xp = x, xm = x;
      xp(c) += step;
      xm(c) -= step;
      fd.col(c) = (wws::vector_field(model(), xp, u, w) - wws::vector_field(model(), xm, u, w)) / (2 * step);
    }
    const State fdu =
        (wws::vector_field(model(), x, u + step, w) - wws::vector_field(model(), x, u - step, w)) / (2 * step);
    const State fdw =
        (wws::vector_field(model(), x, u, w + step) - wws::vector_field(model(), x, u, w - step)) / (2 * step);
    EXPECT_LE((j.dx - fd).cwiseAbs().maxCoeff(), 1e-6 * j.dx.cwiseAbs().maxCoeff());
    EXPECT_LE((j.du - fdu).cwiseAbs().maxCoeff(), 1e-6 * std::max(1.0, j.du.cwiseAbs().maxCoeff()));
    EXPECT_LE((j.dw - fdw).cwiseAbs().maxCoeff(), 1e-6 * j.dw.cwiseAbs().maxCoeff());
  }
}

TEST(PlantOutput, ProjectsFifthComponent) {
  State x;
  x << 1, 2, 3, 4, 5, 6;
  EXPECT_EQ(wws::output(x), 5.0);
  EXPECT_EQ(model().output(x), 5.0);
  EXPECT_EQ(wws::output(State::Zero()), 0.0);
  x(4) = 40.0;
  EXPECT_EQ(wws::output(x), 40.0);
}

TEST(PlantStep, RejectsNonPositiveInterval) {
  EXPECT_THROW(wws::step(model(), State::Ones(), 0.0, 0.0, 0.0), wws::PlantError);
  EXPECT_THROW(wws::step(model(), State::Ones(), 0.0, 0.0, -1.0), wws::PlantError);
}

TEST(PlantStep, HalvingTheSubstepCeilingAgreesToOneMicroKelvin) {
  const State coarse = wws::step(model(), State::Ones(), 0.0, 0.0, 60.0);
  wws::IntegratorOptions fine;
  fine.max_substep = 1e-4;
  const State refined = wws::step(model(), State::Ones(), 0.0, 0.0, 60.0, fine);
  EXPECT_LE((coarse - refined).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(PlantStep, RegressionAnchorFromAllOnes) {
  // Frozen after the halved-substep agreement above.
  State anchor;
  anchor << 0.002795251853425587, 4.4276233808043396e-05, 4.4277689142328708e-10, 2.4353927282270061e-13,
      8.9300650522907357e-17, 1.414504555973056e-18;
  const State x = wws::step(model(), State::Ones(), 0.0, 0.0, 60.0);
  EXPECT_LE((x - anchor).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(PlantStep, NominalConditionsAgreeAcrossSubsteps) {
  const State x0 = State::Constant(15.0);
  const State coarse = wws::step(model(), x0, 23.0, 10.0, 60.0);
  wws::IntegratorOptions fine;
  fine.max_substep = 1e-4;
  EXPECT_LE((coarse - wws::step(model(), x0, 23.0, 10.0, 60.0, fine)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(PlantStep, TrapezoidalFallbackAgreesWithDefault) {
  const State x0 = State::Constant(15.0);
  wws::IntegratorOptions trap;
  trap.kind = wws::IntegratorKind::Trapezoidal;
  const State a = wws::step(model(), x0, 23.0, 10.0, 60.0);
  const State b = wws::step(model(), x0, 23.0, 10.0, 60.0, trap);
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(PlantStep, FlagsDivergenceInsteadOfClamping) {
  const State hot = State::Constant(140.0);
  try {
    wws::step(model(), hot, 1e6, 10.0, 60.0);
    FAIL() << "expected divergence";
  } catch (const wws::PlantError& e) {
    EXPECT_EQ(e.kind(), wws::PlantError::Kind::Divergence);
  }
}

TEST(PlantStep, EquilibriumIsAFixedPoint) {
  const wws::Equilibrium eq = wws::find_equilibrium_for_input(model(), 23.0, 10.0);
  const State x = wws::step(model(), eq.x, 23.0, 10.0, 60.0);
  EXPECT_LE((x - eq.x).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(PlantStep, EquilibriumIsStable) {
  const wws::Equilibrium eq = wws::find_equilibrium_for_input(model(), 23.0, 10.0);
  const Eigen::VectorXcd ev = wws::jacobian(model(), eq.x, 23.0, 10.0).dx.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) EXPECT_LT(ev(i).real(), 0.0);
}

TEST(PlantSimulate, SingleStepReducesToStep) {
  const std::vector<double> u{23.0}, w{10.0};
  const auto xs = wws::simulate(model(), State::Constant(15.0), u, w, 60.0);
  ASSERT_EQ(xs.size(), 2u);
  EXPECT_EQ(xs[0], State::Constant(15.0));
  EXPECT_EQ(xs[1], wws::step(model(), State::Constant(15.0), 23.0, 10.0, 60.0));
}

TEST(PlantSimulate, ConstantEquilibriumInputGivesConstantTrajectory) {
  const wws::Equilibrium eq = wws::find_equilibrium_for_input(model(), 23.0, 10.0);
  const std::vector<double> u(5, 23.0), w(5, 10.0);
  for (const State& x : wws::simulate(model(), eq.x, u, w, 60.0)) {
    EXPECT_LE((x - eq.x).cwiseAbs().maxCoeff(), 1e-5);
  }
}

TEST(PlantSimulate, ChainedHalvesEqualOneRun) {
  std::vector<double> u(10), w(10, 10.0);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = (i % 3 == 0) ? 0.0 : 21.2 + 0.5 * static_cast<double>(i);
  const State x0 = State::Constant(15.0);
  const auto full = wws::simulate(model(), x0, u, w, 60.0);
  const std::span<const double> us(u), ws(w);
  const auto first = wws::simulate(model(), x0, us.first(5), ws.first(5), 60.0);
  const auto second = wws::simulate(model(), first.back(), us.last(5), ws.last(5), 60.0);
  for (std::size_t k = 0; k <= 5; ++k) EXPECT_EQ(full[k], first[k]);
  for (std::size_t k = 0; k <= 5; ++k) EXPECT_EQ(full[5 + k], second[k]);
}

TEST(PlantSimulate, IsBitDeterministic) {
  const std::vector<double> u{0.0, 22.0, 26.5}, w{10.0, 10.0, 10.0};
  const auto a = wws::simulate(model(), State::Constant(20.0), u, w, 60.0);
  const auto b = wws::simulate(model(), State::Constant(20.0), u, w, 60.0);
  EXPECT_EQ(a, b);
}

TEST(PlantSimulate, RejectsMismatchedSequences) {
  const std::vector<double> u{1.0, 2.0}, w{10.0};
  EXPECT_THROW(wws::simulate(model(), State::Ones(), u, w, 60.0), wws::PlantError);
  const std::vector<double> none;
  EXPECT_THROW(wws::simulate(model(), State::Ones(), none, none, 60.0), wws::PlantError);
}

TEST(PlantSimulate, ReportsFailingStepIndex) {
  const std::vector<double> u{0.0, 1e6}, w{10.0, 10.0};
  try {
    wws::simulate(model(), State::Constant(140.0), u, w, 60.0);
    FAIL() << "expected divergence";
  } catch (const wws::PlantError& e) {
    ASSERT_TRUE(e.index().has_value());
  }
}

}  // namespace
