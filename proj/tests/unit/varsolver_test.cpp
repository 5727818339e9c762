#include <gtest/gtest.h>

#include <cmath>

#include "ldbuffer/varsolver.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace {

using namespace ldb;
using testutil::expect_kind;
using testutil::kModels;

// Frozen birth-death walk at x = C = 1.2: up 1, down 1.2.
constexpr double kUp = 1.0, kDown = 1.2, kC = 1.2;

const JumpModel& toy() {
  static const JumpModel m = load_model(kModels + "/toy_birth_death.json");
  return m;
}

// CostModel holds a reference, so the model must outlive it
CostModel frozen_toy() { return CostModel::frozen(freeze(toy(), Vector::Constant(1, kC))); }

// Stationarity for a frozen 1-D walk: theta(t) = eta (T - t) and
// y = up e^theta - down e^-theta. eta is found by bisection on the area.
double continuous_fixed_T_cost(double duration, double b_level) {
  const int m = 20000;
  auto area_and_cost = [&](double eta) {
    double area = 0.0, cost = 0.0;
    const double h = duration / m;
    for (int i = 0; i < m; ++i) {
      const double t = (i + 0.5) * h;
      const double th = eta * (duration - t);
      const double y = kUp * std::exp(th) - kDown * std::exp(-th);
      area += (duration - t) * y * h;
      cost += oracle::birth_death_cost(kUp, kDown, y) * h;
    }
    return std::pair{area, cost};
  };
  double lo = 0.0, hi = 1.0;
  while (area_and_cost(hi).first < b_level) hi *= 2.0;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (area_and_cost(mid).first < b_level ? lo : hi) = mid;
  }
  return area_and_cost(hi).second;
}

SolverOptions quick() {
  SolverOptions o;
  o.grid = 64;
  o.starts = 2;
  return o;
}

TEST(FixedT, MatchesContinuousStationarityOracle) {
  SolverOptions o;
  o.grid = 256;
  const auto sol = solve_fixed_T(frozen_toy(), Vector::Constant(1, kC), 3.0, 0.3, o);
  const double want = continuous_fixed_T_cost(3.0, 0.3);
  EXPECT_NEAR(sol.cost, want, 1e-4 * want);
  EXPECT_NEAR(sol.buffer_terminal, 0.3, 1e-9);
}

TEST(FixedT, MatchesLatticeDynamicProgram) {
  SolverOptions o;
  o.grid = 16;
  const auto sol = solve_fixed_T(frozen_toy(), Vector::Constant(1, kC), 3.0, 0.3, o);
  const auto dp = oracle::lattice_fixed_T(
      [](double y) { return oracle::birth_death_cost(kUp, kDown, y); }, kC, kC, 3.0, 16, 0.3,
      kC + 0.5, 251);
  EXPECT_NEAR(sol.cost, dp.cost, 0.01 * dp.cost);
}

TEST(FixedT, ZeroBufferIsFluidPath) {
  const JumpModel m = load_model(kModels + "/toy_birth_death.json");
  const auto sol = solve_fixed_T(CostModel::state_dependent(m), Vector::Constant(1, 1.5), 2.0, 0.0,
                                 quick());
  EXPECT_LT(sol.cost, 1e-6);
  EXPECT_NEAR(sol.path.end()(0), 1.0 + 0.5 * std::exp(-2.0), 1e-6);
}

TEST(FixedT, InputValidation) {
  const CostModel f = frozen_toy();
  expect_kind(ErrorKind::InvalidArgument,
              [&] { solve_fixed_T(f, Vector::Constant(1, 1.0), 1.0, 0.2, quick()); });
  expect_kind(ErrorKind::InvalidArgument,
              [&] { solve_fixed_T(f, Vector::Constant(1, kC), -1.0, 0.2, quick()); });
  expect_kind(ErrorKind::InvalidArgument,
              [&] { solve_fixed_T(f, Vector::Constant(1, kC), 1.0, -0.2, quick()); });
}

TEST(FixedT, CostIncreasesWithBuffer) {
  const CostModel f = frozen_toy();
  double prev = 0.0;
  for (double b : {0.05, 0.1, 0.2, 0.4}) {
    const double c = solve_fixed_T(f, Vector::Constant(1, kC), 2.5, b, quick()).cost;
    EXPECT_GT(c, prev);
    prev = c;
  }
}

class FreeTime : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    unit_ = new VariationalSolution(solve_problem_A(frozen_toy(), Vector::Constant(1, kC), 1.0, quick()));
  }
  static void TearDownTestSuite() {
    delete unit_;
    unit_ = nullptr;
  }
  static VariationalSolution* unit_;
};
VariationalSolution* FreeTime::unit_ = nullptr;

TEST_F(FreeTime, ActiveAndStable) {
  EXPECT_TRUE(unit_->active);
  EXPECT_LT(unit_->spread, 1e-6);
  EXPECT_GT(unit_->T, 0.0);
}

TEST_F(FreeTime, EnvelopeMultiplier) {
  // I(B) = I(1) sqrt(B), so dI/dB = I / (2B)
  EXPECT_NEAR(unit_->multiplier, unit_->cost / 2.0, 1e-3 * unit_->cost);
}

TEST_F(FreeTime, SquareRootScaling) {
  for (double b : {0.25, 4.0}) {
    const auto sol = solve_problem_A(frozen_toy(), Vector::Constant(1, kC), b, quick());
    EXPECT_NEAR(sol.cost, unit_->cost * std::sqrt(b), 1e-5 * sol.cost);
    EXPECT_NEAR(sol.T, unit_->T * std::sqrt(b), 1e-4 * sol.T);
  }
}

TEST_F(FreeTime, LongerAndShorterHorizonsCostMore) {
  for (double f : {0.8, 1.25}) {
    const auto sol = solve_fixed_T(frozen_toy(), Vector::Constant(1, kC), unit_->T * f, 1.0, quick());
    EXPECT_GT(sol.cost, unit_->cost);
  }
}

TEST_F(FreeTime, CertificateVerdicts) {
  const CostModel f = frozen_toy();
  const auto same = uniqueness_certificate(unit_->path, unit_->path, f, 1.0);
  EXPECT_EQ(same.verdict, CertificateResult::Verdict::ConfirmsUniqueness);
  const auto other = solve_fixed_T(f, Vector::Constant(1, kC), unit_->T * 1.5, 1.0, quick());
  const auto diff = uniqueness_certificate(unit_->path, other.path, f, 1.0);
  EXPECT_EQ(diff.verdict, CertificateResult::Verdict::ContradictionFound);
  EXPECT_LT(diff.improved_cost, std::max(diff.cost1, diff.cost2));
}

TEST_F(FreeTime, RescaleInvertsScaling) {
  const JumpModel m = load_model(kModels + "/toy_birth_death.json");
  const Vector x_star = Vector::Constant(1, kC);
  for (double b : {0.1, 0.5}) {
    const auto scaled = scale_solution(*unit_, b, x_star, m);
    EXPECT_NEAR(scaled.T, unit_->T * std::sqrt(b), 1e-12);
    const Path back = rescale_small_buffer(scaled.path, b);
    EXPECT_LT(sup_distance(back, unit_->path), 1e-10);
  }
}

TEST(ProblemA, DeterministicForSeed) {
  const auto a = solve_problem_A(frozen_toy(), Vector::Constant(1, kC), 0.5, quick());
  const auto b = solve_problem_A(frozen_toy(), Vector::Constant(1, kC), 0.5, quick());
  EXPECT_EQ(a.cost, b.cost);
  EXPECT_EQ(a.T, b.T);
}

TEST(ProblemA, BracketExhausted) {
  SolverOptions o = quick();
  o.t_max = 0.05;
  expect_kind(ErrorKind::BracketExhausted,
              [&] { solve_problem_A(frozen_toy(), Vector::Constant(1, kC), 1.0, o); });
}

TEST(ProblemA, StateDependentCostsMoreThanFrozenAtLargeBuffer) {
  // rates pull back harder as x grows above C
  const JumpModel& m = toy();
  const auto sd = solve_problem_A(CostModel::state_dependent(m), Vector::Constant(1, kC), 0.3, quick());
  const auto fr = solve_problem_A(frozen_toy(), Vector::Constant(1, kC), 0.3, quick());
  EXPECT_GT(sd.cost, fr.cost);
  EXPECT_TRUE(sd.active);
}

}  // namespace
