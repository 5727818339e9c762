#include <gtest/gtest.h>

#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

#include "ldbuffer/equilibrium.hpp"
#include "test_util.hpp"

namespace {

using namespace ldb;
using testutil::expect_kind;
using testutil::kModels;

JumpModel walk(double up, double down_per_unit, double drain) {
  return JumpModel(1,
                   {{IntVector::Constant(1, 1), RateFn::constant(up)},
                    {IntVector::Constant(1, -1), RateFn::monomial(down_per_unit, {1})}},
                   Vector::Ones(1), drain);
}

TEST(Fluid, OneDimensionalClosedForm) {
  const JumpModel m = walk(3.0, 2.0, 10.0);
  const auto tr = fluid_trajectory(m, Vector::Constant(1, 5.0), 4.0, 0.1);
  ASSERT_EQ(tr.times.size(), tr.states.size());
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    const double want = 1.5 + 3.5 * std::exp(-2.0 * tr.times[i]);
    EXPECT_NEAR(tr.states[i](0), want, 1e-7);
  }
}

TEST(Fluid, LinearSystemMatchesMatrixExponential) {
  const JumpModel m = load_model(kModels + "/phone_data.json");
  const Vector x0{{40.0, 5.0}};
  const AttractingPoint ap = attracting_point(m);
  const Matrix jac = drift_jacobian(m, x0);
  const auto tr = fluid_trajectory(m, x0, 2.0, 0.25);
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    const Vector want = ap.q + (jac * tr.times[i]).exp() * (x0 - ap.q);
    EXPECT_LT((tr.states[i] - want).cwiseAbs().maxCoeff(), 1e-7);
  }
}

TEST(Fluid, RestsAtFixedPoint) {
  const JumpModel m = load_model(kModels + "/phone_data.json");
  const AttractingPoint ap = attracting_point(m);
  const auto tr = fluid_trajectory(m, ap.q, 5.0, 1.0);
  for (const Vector& z : tr.states) EXPECT_LT((z - ap.q).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Fluid, RejectsBadInput) {
  const JumpModel m = walk(1.0, 1.0, 2.0);
  expect_kind(ErrorKind::InvalidArgument, [&] { fluid_trajectory(m, Vector::Ones(1), -1.0, 0.1); });
  expect_kind(ErrorKind::InvalidArgument, [&] { fluid_trajectory(m, Vector::Ones(2), 1.0, 0.1); });
}

TEST(AttractingPoint, OneDimensional) {
  const AttractingPoint ap = attracting_point(walk(3.0, 2.0, 10.0));
  EXPECT_NEAR(ap.q(0), 1.5, 1e-10);
  EXPECT_TRUE(ap.stable);
  EXPECT_LT(ap.residual, 1e-10);
}

TEST(AttractingPoint, PhoneSolvesLinearSystem) {
  const JumpModel m = load_model(kModels + "/phone_data.json");
  const AttractingPoint ap = attracting_point(m);
  // affine drift: v(x) = J x + v(0)
  const Matrix jac = drift_jacobian(m, Vector::Zero(2));
  const Vector want = jac.lu().solve(-drift(m, Vector::Zero(2)));
  EXPECT_LT((ap.q - want).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_TRUE(ap.stable);
  for (const auto& ev : ap.eigenvalues) EXPECT_LT(ev.real(), 0.0);
}

TEST(AttractingPoint, ConstantRatesHaveNoRoot) {
  const JumpModel m(1,
                    {{IntVector::Constant(1, 1), RateFn::constant(2.0)},
                     {IntVector::Constant(1, -1), RateFn::constant(1.0)}},
                    Vector::Ones(1), 10.0);
  expect_kind(ErrorKind::NoRoot, [&] { attracting_point(m); });
}

TEST(AttractingPoint, DrainBelowSteadyLoad) {
  expect_kind(ErrorKind::DriftAtQViolation, [] { attracting_point(walk(3.0, 2.0, 1.0)); });
}

TEST(Upcross, OnHyperplaneAtSteadyState) {
  const Vector pi{{50.0, 10.0}}, a{{1.0, 5.0}};
  const auto r = upcrossing_point(pi, a, pi.dot(a), SteadyForm::OpenPoisson);
  EXPECT_NEAR(r.beta, 0.0, 1e-12);
  EXPECT_NEAR(r.entropy, 0.0, 1e-10);
  EXPECT_LT((r.x_star - pi).cwiseAbs().maxCoeff(), 1e-9);
}

double open_entropy(const Vector& x, const Vector& pi) {
  double d = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) d += x(j) * std::log(x(j) / pi(j)) - x(j) + pi(j);
  return d;
}

TEST(Upcross, MatchesGridSearchOnHyperplane) {
  const Vector pi{{50.0, 10.0}}, a{{1.0, 5.0}};
  const double c = 110.0;
  const auto r = upcrossing_point(pi, a, c, SteadyForm::OpenPoisson);
  // x1 in (0, c): x2 = (c - x1) / 5, refine around the best sample
  double lo = 1e-9, hi = c - 1e-9, best_x = lo;
  for (int level = 0; level < 30; ++level) {
    double best = INFINITY;
    for (int i = 0; i <= 200; ++i) {
      const double x1 = lo + (hi - lo) * i / 200;
      const double d = open_entropy(Vector{{x1, (c - x1) / 5.0}}, pi);
      if (d < best) {
        best = d;
        best_x = x1;
      }
    }
    const double w = (hi - lo) / 100;
    lo = std::max(1e-9, best_x - w);
    hi = std::min(c - 1e-9, best_x + w);
  }
  EXPECT_NEAR(r.x_star(0), best_x, 1e-6);
  EXPECT_NEAR(r.entropy, open_entropy(Vector{{best_x, (c - best_x) / 5.0}}, pi), 1e-9);
  EXPECT_LT(std::abs(r.residual), 1e-10);
  EXPECT_TRUE(r.hessian_positive);
}

TEST(Upcross, EntropyIncreasesWithDrain) {
  const Vector pi{{50.0, 10.0}}, a{{1.0, 5.0}};
  for (SteadyForm form : {SteadyForm::OpenPoisson, SteadyForm::ClosedMultinomial}) {
    const Vector p = form == SteadyForm::OpenPoisson ? pi : Vector(pi / pi.sum());
    const double base = p.dot(a);
    double prev = -1.0;
    for (double f : {1.05, 1.2, 1.5, 2.0}) {
      const auto r = upcrossing_point(p, a, base * f, form);
      EXPECT_GT(r.entropy, prev);
      prev = r.entropy;
    }
  }
}

TEST(Upcross, ClosedFormStaysOnSimplex) {
  const Vector pi{{2.0 / 3.0, 1.0 / 3.0}}, a{{1.0, 5.0}};
  const auto r = upcrossing_point(pi, a, 3.0, SteadyForm::ClosedMultinomial, 1.0);
  EXPECT_NEAR(r.x_star.sum(), 1.0, 1e-12);
  EXPECT_NEAR(r.x_star.dot(a), 3.0, 1e-10);
  // two states on the simplex: x is pinned by the constraint
  EXPECT_NEAR(r.x_star(1), 0.5, 1e-10);
  const double want = 0.5 * std::log(0.5 / pi(0)) + 0.5 * std::log(0.5 / pi(1));
  EXPECT_NEAR(r.entropy, want, 1e-10);
}

TEST(Upcross, InfeasibleDrain) {
  const Vector pi{{50.0, 10.0}}, a{{1.0, 5.0}};
  expect_kind(ErrorKind::InfeasibleHyperplane,
              [&] { upcrossing_point(pi, a, 50.0, SteadyForm::OpenPoisson); });
  const Vector p{{0.5, 0.5}};
  expect_kind(ErrorKind::InfeasibleHyperplane,
              [&] { upcrossing_point(p, a, 6.0, SteadyForm::ClosedMultinomial, 1.0); });
}

TEST(Upcross, ModelFormReportsDrift) {
  const JumpModel m = load_model(kModels + "/phone_data.json");
  const auto r = upcrossing_point(m, SteadyForm::OpenPoisson);
  EXPECT_NEAR(r.x_star.dot(m.buffer_weights()), m.drain(), 1e-9);
  EXPECT_NEAR(r.a_dot_v, m.buffer_weights().dot(drift(m, r.x_star)), 1e-9);
  EXPECT_LT(r.a_dot_v, 0.0);
}

}  // namespace
