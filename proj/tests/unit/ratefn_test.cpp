#include <gtest/gtest.h>

#include <random>

#include "ldbuffer/error.hpp"
#include "ldbuffer/ratefn.hpp"
#include "oracles.hpp"

namespace {

using namespace ldb;

const std::string kModels = LDBUFFER_MODELS_DIR;

Matrix walk_1d() {
  Matrix d(1, 2);
  d << 1, -1;
  return d;
}

TEST(LocalCost, MatchesBirthDeathClosedForm) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> pos(0.05, 10.0), vel(-10.0, 10.0);
  for (int i = 0; i < 200; ++i) {
    const double up = pos(gen), down = pos(gen), y = vel(gen);
    const double got = maximize_dual(Vector{{up, down}}, walk_1d(), Vector{{y}}).value;
    EXPECT_NEAR(got, oracle::birth_death_cost(up, down, y), 1e-9 * std::max(1.0, got));
  }
}

TEST(LocalCost, MatchesGridSearchIn2D) {
  Matrix dirs(2, 3);
  dirs << 1, 0, -1, 0, 1, -1;
  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> pos(0.2, 3.0), vel(-1.5, 1.5);
  for (int i = 0; i < 10; ++i) {
    const Vector lam{{pos(gen), pos(gen), pos(gen)}};
    const Vector y{{vel(gen), vel(gen)}};
    const double want = oracle::grid_dual_2d(lam, dirs, y);
    EXPECT_NEAR(maximize_dual(lam, dirs, y).value, want, 1e-6 * std::max(1.0, want));
  }
}

TEST(LocalCost, ZeroExactlyAtDriftAndPositiveElsewhere) {
  const JumpModel m = load_model(kModels + "/phone_data.json");
  std::mt19937_64 gen(13);
  std::uniform_real_distribution<double> u(0.5, 60.0), dv(-5.0, 5.0);
  for (int i = 0; i < 50; ++i) {
    const Vector x{{u(gen), u(gen)}};
    const Vector v = drift(m, x);
    EXPECT_LE(local_cost(m, x, v).value, 1e-10);
    const Vector y = v + Vector{{dv(gen), dv(gen)}};
    EXPECT_GT(local_cost(m, x, y).value, 0.0);
  }
}

TEST(LocalCost, ConvexInVelocity) {
  const JumpModel m = load_model(kModels + "/phone_data.json");
  const Vector x{{20.0, 10.0}};
  std::mt19937_64 gen(14);
  std::uniform_real_distribution<double> v(-40.0, 40.0);
  for (int i = 0; i < 50; ++i) {
    const Vector y1{{v(gen), v(gen)}}, y2{{v(gen), v(gen)}};
    const double mid = local_cost(m, x, 0.5 * (y1 + y2)).value;
    const double avg = 0.5 * (local_cost(m, x, y1).value + local_cost(m, x, y2).value);
    EXPECT_LE(mid, avg + 1e-9 * (1.0 + avg));
  }
}

TEST(LocalCost, FenchelInequality) {
  const JumpModel m = load_model(kModels + "/phone_data.json");
  const Vector x{{25.0, 12.0}};
  std::mt19937_64 gen(15);
  std::uniform_real_distribution<double> t(-1.0, 1.0), v(-30.0, 30.0);
  for (int i = 0; i < 100; ++i) {
    const Vector th{{t(gen), t(gen)}}, y{{v(gen), v(gen)}};
    const double lhs = th.dot(y) - hamiltonian(m, x, th).value;
    EXPECT_LE(lhs, local_cost(m, x, y).value + 1e-9);
  }
}

TEST(LocalCost, OutsideConeIsUnbounded) {
  Matrix up(1, 1);
  up << 1;
  try {
    maximize_dual(Vector::Ones(1), up, Vector::Constant(1, -1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnboundedDual);
  }
}

TEST(Hamiltonian, RangeGuard) {
  try {
    hamiltonian(Vector::Ones(2), walk_1d(), Vector::Constant(1, 800.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::RangeError);
  }
}

TEST(Hamiltonian, GradientAndHessianMatchFiniteDifferences) {
  Matrix dirs(2, 3);
  dirs << 1, 0, -1, 0, 1, -1;
  const Vector lam{{1.0, 2.0, 0.5}};
  const Vector th{{0.3, -0.2}};
  const HamiltonianEval h = hamiltonian(lam, dirs, th);
  const double eps = 1e-6;
  for (int j = 0; j < 2; ++j) {
    Vector p = th, m = th;
    p(j) += eps;
    m(j) -= eps;
    EXPECT_NEAR((hamiltonian(lam, dirs, p).value - hamiltonian(lam, dirs, m).value) / (2 * eps),
                h.gradient(j), 1e-7);
    const Vector dg = (hamiltonian(lam, dirs, p).gradient - hamiltonian(lam, dirs, m).gradient) / (2 * eps);
    EXPECT_LT((dg - h.hessian.col(j)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(CostModel, DerivativesMatchFiniteDifferences) {
  const JumpModel m = load_model(kModels + "/phone_data.json");
  const CostModel cost = CostModel::state_dependent(m);
  const Vector x{{24.0, 13.0}}, y{{3.0, 9.0}};
  const LocalCostDerivatives d = cost.derivatives(x, y);
  const double eps = 1e-5;
  for (int j = 0; j < 2; ++j) {
    Vector xp = x, xm = x, yp = y, ym = y;
    xp(j) += eps;
    xm(j) -= eps;
    yp(j) += eps;
    ym(j) -= eps;
    EXPECT_NEAR((cost.cost(xp, y).value - cost.cost(xm, y).value) / (2 * eps), d.grad_x(j), 1e-6);
    EXPECT_NEAR((cost.cost(x, yp).value - cost.cost(x, ym).value) / (2 * eps), d.theta(j), 1e-6);
    const Vector dty = (cost.cost(x, yp).theta_star - cost.cost(x, ym).theta_star) / (2 * eps);
    EXPECT_LT((dty - d.hess_yy.col(j)).cwiseAbs().maxCoeff(), 1e-5);
    const Vector dtx = (cost.cost(xp, y).theta_star - cost.cost(xm, y).theta_star) / (2 * eps);
    EXPECT_LT((dtx - d.hess_yx.col(j)).cwiseAbs().maxCoeff(), 1e-5);
  }
  // dropped second-order rate term: the block stays positive semidefinite
  Eigen::SelfAdjointEigenSolver<Matrix> eig(d.hess_xx);
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12);
}

TEST(CostModel, ZoomLimits) {
  const JumpModel m = load_model(kModels + "/phone_data.json");
  const Vector anchor{{25.0, 15.0}}, x{{30.0, 11.0}}, y{{1.0, 2.0}};
  EXPECT_NEAR(CostModel::zoomed(m, anchor, 0.0).cost(x, y).value,
              CostModel::frozen(freeze(m, anchor)).cost(x, y).value, 1e-14);
  EXPECT_NEAR(CostModel::zoomed(m, anchor, 1.0).cost(x, y).value,
              CostModel::state_dependent(m).cost(x, y).value, 1e-14);
  const double z = 0.3;
  EXPECT_NEAR(CostModel::zoomed(m, anchor, z).cost(x, y).value,
              local_cost(m, anchor + z * (x - anchor), y).value, 1e-12);
}

TEST(CostModel, FrozenIgnoresPosition) {
  const JumpModel m = load_model(kModels + "/phone_data.json");
  const CostModel f = CostModel::frozen(freeze(m, Vector{{25.0, 15.0}}));
  const Vector y{{2.0, 4.0}};
  EXPECT_EQ(f.cost(Vector{{1.0, 1.0}}, y).value, f.cost(Vector{{90.0, 3.0}}, y).value);
}

}  // namespace
