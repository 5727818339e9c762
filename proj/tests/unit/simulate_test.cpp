#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ldbuffer/pathspace.hpp"
#include "ldbuffer/simulate.hpp"
#include "test_util.hpp"

namespace {

using namespace ldb;
using testutil::expect_kind;
using testutil::kModels;

JumpModel pure_birth(double rate) {
  return JumpModel(1, {{IntVector::Constant(1, 1), RateFn::constant(rate)}}, Vector::Ones(1), 0.0);
}

TEST(Ssa, BufferMeanUnderPoissonArrivals) {
  // b(t) = int_0^t z, E z(s) = lambda s, so E b(t) = lambda t^2 / 2
  const JumpModel m = pure_birth(2.0);
  SimOptions o;
  o.state_cap = Vector::Constant(1, 1e9);
  const int trials = 2000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < trials; ++i) {
    const SimRun r = ssa_simulate(m, 10, Vector::Zero(1), 1.0, INFINITY, static_cast<std::uint64_t>(i), o);
    sum += r.buffer.back();
    sq += r.buffer.back() * r.buffer.back();
  }
  const double mean = sum / trials;
  const double se = std::sqrt((sq / trials - mean * mean) / trials);
  EXPECT_NEAR(mean, 1.0, 4.0 * se);
}

TEST(Ssa, DeadStateStopsRun) {
  const JumpModel m(1,
                    {{IntVector::Constant(1, 1), RateFn::monomial(1.0, {1})},
                     {IntVector::Constant(1, -1), RateFn::monomial(1.0, {1})}},
                    Vector::Ones(1), 1.0);
  const SimRun r = ssa_simulate(m, 5, Vector::Zero(1), 3.0, INFINITY, 1);
  EXPECT_TRUE(r.dead);
  EXPECT_EQ(r.events, 0u);
  EXPECT_EQ(r.buffer.back(), 0.0);
}

TEST(Ssa, TraceInvariants) {
  const JumpModel m = load_model(kModels + "/phone_data.json");
  const SimRun r = ssa_simulate(m, 50, Vector{{25.0, 15.0}}, 2.0, INFINITY, 42);
  ASSERT_EQ(r.times.size(), r.states.size());
  ASSERT_EQ(r.times.size(), r.buffer.size());
  for (std::size_t i = 0; i < r.times.size(); ++i) {
    if (i > 0) EXPECT_GE(r.times[i], r.times[i - 1]);
    EXPECT_GE(r.buffer[i], 0.0);
    EXPECT_GE(r.states[i].minCoeff(), 0.0);
    // states live on the 1/n lattice
    const Vector counts = r.states[i] * 50.0;
    EXPECT_LT((counts - counts.array().round().matrix()).cwiseAbs().maxCoeff(), 1e-9);
  }
  EXPECT_DOUBLE_EQ(r.times.back(), 2.0);
}

TEST(Ssa, BufferAgreesWithStepFunctional) {
  const JumpModel m = load_model(kModels + "/phone_data.json");
  const SimRun r = ssa_simulate(m, 20, Vector{{30.0, 16.0}}, 1.5, INFINITY, 7);
  const Vector a = m.buffer_weights();
  std::vector<double> phi;
  for (const Vector& z : r.states) phi.push_back(z.dot(a));
  const BufferTrace tr = buffer_value_steps(r.times, phi, m.drain(), r.times.back());
  ASSERT_GE(tr.values.size(), r.buffer.size());
  for (std::size_t i = 0; i < r.buffer.size(); ++i) EXPECT_NEAR(tr.values[i], r.buffer[i], 1e-9);
  EXPECT_NEAR(tr.terminal, r.buffer.back(), 1e-9);
}

TEST(Ssa, StopsExactlyAtOverflow) {
  const JumpModel m = pure_birth(5.0);
  const SimRun r = ssa_simulate(m, 10, Vector::Ones(1), 100.0, 0.5, 3);
  ASSERT_TRUE(r.overflow_time.has_value());
  EXPECT_NEAR(r.buffer.back(), 0.5, 1e-12);
  EXPECT_DOUBLE_EQ(r.times.back(), *r.overflow_time);
}

TEST(Ssa, SameSeedSameRun) {
  const JumpModel m = load_model(kModels + "/phone_data.json");
  const SimRun a = ssa_simulate(m, 30, Vector{{25.0, 15.0}}, 1.0, INFINITY, 99);
  const SimRun b = ssa_simulate(m, 30, Vector{{25.0, 15.0}}, 1.0, INFINITY, 99);
  EXPECT_EQ(a.times, b.times);
  EXPECT_EQ(a.buffer, b.buffer);
  EXPECT_EQ(a.transitions, b.transitions);
}

TEST(Ssa, InputValidation) {
  const JumpModel m = load_model(kModels + "/phone_data.json");
  expect_kind(ErrorKind::InvalidArgument,
              [&] { ssa_simulate(m, 3, Vector{{25.1, 15.0}}, 1.0, INFINITY, 1); });
  expect_kind(ErrorKind::InvalidArgument,
              [&] { ssa_simulate(m, 0, Vector{{25.0, 15.0}}, 1.0, INFINITY, 1); });
  SimOptions o;
  o.rate_cap = 10.0;
  expect_kind(ErrorKind::RateExplosion,
              [&] { ssa_simulate(m, 10, Vector{{25.0, 15.0}}, 1.0, INFINITY, 1, o); });
}

TEST(Ssa, StateCapRejectsJumps) {
  const JumpModel m = pure_birth(50.0);
  SimOptions o;
  o.state_cap = Vector::Constant(1, 2.0);
  const SimRun r = ssa_simulate(m, 1, Vector::Zero(1), 1.0, INFINITY, 5, o);
  EXPECT_LE(r.states.back()(0), 2.0);
  EXPECT_GT(r.cap_hits, 0);
}

TEST(Overflow, TrivialLevels) {
  const JumpModel m = load_model(kModels + "/toy_birth_death.json");
  const auto sure = overflow_probability(m, 10, Vector::Constant(1, 1.2), 0.0, 1.0, 50, 1);
  EXPECT_EQ(sure.hits, 50u);
  const auto never = overflow_probability(m, 10, Vector::Constant(1, 1.2), 1e6, 0.5, 50, 1);
  EXPECT_EQ(never.hits, 0u);
  EXPECT_TRUE(std::isinf(never.log_rate));
  EXPECT_GT(never.ci_high, 0.0);
}

TEST(Overflow, WilsonIntervalBracketsEstimate) {
  const JumpModel m = load_model(kModels + "/toy_birth_death.json");
  const auto e = overflow_probability(m, 10, Vector::Constant(1, 1.2), 0.2, 2.0, 2000, 11);
  ASSERT_GT(e.hits, 0u);
  EXPECT_LE(e.ci_low, e.p_hat);
  EXPECT_GE(e.ci_high, e.p_hat);
  EXPECT_LE(e.log_rate_low, e.log_rate);
  EXPECT_GE(e.log_rate_high, e.log_rate);
  EXPECT_NEAR(e.log_rate, -std::log(e.p_hat) / 10.0, 1e-12);
}

TEST(Overflow, IndependentOfThreadCount) {
  const JumpModel m = load_model(kModels + "/toy_birth_death.json");
  SimOptions one, four;
  one.threads = 1;
  four.threads = 4;
  const auto a = overflow_probability(m, 20, Vector::Constant(1, 1.2), 0.2, 2.0, 3000, 5, one);
  const auto b = overflow_probability(m, 20, Vector::Constant(1, 1.2), 0.2, 2.0, 3000, 5, four);
  EXPECT_EQ(a.hits, b.hits);
  EXPECT_EQ(a.cap_hits, b.cap_hits);
}

TEST(Conditional, TooFewHits) {
  const JumpModel m = load_model(kModels + "/toy_birth_death.json");
  expect_kind(ErrorKind::TooFewHits, [&] {
    conditional_paths(m, 10, Vector::Constant(1, 1.2), 1e6, 0.5, 20, 1, 0.5);
  });
}

TEST(Conditional, DeterministicGrowthHasNarrowEnvelope) {
  // large n: every run follows z(t) = 1 + t up to the overflow time
  const JumpModel m = pure_birth(1.0);
  const auto c = conditional_paths(m, 2000, Vector::Ones(1), 0.5, 5.0, 20, 3, 0.4, 41);
  EXPECT_EQ(c.used, 20u);
  EXPECT_LT(c.width, 0.1);
  EXPECT_EQ(c.times.size(), 41u);
}

TEST(Ensemble, MeanFollowsLinearGrowth) {
  const JumpModel m = pure_birth(3.0);
  SimOptions o;
  o.state_cap = Vector::Constant(1, 1e9);
  const auto e = ensemble_mean(m, 100, Vector::Zero(1), 1.0, 400, 2, 11, o);
  ASSERT_EQ(e.times.size(), 11u);
  for (std::size_t k = 0; k < e.times.size(); ++k)
    EXPECT_NEAR(e.mean(0, static_cast<Eigen::Index>(k)), 3.0 * e.times[k], 0.05);
}

TEST(Ssa, CsvHasOneRowPerEntry) {
  const JumpModel m = load_model(kModels + "/toy_birth_death.json");
  const SimRun r = ssa_simulate(m, 10, Vector::Constant(1, 1.2), 0.5, INFINITY, 8);
  std::ostringstream out;
  write_run_csv(out, r);
  const std::string s = out.str();
  EXPECT_EQ(s.rfind("t,x1,b,event\n", 0), 0u);
  EXPECT_EQ(static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')), r.times.size() + 1);
}

}  // namespace
