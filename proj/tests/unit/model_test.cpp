#include <gtest/gtest.h>

#include <random>

#include "ldbuffer/error.hpp"
#include "ldbuffer/model.hpp"
#include "test_util.hpp"

namespace {

using namespace ldb;

using testutil::expect_kind;
using testutil::kModels;

JumpModel birth_death(double up, double down, double drain) {
  return JumpModel(1,
                   {{IntVector::Constant(1, 1), RateFn::constant(up)},
                    {IntVector::Constant(1, -1), RateFn::monomial(down, {1})}},
                   Vector::Ones(1), drain);
}

TEST(Model, PhoneDataLoadsAndValidates) {
  const JumpModel m = load_model(kModels + "/phone_data.json");
  EXPECT_EQ(m.dim(), 2);
  EXPECT_EQ(m.num_transitions(), 6u);
  EXPECT_TRUE(validate(m).ok());
  EXPECT_DOUBLE_EQ(m.drain(), 100.0);
}

TEST(Model, ShippedModelsValidate) {
  for (const char* name : {"toy_birth_death.json", "closed_two_type_reduced.json"})
    EXPECT_TRUE(validate(load_model(kModels + "/" + name)).ok()) << name;
}

TEST(Model, TransitionIndexOutOfRange) {
  const JumpModel m = birth_death(1, 1, 1);
  expect_kind(ErrorKind::IndexOutOfRange, [&] { m.transition(5); });
  expect_kind(ErrorKind::IndexOutOfRange, [&] { rate(m, 2, Vector::Ones(1)); });
}

TEST(Model, NegativeStateIsDomainError) {
  const JumpModel m = birth_death(1, 1, 1);
  expect_kind(ErrorKind::DomainError, [&] { rate(m, 1, Vector::Constant(1, -0.1)); });
}

TEST(Model, ValidateFlagsBadModels) {
  // only upward jumps: cone does not span
  const JumpModel up_only(1, {{IntVector::Constant(1, 1), RateFn::constant(1)}}, Vector::Ones(1), 1);
  EXPECT_FALSE(validate(up_only).ok());
  const JumpModel zero_dir(1,
                           {{IntVector::Constant(1, 0), RateFn::constant(1)},
                            {IntVector::Constant(1, 1), RateFn::constant(1)},
                            {IntVector::Constant(1, -1), RateFn::constant(1)}},
                           Vector::Ones(1), 1);
  EXPECT_FALSE(validate(zero_dir).ok());
  const JumpModel bad_a(1,
                        {{IntVector::Constant(1, 1), RateFn::constant(1)},
                         {IntVector::Constant(1, -1), RateFn::constant(1)}},
                        Vector::Constant(1, -1.0), 1);
  EXPECT_FALSE(validate(bad_a).ok());
}

TEST(Model, ShapeMismatchThrows) {
  expect_kind(ErrorKind::InvalidArgument, [] {
    JumpModel(2, {{IntVector::Constant(1, 1), RateFn::constant(1)}}, Vector::Ones(2), 1);
  });
}

TEST(Model, PositiveSpanning) {
  Matrix d(2, 3);
  d << 1, 0, -1, 0, 1, -1;
  EXPECT_TRUE(positively_spans(d));
  Matrix half(2, 2);
  half << 1, 0, 0, 1;
  EXPECT_FALSE(positively_spans(half));
}

TEST(Model, DriftJacobianMatchesFiniteDifferences) {
  const JumpModel m = load_model(kModels + "/phone_data.json");
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(1.0, 50.0);
  for (int i = 0; i < 20; ++i) {
    const Vector x{{u(gen), u(gen)}};
    const Matrix jac = drift_jacobian(m, x);
    const double h = 1e-6;
    for (int j = 0; j < 2; ++j) {
      Vector xp = x, xm = x;
      xp(j) += h;
      xm(j) -= h;
      const Vector fd = (drift(m, xp) - drift(m, xm)) / (2 * h);
      EXPECT_LT((fd - jac.col(j)).cwiseAbs().maxCoeff(), 1e-6);
    }
  }
}

TEST(Model, JsonRoundTrip) {
  const JumpModel m = load_model(kModels + "/phone_data.json");
  const JumpModel again = parse_model(model_to_json(m));
  const Vector x{{3.0, 7.0}};
  EXPECT_EQ((rates(m, x) - rates(again, x)).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(again.buffer_weights(), m.buffer_weights());
  EXPECT_EQ(again.drain(), m.drain());
}

TEST(Model, ParseAndIoErrors) {
  expect_kind(ErrorKind::ParseError, [] { parse_model("{not json"); });
  expect_kind(ErrorKind::ParseError, [] { parse_model(R"({"K":1})"); });
  expect_kind(ErrorKind::IoError, [] { load_model("/nonexistent/model.json"); });
}

TEST(Model, AffineRate) {
  const JumpModel m = load_model(kModels + "/closed_two_type_reduced.json");
  EXPECT_DOUBLE_EQ(rate(m, 0, Vector::Constant(1, 0.25)), 0.75);
  EXPECT_DOUBLE_EQ(rate(m, 1, Vector::Constant(1, 0.25)), 0.5);
  expect_kind(ErrorKind::DomainError, [&] { rate(m, 0, Vector::Constant(1, 1.5)); });
}

TEST(Model, FreezeEvaluatesAtAnchor) {
  const JumpModel m = birth_death(2.0, 3.0, 1.0);
  const FrozenModel f = freeze(m, Vector::Constant(1, 0.5));
  EXPECT_DOUBLE_EQ(f.rates()(0), 2.0);
  EXPECT_DOUBLE_EQ(f.rates()(1), 1.5);
}

TEST(Model, ScaledRates) {
  const JumpModel m = birth_death(2.0, 3.0, 1.0).with_scaled_rates(2.0);
  EXPECT_DOUBLE_EQ(rate(m, 0, Vector::Ones(1)), 4.0);
  EXPECT_DOUBLE_EQ(rate(m, 1, Vector::Ones(1)), 6.0);
}

}  // namespace
