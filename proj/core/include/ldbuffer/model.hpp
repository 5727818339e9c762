#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ldb {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IntVector = Eigen::VectorXi;

/// Jump-rate function lambda(x).
///
///   Constant:  lambda(x) = c
///   Monomial:  lambda(x) = c * prod_j x_j^{m_j},  m_j in {0,1}
///   Affine:    lambda(x) = c0 + <lin, x>
///
/// The affine form only exists to express closed populations in reduced
/// coordinates (e.g. gamma * (1 - x)); it must stay nonnegative on the
/// region the model is used on.
struct RateFn {
  enum class Kind { Constant, Monomial, Affine };

  Kind kind = Kind::Constant;
  double c = 0.0;
  std::vector<int> exponents;  // Monomial: length K, entries 0/1
  double c0 = 0.0;             // Affine
  Vector lin;                  // Affine: length K

  static RateFn constant(double c);
  static RateFn monomial(double c, std::vector<int> exponents);
  static RateFn affine(double c0, Vector lin);
};

struct Transition {
  IntVector direction;
  RateFn rate;
};

struct ValidationReport {
  std::vector<std::string> failures;
  bool ok() const noexcept { return failures.empty(); }
};

/// Markov jump-process traffic model with a single fluid buffer.
///
/// State x lives in the closed positive orthant of R^K. Transition i moves the
/// state by e_i at rate lambda_i(x). The buffer fills at <x, a> and drains at C.
/// Immutable once built.
class JumpModel {
 public:
  /// Throws InvalidArgument on shape mismatches; semantic checks (cone
  /// spanning, positivity of a) are left to validate().
  JumpModel(int dim, std::vector<Transition> transitions, Vector buffer_weights,
            double drain);

  int dim() const noexcept { return dim_; }
  std::size_t num_transitions() const noexcept { return transitions_.size(); }
  const std::vector<Transition>& transitions() const noexcept { return transitions_; }
  const Transition& transition(std::size_t i) const;
  const Vector& buffer_weights() const noexcept { return a_; }
  double drain() const noexcept { return drain_; }

  /// Directions as the columns of a K x J matrix.
  Matrix direction_matrix() const;

  /// Same structure, every rate coefficient multiplied by `factor`.
  JumpModel with_scaled_rates(double factor) const;

 private:
  int dim_;
  std::vector<Transition> transitions_;
  Vector a_;
  double drain_;
};

/// Rates frozen at an anchor point; the local cost no longer depends on x.
struct FrozenModel {
  const JumpModel* base = nullptr;
  Vector anchor;

  Vector rates() const;
};

FrozenModel freeze(const JumpModel& model, const Vector& anchor);

ValidationReport validate(const JumpModel& model);

/// True when nonnegative combinations of the directions reach every signed
/// unit vector.
bool positively_spans(const Matrix& directions);

/// lambda_i(x). Throws IndexOutOfRange, or DomainError when x has a negative
/// component or the rate evaluates negative.
double rate(const JumpModel& model, std::size_t i, const Vector& x);

/// All J rates at x.
Vector rates(const JumpModel& model, const Vector& x);

/// d lambda_i / dx (length K).
Vector rate_gradient(const JumpModel& model, std::size_t i, const Vector& x);

/// v(x) = sum_i lambda_i(x) e_i.
Vector drift(const JumpModel& model, const Vector& x);

/// Jacobian of v at x (K x K).
Matrix drift_jacobian(const JumpModel& model, const Vector& x);

/// Reads the JSON model file:
///   {"K":int, "transitions":[{"e":[...], "rate":{...}}], "a":[...], "C":num}
/// where rate is {"c":num, "m":[0|1,...]} (constant when m is all zero or
/// absent) or {"c0":num, "lin":[...]} for the affine kind.
JumpModel load_model(const std::string& path);
JumpModel parse_model(const std::string& json_text);
std::string model_to_json(const JumpModel& model);

}  // namespace ldb
