#pragma once

#include <optional>

#include "ldbuffer/model.hpp"

namespace ldb {

struct HamiltonianEval {
  double value = 0.0;
  Vector gradient;
  Matrix hessian;
};

/// H(theta) = sum_i rate_i (exp<theta, e_i> - 1) with gradient and Hessian.
/// Terms with rate_i == 0 are dropped. Throws RangeError if an active
/// exponent exceeds 700 in magnitude.
HamiltonianEval hamiltonian(const Vector& rates, const Matrix& directions,
                            const Vector& theta);
HamiltonianEval hamiltonian(const JumpModel& model, const Vector& x, const Vector& theta);

struct DualOptions {
  double grad_tol = 1e-10;
  int max_iter = 200;
  double value_cap = 1e12;
};

/// Result of maximizing <theta, y> - H(x, theta) over theta.
struct DualSolve {
  double value = 0.0;  // l(x, y)
  Vector theta_star;
  double grad_norm = 0.0;
  int iterations = 0;
};

/// Damped Newton ascent from `theta0` (zero by default). Throws
/// NonConvergence or UnboundedDual.
DualSolve maximize_dual(const Vector& rates, const Matrix& directions, const Vector& y,
                        const DualOptions& opts = {},
                        const std::optional<Vector>& theta0 = std::nullopt);

/// l(x, y) for the state-dependent model.
DualSolve local_cost(const JumpModel& model, const Vector& x, const Vector& y,
                     const DualOptions& opts = {});

/// l(x_bar, y) for a frozen model.
DualSolve local_cost(const FrozenModel& frozen, const Vector& y, const DualOptions& opts = {});

/// Second-order information of l at (x, y), expressed through theta*.
struct LocalCostDerivatives {
  double value = 0.0;
  Vector theta;    // dl/dy
  Vector grad_x;   // dl/dx
  Matrix hess_yy;  // (d^2 H / d theta^2)^{-1}
  Matrix hess_yx;  // d theta* / dx
  Matrix hess_xx;  // H_x theta W H_theta x (the -H_xx term is omitted)
};

/// Local cost seen through an anchor map:
///
///   l_eff(x, y) = l(anchor + zoom * (x - anchor), y)
///
/// zoom = 1 with any anchor is the state-dependent model, zoom = 0 freezes
/// the rates at the anchor, and zoom = sqrt(B) is the small-buffer cost used
/// for rescaled paths.
class CostModel {
 public:
  static CostModel state_dependent(const JumpModel& model);
  static CostModel frozen(const FrozenModel& frozen);
  static CostModel zoomed(const JumpModel& model, const Vector& anchor, double zoom);

  const JumpModel& model() const noexcept { return *model_; }
  const Vector& anchor() const noexcept { return anchor_; }
  double zoom() const noexcept { return zoom_; }
  bool is_frozen() const noexcept { return zoom_ == 0.0; }
  int dim() const noexcept { return model_->dim(); }

  Vector effective_state(const Vector& x) const;
  Vector rates_at(const Vector& x) const;

  DualSolve cost(const Vector& x, const Vector& y,
                 const std::optional<Vector>& theta0 = std::nullopt) const;
  LocalCostDerivatives derivatives(const Vector& x, const Vector& y,
                                   const std::optional<Vector>& theta0 = std::nullopt) const;

  DualOptions options;

 private:
  CostModel(const JumpModel& model, Vector anchor, double zoom);

  const JumpModel* model_;
  Vector anchor_;
  double zoom_;
  Matrix directions_;
  Vector frozen_rates_;  // filled when zoom == 0
};

}  // namespace ldb
