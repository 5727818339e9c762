#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "ldbuffer/model.hpp"

namespace ldb {

struct FluidTrajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  double step = 0.0;  // RK4 step after refinement
};

/// RK4 solution of dz/dt = v(z), sampled every `step` on [0, horizon]. The
/// internal step is halved until two successive refinements agree to `tol`
/// at every sample. Throws QuadrantEscape if z leaves the positive quadrant.
FluidTrajectory fluid_trajectory(const JumpModel& model, const Vector& x0, double horizon,
                                 double step, double tol = 1e-8);

struct AttractingPoint {
  Vector q;
  double residual = 0.0;  // |v(q)|_inf
  std::vector<std::complex<double>> eigenvalues;  // of the drift Jacobian at q
  bool stable = false;    // all real parts < 0
};

/// Root of v by damped Newton, seeded from a fluid run started at `seed`
/// (origin by default). Throws NoRoot, or DriftAtQViolation when <q,a> >= C.
AttractingPoint attracting_point(const JumpModel& model,
                                 const std::optional<Vector>& seed = std::nullopt);

enum class SteadyForm { OpenPoisson, ClosedMultinomial };

struct UpcrossResult {
  Vector x_star;
  double beta = 0.0;
  double entropy = 0.0;
  double residual = 0.0;         // sum_j a_j x_j - C
  bool hessian_positive = true;  // entropy Hessian restricted to the hyperplane
  // drift at x*, model form only
  double x_dot_v = 0.0;          // <x*, v(x*)>
  double a_dot_v = 0.0;          // <a, v(x*)>
};

/// Minimum-entropy point on <x,a> = C for the product-form steady state pi.
///
///   open:   x_j = pi_j e^{beta a_j},  D = sum x ln(x/pi) - x + pi
///   closed: x_j = P pi_j e^{beta a_j} / sum_k pi_k e^{beta a_k},
///           D = sum x ln(x / (P pi))
///
/// Throws InfeasibleHyperplane when C is below the steady-state rate or above
/// the largest attainable one.
UpcrossResult upcrossing_point(const Vector& pi, const Vector& a, double drain, SteadyForm form,
                               double population = 1.0);

/// Model form: pi defaults to q (open) or q / sum(q) with P = sum(q) (closed).
UpcrossResult upcrossing_point(const JumpModel& model, SteadyForm form,
                               const std::optional<Vector>& pi = std::nullopt,
                               double population = 0.0);

}  // namespace ldb
