#include "ldbuffer/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "ldbuffer/error.hpp"

namespace ldb {

namespace {

// Drift evaluated at the quadrant projection; the exact solution never
// leaves the quadrant, intermediate RK stages may.
Vector drift_clamped(const JumpModel& model, const Vector& x) {
  return drift(model, x.cwiseMax(0.0));
}

Vector rk4_step(const JumpModel& model, const Vector& x, double h) {
  const Vector k1 = drift_clamped(model, x);
  const Vector k2 = drift_clamped(model, x + 0.5 * h * k1);
  const Vector k3 = drift_clamped(model, x + 0.5 * h * k2);
  const Vector k4 = drift_clamped(model, x + h * k3);
  return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

std::vector<Vector> integrate(const JumpModel& model, const Vector& x0, int samples,
                              double sample_step, int substeps) {
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(samples) + 1);
  out.push_back(x0);
  Vector x = x0;
  const double h = sample_step / substeps;
  for (int s = 0; s < samples; ++s) {
    for (int i = 0; i < substeps; ++i) x = rk4_step(model, x, h);
    if (!x.allFinite()) fail(ErrorKind::QuadrantEscape, "fluid trajectory diverged");
    out.push_back(x);
  }
  return out;
}

}  // namespace

FluidTrajectory fluid_trajectory(const JumpModel& model, const Vector& x0, double horizon,
                                 double step, double tol) {
  if (x0.size() != model.dim()) fail(ErrorKind::InvalidArgument, "x0 must have length K");
  if ((x0.array() < 0.0).any()) fail(ErrorKind::InvalidArgument, "x0 must be nonnegative");
  if (!(horizon > 0.0) || !(step > 0.0))
    fail(ErrorKind::InvalidArgument, "horizon and step must be positive");
  const int samples = std::max(1, static_cast<int>(std::ceil(horizon / step - 1e-9)));
  const double sample_step = horizon / samples;

  int substeps = 1;
  std::vector<Vector> coarse = integrate(model, x0, samples, sample_step, substeps);
  for (;;) {
    if (substeps > (1 << 20)) fail(ErrorKind::NonConvergence, "RK4 refinement did not settle");
    std::vector<Vector> fine = integrate(model, x0, samples, sample_step, 2 * substeps);
    substeps *= 2;
    double diff = 0.0;
    for (std::size_t i = 0; i < fine.size(); ++i)
      diff = std::max(diff, (fine[i] - coarse[i]).cwiseAbs().maxCoeff());
    coarse = std::move(fine);
    if (diff <= tol) break;
  }

  FluidTrajectory out;
  out.step = sample_step / substeps;
  for (int s = 0; s <= samples; ++s) {
    Vector& x = coarse[static_cast<std::size_t>(s)];
    const double slack = 1e-9 * (1.0 + x.cwiseAbs().maxCoeff());
    if ((x.array() < -slack).any()) {
      std::ostringstream msg;
      msg << "fluid trajectory left the positive quadrant at t = " << s * sample_step;
      fail(ErrorKind::QuadrantEscape, msg.str());
    }
    x = x.cwiseMax(0.0);
    out.times.push_back(s == samples ? horizon : s * sample_step);
    out.states.push_back(x);
  }
  return out;
}

AttractingPoint attracting_point(const JumpModel& model, const std::optional<Vector>& seed) {
  const int k = model.dim();
  Vector x = seed ? *seed : Vector::Zero(k);
  if (x.size() != k) fail(ErrorKind::InvalidArgument, "seed must have length K");
  x = integrate(model, x.cwiseMax(0.0), 500, 0.1, 4).back().cwiseMax(0.0);

  auto residual = [&](const Vector& z) { return drift(model, z).squaredNorm(); };
  double r = residual(x);
  for (int it = 0; it < 200 && r > 1e-26; ++it) {
    const Vector v = drift(model, x);
    const Matrix jac = drift_jacobian(model, x);
    Eigen::FullPivLU<Matrix> lu(jac);
    if (!lu.isInvertible()) fail(ErrorKind::NoRoot, "drift Jacobian is singular; no isolated root");
    const Vector d = -lu.solve(v);
    double t = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      const Vector trial = x + t * d;
      if ((trial.array() < 0.0).any()) continue;
      const double rt = residual(trial);
      if (rt < r) {
        x = trial;
        r = rt;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  AttractingPoint out;
  out.q = x;
  out.residual = drift(model, x).cwiseAbs().maxCoeff();
  const double scale = 1.0 + rates(model, x).cwiseAbs().maxCoeff();
  if (!(out.residual <= 1e-10 * scale)) {
    std::ostringstream msg;
    msg << "no root of the drift found (|v| = " << out.residual << ")";
    fail(ErrorKind::NoRoot, msg.str());
  }
  Eigen::EigenSolver<Matrix> eig(drift_jacobian(model, x));
  out.stable = true;
  for (Eigen::Index i = 0; i < k; ++i) {
    out.eigenvalues.push_back(eig.eigenvalues()(i));
    if (!(eig.eigenvalues()(i).real() < 0.0)) out.stable = false;
  }
  if (x.dot(model.buffer_weights()) >= model.drain()) {
    std::ostringstream msg;
    msg << "<q,a> = " << x.dot(model.buffer_weights()) << " is not below C = " << model.drain();
    fail(ErrorKind::DriftAtQViolation, msg.str());
  }
  return out;
}

namespace {

Vector tilted(const Vector& pi, const Vector& a, double beta, SteadyForm form, double population) {
  Vector w = (beta * a).array().exp() * pi.array();
  if (form == SteadyForm::ClosedMultinomial) w *= population / w.sum();
  return w;
}

double entropy_of(const Vector& x, const Vector& pi, SteadyForm form, double population) {
  double d = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (form == SteadyForm::OpenPoisson) {
      if (x(j) > 0.0) d += x(j) * std::log(x(j) / pi(j));
      d += pi(j) - x(j);
    } else if (x(j) > 0.0) {
      d += x(j) * std::log(x(j) / (population * pi(j)));
    }
  }
  return std::max(d, 0.0);
}

}  // namespace

UpcrossResult upcrossing_point(const Vector& pi, const Vector& a, double drain, SteadyForm form,
                               double population) {
  if (pi.size() != a.size() || pi.size() == 0)
    fail(ErrorKind::InvalidArgument, "pi and a must have equal length");
  if ((pi.array() < 0.0).any() || !(pi.sum() > 0.0))
    fail(ErrorKind::InvalidArgument, "pi must be nonnegative and nonzero");
  if (form == SteadyForm::ClosedMultinomial && !(population > 0.0))
    fail(ErrorKind::InvalidArgument, "population must be positive");

  Vector p = pi;
  if (form == SteadyForm::ClosedMultinomial) p /= pi.sum();
  auto excess = [&](double beta) { return tilted(p, a, beta, form, population).dot(a) - drain; };

  const double base = excess(0.0);
  if (base > 1e-12 * (1.0 + std::abs(drain))) {
    std::ostringstream msg;
    msg << "C = " << drain << " lies below the steady-state rate " << drain + base;
    fail(ErrorKind::InfeasibleHyperplane, msg.str());
  }
  double top = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < a.size(); ++j)
    if (p(j) > 0.0) top = std::max(top, a(j));
  if (form == SteadyForm::ClosedMultinomial && !(drain < population * top)) {
    fail(ErrorKind::InfeasibleHyperplane, "C is not below the largest attainable rate");
  }

  // excess is increasing in beta; expand then bisect with Newton steps
  double lo = 0.0;
  double hi = 0.0;
  if (base < 0.0) {
    hi = 1.0 / std::max(a.cwiseAbs().maxCoeff(), 1e-300);
    while (excess(hi) < 0.0) {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e6 / std::max(a.cwiseAbs().minCoeff(), 1e-300) || !std::isfinite(excess(hi)))
        fail(ErrorKind::InfeasibleHyperplane, "hyperplane is not reachable");
    }
  }
  double beta = lo;
  if (hi > lo) {
    beta = 0.5 * (lo + hi);
    for (int it = 0; it < 300; ++it) {
      const Vector x = tilted(p, a, beta, form, population);
      const double f = x.dot(a) - drain;
      if (std::abs(f) <= 1e-12 * std::max(1.0, std::abs(drain))) break;
      if (f > 0.0) hi = beta; else lo = beta;
      double slope = (x.array() * a.array().square()).sum();
      if (form == SteadyForm::ClosedMultinomial) slope -= x.dot(a) * x.dot(a) / population;
      double next = slope > 0.0 ? beta - f / slope : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(hi)) break;
      beta = next;
    }
  }

  UpcrossResult out;
  out.beta = beta;
  out.x_star = tilted(p, a, beta, form, population);
  out.residual = out.x_star.dot(a) - drain;
  out.entropy = entropy_of(out.x_star, p, form, population);

  // Hessian diag(1/x) restricted to the constraint set
  Matrix cons(form == SteadyForm::ClosedMultinomial ? 2 : 1, a.size());
  cons.row(0) = a.transpose();
  if (cons.rows() == 2) cons.row(1).setOnes();
  Eigen::FullPivLU<Matrix> lu(cons);
  const Matrix basis = lu.kernel();
  if (basis.cols() > 0 && !basis.isZero(0.0)) {
    Vector inv(a.size());
    for (Eigen::Index j = 0; j < a.size(); ++j)
      inv(j) = out.x_star(j) > 0.0 ? 1.0 / out.x_star(j) : 0.0;
    const Matrix reduced = basis.transpose() * inv.asDiagonal() * basis;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(reduced);
    out.hessian_positive = eig.eigenvalues().minCoeff() > 0.0;
  }
  return out;
}

UpcrossResult upcrossing_point(const JumpModel& model, SteadyForm form,
                               const std::optional<Vector>& pi, double population) {
  Vector steady;
  if (pi) {
    steady = *pi;
  } else {
    steady = attracting_point(model).q;
  }
  double pop = population;
  if (form == SteadyForm::ClosedMultinomial && !(pop > 0.0)) pop = steady.sum();
  UpcrossResult out =
      upcrossing_point(steady, model.buffer_weights(), model.drain(), form, pop);
  const Vector v = drift(model, out.x_star);
  out.x_dot_v = out.x_star.dot(v);
  out.a_dot_v = model.buffer_weights().dot(v);
  return out;
}

}  // namespace ldb
