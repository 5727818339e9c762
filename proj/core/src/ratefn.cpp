#include "ldbuffer/ratefn.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "ldbuffer/error.hpp"

namespace ldb {

namespace {

constexpr double kExponentGuard = 700.0;
// A maximizer this far out means the dual is running off to infinity:
// y lies outside the cone spanned by the directions with nonzero rate.
constexpr double kUnboundedExponent = 600.0;

}  // namespace

HamiltonianEval hamiltonian(const Vector& rates, const Matrix& directions,
                            const Vector& theta) {
  const Eigen::Index k = directions.rows();
  HamiltonianEval out;
  out.gradient = Vector::Zero(k);
  out.hessian = Matrix::Zero(k, k);
  for (Eigen::Index i = 0; i < directions.cols(); ++i) {
    const double lam = rates(i);
    if (lam == 0.0) continue;
    const double s = theta.dot(directions.col(i));
    if (!(std::abs(s) <= kExponentGuard)) {
      std::ostringstream msg;
      msg << "exponent <theta, e_" << i << "> = " << s << " exceeds guard";
      fail(ErrorKind::RangeError, msg.str());
    }
    const double ex = std::exp(s);
    out.value += lam * std::expm1(s);
    out.gradient.noalias() += (lam * ex) * directions.col(i);
    out.hessian.noalias() += (lam * ex) * directions.col(i) * directions.col(i).transpose();
  }
  return out;
}

HamiltonianEval hamiltonian(const JumpModel& model, const Vector& x, const Vector& theta) {
  if (theta.size() != model.dim())
    fail(ErrorKind::InvalidArgument, "theta must have length K");
  if (!theta.allFinite()) fail(ErrorKind::InvalidArgument, "theta must be finite");
  return hamiltonian(rates(model, x), model.direction_matrix(), theta);
}

namespace {

double max_exponent(const Vector& rates, const Matrix& directions, const Vector& theta) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < directions.cols(); ++i)
    if (rates(i) != 0.0) m = std::max(m, std::abs(theta.dot(directions.col(i))));
  return m;
}

// Solves hess * d = rhs for a PSD hessian, adding Levenberg damping when the
// matrix is (numerically) singular, e.g. when the active directions do not span.
Vector damped_solve(const Matrix& hess, const Vector& rhs) {
  Eigen::LLT<Matrix> llt(hess);
  const double scale = std::max(hess.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  if (llt.info() == Eigen::Success) {
    const Eigen::Index k = hess.rows();
    // reject badly conditioned factorizations
    const Matrix& l = llt.matrixLLT();
    double min_piv = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < k; ++i) min_piv = std::min(min_piv, l(i, i) * l(i, i));
    if (min_piv > 1e-13 * scale) return llt.solve(rhs);
  }
  double mu = 1e-10 * scale;
  for (int attempt = 0; attempt < 40; ++attempt, mu *= 10.0) {
    Matrix reg = hess;
    reg.diagonal().array() += mu;
    Eigen::LLT<Matrix> damped(reg);
    if (damped.info() == Eigen::Success) return damped.solve(rhs);
  }
  return rhs / scale;
}

}  // namespace

DualSolve maximize_dual(const Vector& rates, const Matrix& directions, const Vector& y,
                        const DualOptions& opts, const std::optional<Vector>& theta0) {
  const Eigen::Index k = directions.rows();
  if (y.size() != k) fail(ErrorKind::InvalidArgument, "velocity y must have length K");
  if (!y.allFinite()) fail(ErrorKind::InvalidArgument, "velocity y must be finite");

  Vector theta = theta0 ? *theta0 : Vector::Zero(k);
  HamiltonianEval h;
  try {
    h = hamiltonian(rates, directions, theta);
  } catch (const Error&) {
    theta.setZero();
    h = hamiltonian(rates, directions, theta);
  }
  double f = theta.dot(y) - h.value;
  if (theta0 && f < 0.0) {
    // a warm start must not be worse than theta = 0
    theta.setZero();
    h = hamiltonian(rates, directions, theta);
    f = 0.0;
  }

  DualSolve out;
  const double scale = std::max({1.0, y.norm(), rates.cwiseAbs().sum()});
  for (int iter = 0; iter <= opts.max_iter; ++iter) {
    Vector g = y - h.gradient;
    const double gnorm = g.norm();
    out.iterations = iter;
    if (gnorm <= opts.grad_tol) {
      out.value = std::max(f, 0.0);
      out.theta_star = theta;
      out.grad_norm = gnorm;
      return out;
    }
    if (f > opts.value_cap || max_exponent(rates, directions, theta) > kUnboundedExponent)
      fail(ErrorKind::UnboundedDual,
           "dual objective unbounded: velocity is outside the attainable cone");
    if (iter == opts.max_iter) break;

    Vector d = damped_solve(h.hessian, g);
    const double slope = g.dot(d);
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      Vector trial = theta + t * d;
      HamiltonianEval ht;
      try {
        ht = hamiltonian(rates, directions, trial);
      } catch (const Error&) {
        continue;
      }
      const double ft = trial.dot(y) - ht.value;
      if (ft >= f + 1e-4 * t * slope - 1e-15 * (1.0 + std::abs(f))) {
        theta = std::move(trial);
        h = std::move(ht);
        f = ft;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // round-off floor: the step cannot improve the objective any further
      if (gnorm <= 1e4 * std::numeric_limits<double>::epsilon() * scale) {
        out.value = std::max(f, 0.0);
        out.theta_star = theta;
        out.grad_norm = gnorm;
        return out;
      }
      if (max_exponent(rates, directions, theta + d) > kUnboundedExponent)
        fail(ErrorKind::UnboundedDual,
             "dual objective unbounded: velocity is outside the attainable cone");
      break;
    }
  }
  std::ostringstream msg;
  msg << "dual ascent did not converge in " << opts.max_iter
      << " iterations (|grad| = " << (y - h.gradient).norm() << ")";
  fail(ErrorKind::NonConvergence, msg.str());
}

DualSolve local_cost(const JumpModel& model, const Vector& x, const Vector& y,
                     const DualOptions& opts) {
  return maximize_dual(rates(model, x), model.direction_matrix(), y, opts);
}

DualSolve local_cost(const FrozenModel& frozen, const Vector& y, const DualOptions& opts) {
  return maximize_dual(frozen.rates(), frozen.base->direction_matrix(), y, opts);
}

CostModel::CostModel(const JumpModel& model, Vector anchor, double zoom)
    : model_(&model),
      anchor_(std::move(anchor)),
      zoom_(zoom),
      directions_(model.direction_matrix()) {
  if (anchor_.size() != model.dim())
    fail(ErrorKind::InvalidArgument, "cost model anchor must have length K");
  if (zoom_ == 0.0) frozen_rates_ = freeze(model, anchor_).rates();
}

CostModel CostModel::state_dependent(const JumpModel& model) {
  return CostModel(model, Vector::Zero(model.dim()), 1.0);
}

CostModel CostModel::frozen(const FrozenModel& frozen) {
  return CostModel(*frozen.base, frozen.anchor, 0.0);
}

CostModel CostModel::zoomed(const JumpModel& model, const Vector& anchor, double zoom) {
  if (!(zoom >= 0.0)) fail(ErrorKind::InvalidArgument, "zoom must be nonnegative");
  return CostModel(model, anchor, zoom);
}

Vector CostModel::effective_state(const Vector& x) const {
  if (zoom_ == 0.0) return anchor_;
  if (zoom_ == 1.0) return x;
  return anchor_ + zoom_ * (x - anchor_);
}

Vector CostModel::rates_at(const Vector& x) const {
  if (zoom_ == 0.0) return frozen_rates_;
  return rates(*model_, effective_state(x));
}

DualSolve CostModel::cost(const Vector& x, const Vector& y,
                          const std::optional<Vector>& theta0) const {
  return maximize_dual(rates_at(x), directions_, y, options, theta0);
}

LocalCostDerivatives CostModel::derivatives(const Vector& x, const Vector& y,
                                            const std::optional<Vector>& theta0) const {
  const int k = dim();
  LocalCostDerivatives d;
  const Vector lam = rates_at(x);
  DualSolve dual = maximize_dual(lam, directions_, y, options, theta0);
  d.value = dual.value;
  d.theta = dual.theta_star;

  const HamiltonianEval h = hamiltonian(lam, directions_, d.theta);
  Eigen::LDLT<Matrix> ldlt(h.hessian);
  d.hess_yy = ldlt.solve(Matrix::Identity(k, k));

  d.grad_x = Vector::Zero(k);
  d.hess_yx = Matrix::Zero(k, k);
  d.hess_xx = Matrix::Zero(k, k);
  if (zoom_ == 0.0) return d;

  // H_x = sum grad(lambda_i) (e^{<theta,e_i>} - 1),  H_theta x = sum e^{..} e_i grad^T
  const Vector xe = effective_state(x);
  Vector h_x = Vector::Zero(k);
  Matrix h_tx = Matrix::Zero(k, k);
  for (std::size_t i = 0; i < model_->num_transitions(); ++i) {
    const Vector grad = rate_gradient(*model_, i, xe);
    if (grad.isZero(0.0)) continue;
    const auto e = directions_.col(static_cast<Eigen::Index>(i));
    const double s = d.theta.dot(e);
    h_x += std::expm1(s) * grad;
    h_tx += std::exp(s) * e * grad.transpose();
  }
  h_x *= zoom_;
  h_tx *= zoom_;
  d.grad_x = -h_x;
  d.hess_yx = -d.hess_yy * h_tx;
  d.hess_xx = h_tx.transpose() * d.hess_yy * h_tx;
  return d;
}

}  // namespace ldb
