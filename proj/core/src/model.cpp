#include "ldbuffer/model.hpp"

#include <cmath>
#include <sstream>

#include "ldbuffer/error.hpp"

namespace ldb {

RateFn RateFn::constant(double c) {
  RateFn r;
  r.kind = Kind::Constant;
  r.c = c;
  return r;
}

RateFn RateFn::monomial(double c, std::vector<int> exponents) {
  RateFn r;
  r.kind = Kind::Monomial;
  r.c = c;
  r.exponents = std::move(exponents);
  return r;
}

RateFn RateFn::affine(double c0, Vector lin) {
  RateFn r;
  r.kind = Kind::Affine;
  r.c0 = c0;
  r.lin = std::move(lin);
  return r;
}

JumpModel::JumpModel(int dim, std::vector<Transition> transitions,
                     Vector buffer_weights, double drain)
    : dim_(dim),
      transitions_(std::move(transitions)),
      a_(std::move(buffer_weights)),
      drain_(drain) {
  if (dim_ < 1) fail(ErrorKind::InvalidArgument, "K must be positive");
  if (a_.size() != dim_)
    fail(ErrorKind::InvalidArgument, "buffer weight vector a must have length K");
  for (std::size_t i = 0; i < transitions_.size(); ++i) {
    const Transition& t = transitions_[i];
    if (t.direction.size() != dim_)
      fail(ErrorKind::InvalidArgument,
           "transition " + std::to_string(i) + ": direction must have length K");
    const RateFn& r = t.rate;
    if (r.kind == RateFn::Kind::Monomial) {
      if (static_cast<int>(r.exponents.size()) != dim_)
        fail(ErrorKind::InvalidArgument,
             "transition " + std::to_string(i) + ": exponents must have length K");
      for (int m : r.exponents)
        if (m != 0 && m != 1)
          fail(ErrorKind::InvalidArgument,
               "transition " + std::to_string(i) + ": exponents must be 0 or 1");
    }
    if (r.kind == RateFn::Kind::Affine && r.lin.size() != dim_)
      fail(ErrorKind::InvalidArgument,
           "transition " + std::to_string(i) + ": affine coefficients must have length K");
  }
}

const Transition& JumpModel::transition(std::size_t i) const {
  if (i >= transitions_.size())
    fail(ErrorKind::IndexOutOfRange, "transition index " + std::to_string(i) +
                                         " out of range (J=" +
                                         std::to_string(transitions_.size()) + ")");
  return transitions_[i];
}

Matrix JumpModel::direction_matrix() const {
  Matrix e(dim_, static_cast<Eigen::Index>(transitions_.size()));
  for (std::size_t i = 0; i < transitions_.size(); ++i)
    e.col(static_cast<Eigen::Index>(i)) = transitions_[i].direction.cast<double>();
  return e;
}

JumpModel JumpModel::with_scaled_rates(double factor) const {
  std::vector<Transition> scaled = transitions_;
  for (auto& t : scaled) {
    t.rate.c *= factor;
    t.rate.c0 *= factor;
    if (t.rate.kind == RateFn::Kind::Affine) t.rate.lin *= factor;
  }
  return JumpModel(dim_, std::move(scaled), a_, drain_);
}

Vector FrozenModel::rates() const { return ldb::rates(*base, anchor); }

FrozenModel freeze(const JumpModel& model, const Vector& anchor) {
  if (anchor.size() != model.dim())
    fail(ErrorKind::InvalidArgument, "anchor must have length K");
  FrozenModel frozen{&model, anchor};
  Vector lam = frozen.rates();
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    if (!std::isfinite(lam(i)) || lam(i) < 0.0)
      fail(ErrorKind::DomainError, "frozen rate " + std::to_string(i) +
                                       " is not finite and nonnegative");
  return frozen;
}

namespace {

// Lawson-Hanson active set NNLS: argmin ||A x - b|| subject to x >= 0.
Vector nnls(const Matrix& A, const Vector& b) {
  const Eigen::Index n = A.cols();
  Vector x = Vector::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  const double tol = 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff());

  for (int outer = 0; outer < 3 * static_cast<int>(n) + 10; ++outer) {
    Vector w = A.transpose() * (b - A * x);
    Eigen::Index best = -1;
    double best_w = tol;
    for (Eigen::Index j = 0; j < n; ++j)
      if (!passive[static_cast<std::size_t>(j)] && w(j) > best_w) {
        best_w = w(j);
        best = j;
      }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;

    for (int inner = 0; inner < 3 * static_cast<int>(n) + 10; ++inner) {
      std::vector<Eigen::Index> idx;
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
      Matrix Ap(A.rows(), static_cast<Eigen::Index>(idx.size()));
      for (std::size_t k = 0; k < idx.size(); ++k)
        Ap.col(static_cast<Eigen::Index>(k)) = A.col(idx[k]);
      Vector zp = Ap.completeOrthogonalDecomposition().solve(b);
      Vector z = Vector::Zero(n);
      for (std::size_t k = 0; k < idx.size(); ++k)
        z(idx[k]) = zp(static_cast<Eigen::Index>(k));

      bool all_positive = true;
      for (Eigen::Index j : idx)
        if (z(j) <= 0.0) all_positive = false;
      if (all_positive) {
        x = z;
        break;
      }
      double alpha = 1.0;
      for (Eigen::Index j : idx)
        if (z(j) <= 0.0) alpha = std::min(alpha, x(j) / (x(j) - z(j)));
      x += alpha * (z - x);
      for (Eigen::Index j : idx)
        if (x(j) <= tol) {
          x(j) = 0.0;
          passive[static_cast<std::size_t>(j)] = false;
        }
    }
  }
  return x;
}

}  // namespace

bool positively_spans(const Matrix& directions) {
  const Eigen::Index k = directions.rows();
  if (directions.cols() == 0) return false;
  for (Eigen::Index j = 0; j < k; ++j) {
    for (double sign : {1.0, -1.0}) {
      Vector target = Vector::Zero(k);
      target(j) = sign;
      Vector beta = nnls(directions, target);
      if ((directions * beta - target).norm() > 1e-9) return false;
    }
  }
  return true;
}

ValidationReport validate(const JumpModel& model) {
  ValidationReport report;
  const auto& ts = model.transitions();
  if (ts.empty()) report.failures.push_back("model has no transitions");
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts[i].direction.cwiseAbs().maxCoeff() == 0)
      report.failures.push_back("transition " + std::to_string(i) +
                                ": direction e_i is the zero vector");
    const RateFn& r = ts[i].rate;
    if (r.kind == RateFn::Kind::Affine) {
      if (!std::isfinite(r.c0) || !r.lin.allFinite())
        report.failures.push_back("transition " + std::to_string(i) +
                                  ": affine rate coefficients must be finite");
    } else if (!(r.c >= 0.0) || !std::isfinite(r.c)) {
      report.failures.push_back("transition " + std::to_string(i) +
                                ": rate coefficient c must be finite and >= 0");
    }
  }
  if (!ts.empty() && !positively_spans(model.direction_matrix()))
    report.failures.push_back("positive cone of the directions does not span R^K");
  for (Eigen::Index j = 0; j < model.buffer_weights().size(); ++j)
    if (!(model.buffer_weights()(j) > 0.0))
      report.failures.push_back("buffer weight a_" + std::to_string(j) +
                                " must be strictly positive");
  if (!(model.drain() >= 0.0) || !std::isfinite(model.drain()))
    report.failures.push_back("drain rate C must be finite and >= 0");
  return report;
}

namespace {

void check_state(const JumpModel& model, const Vector& x) {
  if (x.size() != model.dim())
    fail(ErrorKind::InvalidArgument, "state must have length K");
  for (Eigen::Index j = 0; j < x.size(); ++j)
    if (!(x(j) >= 0.0)) {
      std::ostringstream msg;
      msg << "rate evaluated outside the positive quadrant: x_" << j << " = " << x(j);
      fail(ErrorKind::DomainError, msg.str());
    }
}

double eval_rate(const RateFn& r, const Vector& x) {
  switch (r.kind) {
    case RateFn::Kind::Constant:
      return r.c;
    case RateFn::Kind::Monomial: {
      double v = r.c;
      for (std::size_t j = 0; j < r.exponents.size(); ++j)
        if (r.exponents[j] == 1) v *= x(static_cast<Eigen::Index>(j));
      return v;
    }
    case RateFn::Kind::Affine:
      return r.c0 + r.lin.dot(x);
  }
  return 0.0;
}

}  // namespace

double rate(const JumpModel& model, std::size_t i, const Vector& x) {
  const Transition& t = model.transition(i);
  check_state(model, x);
  double v = eval_rate(t.rate, x);
  if (v < 0.0) {
    // affine rates may round to a tiny negative value on the boundary
    if (v > -1e-12 * (1.0 + std::abs(t.rate.c0))) return 0.0;
    fail(ErrorKind::DomainError,
         "rate " + std::to_string(i) + " is negative at the given state");
  }
  return v;
}

Vector rates(const JumpModel& model, const Vector& x) {
  Vector out(static_cast<Eigen::Index>(model.num_transitions()));
  for (std::size_t i = 0; i < model.num_transitions(); ++i)
    out(static_cast<Eigen::Index>(i)) = rate(model, i, x);
  return out;
}

Vector rate_gradient(const JumpModel& model, std::size_t i, const Vector& x) {
  const RateFn& r = model.transition(i).rate;
  const int k = model.dim();
  Vector g = Vector::Zero(k);
  switch (r.kind) {
    case RateFn::Kind::Constant:
      break;
    case RateFn::Kind::Monomial:
      for (int j = 0; j < k; ++j) {
        if (r.exponents[static_cast<std::size_t>(j)] != 1) continue;
        double v = r.c;
        for (int m = 0; m < k; ++m)
          if (m != j && r.exponents[static_cast<std::size_t>(m)] == 1) v *= x(m);
        g(j) = v;
      }
      break;
    case RateFn::Kind::Affine:
      g = r.lin;
      break;
  }
  return g;
}

Vector drift(const JumpModel& model, const Vector& x) {
  Vector v = Vector::Zero(model.dim());
  for (std::size_t i = 0; i < model.num_transitions(); ++i)
    v += rate(model, i, x) * model.transition(i).direction.cast<double>();
  return v;
}

Matrix drift_jacobian(const JumpModel& model, const Vector& x) {
  Matrix jac = Matrix::Zero(model.dim(), model.dim());
  for (std::size_t i = 0; i < model.num_transitions(); ++i)
    jac += model.transition(i).direction.cast<double>() *
           rate_gradient(model, i, x).transpose();
  return jac;
}

}  // namespace ldb
