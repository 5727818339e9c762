#include "ldbuffer/crosscheck.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "ldbuffer/error.hpp"

namespace ldb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kInvPhi = (std::sqrt(5.0) - 1.0) / 2.0;

}  // namespace

SourceModel make_source(const Matrix& Q, const Vector& rates) {
  const Eigen::Index m = Q.rows();
  if (m < 1 || Q.cols() != m) fail(ErrorKind::InvalidArgument, "Q must be square");
  if (m > 50) fail(ErrorKind::InvalidArgument, "sources are limited to 50 states");
  if (rates.size() != m) fail(ErrorKind::InvalidArgument, "rates must have one entry per state");
  if (!Q.allFinite() || !rates.allFinite())
    fail(ErrorKind::InvalidArgument, "Q and rates must be finite");
  const double scale = std::max(1.0, Q.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j)
      if (i != j && Q(i, j) < 0.0) fail(ErrorKind::InvalidArgument, "Q has a negative off-diagonal");
    if (std::abs(Q.row(i).sum()) > 1e-12 * scale)
      fail(ErrorKind::InvalidArgument, "Q rows must sum to zero");
  }
  // pi Q = 0 with the last equation replaced by normalization
  Matrix sys = Q.transpose();
  sys.row(m - 1).setOnes();
  Vector rhs = Vector::Zero(m);
  rhs(m - 1) = 1.0;
  Eigen::FullPivLU<Matrix> lu(sys);
  if (!lu.isInvertible())
    fail(ErrorKind::InvalidArgument, "Q has no unique stationary distribution");
  Vector pi = lu.solve(rhs);
  if ((pi.array() < -1e-12).any())
    fail(ErrorKind::InvalidArgument, "stationary distribution has negative mass");
  pi = pi.cwiseMax(0.0);
  pi /= pi.sum();
  return SourceModel{Q, rates, pi};
}

SourceModel parse_source(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ParseError, std::string("source JSON: ") + e.what());
  }
  try {
    const auto& q = j.at("Q");
    const auto& r = j.at("rates");
    const auto m = static_cast<Eigen::Index>(q.size());
    Matrix Q(m, m);
    Vector rates(static_cast<Eigen::Index>(r.size()));
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& row = q.at(static_cast<std::size_t>(i));
      if (static_cast<Eigen::Index>(row.size()) != m)
        fail(ErrorKind::ParseError, "source JSON: Q must be square");
      for (Eigen::Index k = 0; k < m; ++k) Q(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
    }
    for (Eigen::Index i = 0; i < rates.size(); ++i) rates(i) = r.at(static_cast<std::size_t>(i)).get<double>();
    return make_source(Q, rates);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ParseError, std::string("source JSON: ") + e.what());
  }
}

SourceModel load_source(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot open source file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_source(ss.str());
}

double log_mgf(const SourceModel& source, double theta, double t) {
  if (!(t >= 0.0)) fail(ErrorKind::InvalidArgument, "t must be nonnegative");
  if (!std::isfinite(theta)) fail(ErrorKind::InvalidArgument, "theta must be finite");
  if (theta == 0.0 || t == 0.0) return 0.0;
  const double shift = theta > 0.0 ? source.rates.maxCoeff() : source.rates.minCoeff();
  const Eigen::Index m = source.Q.rows();
  Matrix gen = source.Q;
  gen.diagonal() += theta * (source.rates.array() - shift).matrix();
  const Matrix e = (gen * t).exp();
  const double mass = source.initial.dot(e * Vector::Ones(m));
  const double out = theta * shift * t + std::log(mass);
  if (!std::isfinite(out) || !(mass > 0.0)) {
    std::ostringstream msg;
    msg << "log-mgf out of range at theta = " << theta << ", t = " << t;
    fail(ErrorKind::RangeError, msg.str());
  }
  return out;
}

namespace {

struct Inner {
  double value;
  double theta;
};

// sup over theta >= 0 of theta * level - log_mgf(theta, t); concave.
Inner inner_sup(const SourceModel& source, double level, double t, double tol) {
  auto f = [&](double th) { return th * level - log_mgf(source, th, t); };
  const double spread = std::max(1e-12, source.peak_rate() - source.rates.minCoeff());
  double step = 1.0 / (spread * t);
  double lo = 0.0;
  double mid = step;
  double f_mid = f(mid);
  if (f_mid <= 0.0) {
    // maximum inside [0, step]
    lo = 0.0;
  } else {
    double hi = 2.0 * mid;
    double f_hi = f(hi);
    while (f_hi > f_mid) {
      lo = mid;
      mid = hi;
      f_mid = f_hi;
      hi *= 2.0;
      if (hi > 1e12) return Inner{kInf, kInf};
      f_hi = f(hi);
    }
    step = hi;
  }
  double a = lo;
  double b = step;
  double x1 = b - kInvPhi * (b - a);
  double x2 = a + kInvPhi * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  while (b - a > tol * std::max(1.0, x1)) {
    if (f1 >= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = f(x2);
    }
  }
  const double th = f1 >= f2 ? x1 : x2;
  return Inner{std::max(0.0, std::max(f1, f2)), th};
}

}  // namespace

DecayRate bd_decay_rate(const SourceModel& source, double b, double c, const DecayOptions& opts) {
  if (!(b > 0.0)) fail(ErrorKind::InvalidArgument, "b must be positive");
  if (!(c > source.mean_rate()))
    fail(ErrorKind::InvalidArgument, "c must exceed the stationary mean rate");
  DecayRate out;
  const double peak = source.peak_rate();
  if (peak <= c) {
    out.rate = kInf;
    out.infinite = true;
    return out;
  }
  // for t <= t0 the inner supremum is infinite
  const double t0 = b / (peak - c);
  auto g = [&](double t) { return inner_sup(source, b + c * t, t, opts.theta_rel_tol).value; };

  // coarse scan on t = t0 (1 + s), s doubling
  std::vector<double> ts;
  std::vector<double> gs;
  for (double s = 1.0 / 1024.0;; s *= 2.0) {
    const double t = t0 * (1.0 + s);
    if (t > opts.t_cap) {
      std::ostringstream msg;
      msg << "objective still decreasing at t = " << t0 * (1.0 + s / 2.0);
      fail(ErrorKind::NoInfimum, msg.str());
    }
    ts.push_back(t);
    gs.push_back(g(t));
    const std::size_t n = gs.size();
    if (n >= 2 && gs[n - 1] >= gs[n - 2]) break;
  }
  const std::size_t n = gs.size();
  double lo = n >= 3 ? ts[n - 3] : t0;
  double hi = ts[n - 1];
  double x1 = hi - kInvPhi * (hi - lo);
  double x2 = lo + kInvPhi * (hi - lo);
  double f1 = g(x1);
  double f2 = g(x2);
  while (hi - lo > opts.t_rel_tol * x1) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kInvPhi * (hi - lo);
      f1 = g(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvPhi * (hi - lo);
      f2 = g(x2);
    }
  }
  out.t_star = f1 <= f2 ? x1 : x2;
  const Inner best = inner_sup(source, b + c * out.t_star, out.t_star, opts.theta_rel_tol);
  out.rate = best.value;
  out.theta_star = best.theta;
  return out;
}

}  // namespace ldb
