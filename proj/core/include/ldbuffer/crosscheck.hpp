#pragma once

#include <string>

#include "ldbuffer/model.hpp"

namespace ldb {

/// One Markov-modulated fluid source: generator Q (m x m), fluid rate per
/// modulating state, stationary initial law.
struct SourceModel {
  Matrix Q;
  Vector rates;
  Vector initial;

  double mean_rate() const { return initial.dot(rates); }
  double peak_rate() const { return rates.maxCoeff(); }
};

/// Validates Q and solves pi Q = 0, sum pi = 1.
SourceModel make_source(const Matrix& Q, const Vector& rates);

/// {"Q": [[...], ...], "rates": [...]}
SourceModel parse_source(const std::string& json_text);
SourceModel load_source(const std::string& path);

/// ln E exp(theta A(t)) = ln(pi^T exp((Q + theta diag(rates)) t) 1). The
/// exponent is shifted by theta * peak (or the minimum rate for theta < 0)
/// so the matrix exponential stays bounded. Throws RangeError when the
/// result is not finite.
double log_mgf(const SourceModel& source, double theta, double t);

struct DecayRate {
  double rate = 0.0;  // +inf when the source can never exceed c
  double t_star = 0.0;
  double theta_star = 0.0;
  bool infinite = false;
};

struct DecayOptions {
  double t_rel_tol = 1e-10;
  double theta_rel_tol = 1e-12;
  double t_cap = 1e7;
};

/// inf_{t > 0} sup_{theta >= 0} theta (b + c t) - log_mgf(theta, t). The
/// inner problem is concave in theta; the outer minimum over t is located by
/// golden section on an expanding bracket. Throws NoInfimum when the
/// objective keeps decreasing up to t_cap.
DecayRate bd_decay_rate(const SourceModel& source, double b, double c,
                        const DecayOptions& opts = {});

}  // namespace ldb
