#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "ldbuffer/model.hpp"

namespace ldb {

struct SimOptions {
  /// Per-coordinate state cap; default 10 * max(q_j, x0_j, 1). Jumps that
  /// would cross it are rejected and counted.
  std::optional<Vector> state_cap;
  double cap_factor = 10.0;
  double rate_cap = 1e12;  // total event rate n * sum lambda
  double burn_in = 0.0;    // run without buffer before the window starts
  unsigned threads = 0;    // 0 = LDBUFFER_THREADS or hardware
};

/// One trajectory of (z_n, b_n) recorded at event times. Entry 0 is t = 0;
/// the last entry is the stopping time (horizon, overflow or dead state).
struct SimRun {
  std::uint64_t seed = 0;
  int n = 1;
  std::vector<double> times;
  std::vector<Vector> states;    // z_n = X / n
  std::vector<double> buffer;    // b_n
  std::vector<int> transitions;  // index of the jump entering the entry, -1 for none
  std::optional<double> overflow_time;
  bool dead = false;   // total rate hit zero before the horizon
  int cap_hits = 0;
  std::size_t events = 0;
};

/// Exact event-driven simulation of the scaled chain. Between jumps the
/// buffer moves linearly and overflow (b_n >= B_stop) is located exactly.
SimRun ssa_simulate(const JumpModel& model, int n, const Vector& x0, double horizon,
                    double b_stop, std::uint64_t seed, const SimOptions& opts = {});

struct OverflowEstimate {
  int n = 0;
  double b_level = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t hits = 0;
  double p_hat = 0.0;
  double ci_low = 0.0;   // Wilson 95%
  double ci_high = 0.0;
  double log_rate = 0.0;       // -(1/n) ln p_hat, +inf when no hits
  double log_rate_low = 0.0;   // from ci_high
  double log_rate_high = 0.0;  // from ci_low
  std::uint64_t cap_hits = 0;
  std::uint64_t dead_runs = 0;
};

/// Plain Monte Carlo with trial i driven by stream (seed, i).
OverflowEstimate overflow_probability(const JumpModel& model, int n, const Vector& x0,
                                      double b_level, double horizon, std::uint64_t trials,
                                      std::uint64_t seed, const SimOptions& opts = {});

struct ConditionalPaths {
  std::vector<double> times;  // uniform mesh on [0, window]; overflow at the right edge
  Matrix mean;                // K x M
  std::vector<double> envelope;  // max_i |z_i(t) - mean(t)|_inf per mesh point
  double width = 0.0;            // max of envelope
  std::uint64_t hits = 0;        // overflowing trials seen
  std::uint64_t used = 0;        // hits entering the statistics
};

/// Aligns overflowing runs so that overflow completes at t = window; times
/// before the run started read as x0. Uses the first `max_hits` hits in trial
/// order. Throws TooFewHits below 10 hits.
ConditionalPaths conditional_paths(const JumpModel& model, int n, const Vector& x0,
                                   double b_level, double horizon, std::uint64_t trials,
                                   std::uint64_t seed, double window, int mesh = 200,
                                   std::uint64_t max_hits = 200, const SimOptions& opts = {});

struct EnsembleMean {
  std::vector<double> times;
  Matrix mean;  // K x M
};

/// Trial average of z_n on a uniform mesh of [0, horizon] (no buffer stop).
EnsembleMean ensemble_mean(const JumpModel& model, int n, const Vector& x0, double horizon,
                           std::uint64_t trials, std::uint64_t seed, int mesh = 100,
                           const SimOptions& opts = {});

/// CSV `t,x1..xK,b,event` with one row per recorded entry.
void write_run_csv(std::ostream& out, const SimRun& run);

}  // namespace ldb
