#include "ldbuffer/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "ldbuffer/equilibrium.hpp"
#include "ldbuffer/error.hpp"
#include "ldbuffer/parallel.hpp"
#include "ldbuffer/rng.hpp"

namespace ldb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Context {
  const JumpModel& model;
  int n;
  Vector counts0;
  Vector cap;  // in counts
  double horizon;
  double b_stop;
  const SimOptions& opts;
};

Context make_context(const JumpModel& model, int n, const Vector& x0, double horizon,
                     double b_stop, const SimOptions& opts) {
  if (n < 1) fail(ErrorKind::InvalidArgument, "n must be >= 1");
  if (x0.size() != model.dim()) fail(ErrorKind::InvalidArgument, "x0 must have length K");
  if (!(horizon >= 0.0)) fail(ErrorKind::InvalidArgument, "horizon must be nonnegative");
  Vector counts = (x0 * n).array().round();
  if ((counts.array() < 0.0).any())
    fail(ErrorKind::InvalidArgument, "x0 must lie in the positive quadrant");
  if ((counts - x0 * n).cwiseAbs().maxCoeff() > 1e-9 * n * (1.0 + x0.cwiseAbs().maxCoeff()))
    fail(ErrorKind::InvalidArgument, "x0 must lie on the lattice (1/n) Z^K");

  Vector cap;
  if (opts.state_cap) {
    if (opts.state_cap->size() != model.dim())
      fail(ErrorKind::InvalidArgument, "state cap must have length K");
    cap = *opts.state_cap;
  } else {
    Vector ref = x0.cwiseMax(1.0);
    try {
      ref = ref.cwiseMax(attracting_point(model).q);
    } catch (const Error&) {
    }
    cap = opts.cap_factor * ref;
  }
  return Context{model, n, counts, (cap * n).array().floor(), horizon, b_stop, opts};
}

struct Sampler {
  const std::vector<double>* mesh = nullptr;
  Matrix* out = nullptr;  // K x M, accumulates
  std::size_t next = 0;

  void advance(double until, const Vector& z) {
    if (!mesh) return;
    while (next < mesh->size() && (*mesh)[next] < until) out->col(static_cast<Eigen::Index>(next++)) += z;
  }
  void finish(const Vector& z) {
    if (!mesh) return;
    while (next < mesh->size()) out->col(static_cast<Eigen::Index>(next++)) += z;
  }
};

// Rates in a flat form for the event loop (no allocation per event).
struct Kernel {
  int dim = 0;
  int jumps = 0;
  std::vector<int> dirs;            // jumps x dim, row-major
  std::vector<RateFn::Kind> kind;
  std::vector<double> coef;         // c or c0
  std::vector<std::vector<int>> factors;  // monomial coordinates
  std::vector<std::vector<double>> lin;   // affine weights

  explicit Kernel(const JumpModel& model) : dim(model.dim()) {
    jumps = static_cast<int>(model.num_transitions());
    for (const Transition& t : model.transitions()) {
      for (int j = 0; j < dim; ++j) dirs.push_back(t.direction(j));
      kind.push_back(t.rate.kind);
      std::vector<int> f;
      std::vector<double> w;
      switch (t.rate.kind) {
        case RateFn::Kind::Constant:
          coef.push_back(t.rate.c);
          break;
        case RateFn::Kind::Monomial:
          coef.push_back(t.rate.c);
          for (int j = 0; j < dim; ++j)
            if (t.rate.exponents[static_cast<std::size_t>(j)] == 1) f.push_back(j);
          break;
        case RateFn::Kind::Affine:
          coef.push_back(t.rate.c0);
          w.assign(t.rate.lin.data(), t.rate.lin.data() + dim);
          break;
      }
      factors.push_back(std::move(f));
      lin.push_back(std::move(w));
    }
  }

  double rate(int i, const double* z) const {
    const auto u = static_cast<std::size_t>(i);
    double v = coef[u];
    if (kind[u] == RateFn::Kind::Monomial) {
      for (int j : factors[u]) v *= z[j];
    } else if (kind[u] == RateFn::Kind::Affine) {
      for (int j = 0; j < dim; ++j) v += lin[u][static_cast<std::size_t>(j)] * z[j];
      v = std::max(v, 0.0);
    }
    return v;
  }
};

// One trajectory. Records entries when `record` is set; otherwise only the
// outcome fields of SimRun are filled.
SimRun run_trial(const Context& ctx, const Kernel& kern, StreamRng& rng, bool record,
                 Sampler sampler = {}) {
  const JumpModel& model = ctx.model;
  const double n = ctx.n;
  const int dim = kern.dim;
  const int jumps = kern.jumps;
  const Vector& a = model.buffer_weights();
  const double drain = model.drain();

  SimRun run;
  run.n = ctx.n;
  std::vector<double> counts(ctx.counts0.data(), ctx.counts0.data() + dim);
  std::vector<double> z(static_cast<std::size_t>(dim));
  std::vector<double> lam(static_cast<std::size_t>(jumps));
  auto refresh = [&] {
    for (int j = 0; j < dim; ++j) z[static_cast<std::size_t>(j)] = counts[static_cast<std::size_t>(j)] / n;
  };
  auto state = [&] { return Vector(Eigen::Map<const Vector>(z.data(), dim)); };
  auto inflow = [&] {
    double s = -drain;
    for (int j = 0; j < dim; ++j) s += a(j) * z[static_cast<std::size_t>(j)];
    return s;
  };

  auto total_rate = [&] {
    double sum = 0.0;
    for (int i = 0; i < jumps; ++i) {
      double l = kern.rate(i, z.data());
      // a jump out of the quadrant cannot fire
      if (l > 0.0)
        for (int j = 0; j < dim; ++j)
          if (counts[static_cast<std::size_t>(j)] + kern.dirs[static_cast<std::size_t>(i * dim + j)] < 0.0) {
            l = 0.0;
            break;
          }
      lam[static_cast<std::size_t>(i)] = l;
      sum += l;
    }
    const double total = n * sum;
    if (total > ctx.opts.rate_cap) {
      std::ostringstream msg;
      msg << "total event rate " << total << " exceeds the cap";
      fail(ErrorKind::RateExplosion, msg.str());
    }
    return total;
  };
  auto pick = [&](double total) {
    double u = rng.uniform() * total / n;
    int last = 0;
    for (int i = 0; i < jumps; ++i) {
      const double l = lam[static_cast<std::size_t>(i)];
      if (l <= 0.0) continue;
      last = i;
      u -= l;
      if (u < 0.0) return i;
    }
    return last;
  };
  auto apply = [&](int i) {
    for (int j = 0; j < dim; ++j)
      if (counts[static_cast<std::size_t>(j)] + kern.dirs[static_cast<std::size_t>(i * dim + j)] > ctx.cap(j)) {
        ++run.cap_hits;
        return false;
      }
    for (int j = 0; j < dim; ++j) counts[static_cast<std::size_t>(j)] += kern.dirs[static_cast<std::size_t>(i * dim + j)];
    refresh();
    return true;
  };

  refresh();
  for (double t = 0.0; t < ctx.opts.burn_in;) {
    const double total = total_rate();
    if (total <= 0.0) break;
    t += rng.exponential() / total;
    if (t >= ctx.opts.burn_in) break;
    apply(pick(total));
  }

  double t = 0.0;
  double b = 0.0;
  auto push = [&](int transition) {
    if (!record) return;
    run.times.push_back(t);
    run.states.push_back(state());
    run.buffer.push_back(b);
    run.transitions.push_back(transition);
  };
  push(-1);
  if (b >= ctx.b_stop) {
    run.overflow_time = 0.0;
    if (sampler.mesh) sampler.finish(state());
    return run;
  }

  for (;;) {
    const double total = total_rate();
    double next = kInf;
    if (total > 0.0) {
      next = t + rng.exponential() / total;
    } else {
      run.dead = true;
    }
    const double stop = std::min(next, ctx.horizon);
    const double g = inflow();
    if (g > 0.0 && b + g * (stop - t) >= ctx.b_stop) {
      const double hit = t + (ctx.b_stop - b) / g;
      if (sampler.mesh) sampler.advance(hit, state());
      t = std::min(hit, stop);
      b = ctx.b_stop;
      run.overflow_time = t;
      push(-1);
      break;
    }
    if (sampler.mesh) sampler.advance(stop, state());
    b = std::max(0.0, b + g * (stop - t));
    t = stop;
    if (next >= ctx.horizon) {
      push(-1);
      break;
    }
    const int i = pick(total);
    ++run.events;
    if (apply(i)) push(i);
  }
  if (sampler.mesh) sampler.finish(state());
  return run;
}

}  // namespace

SimRun ssa_simulate(const JumpModel& model, int n, const Vector& x0, double horizon,
                    double b_stop, std::uint64_t seed, const SimOptions& opts) {
  const Context ctx = make_context(model, n, x0, horizon, b_stop, opts);
  const Kernel kern(model);
  StreamRng rng(seed, 0);
  SimRun run = run_trial(ctx, kern, rng, true);
  run.seed = seed;
  return run;
}

OverflowEstimate overflow_probability(const JumpModel& model, int n, const Vector& x0,
                                      double b_level, double horizon, std::uint64_t trials,
                                      std::uint64_t seed, const SimOptions& opts) {
  if (trials < 1) fail(ErrorKind::InvalidArgument, "trials must be >= 1");
  const Context ctx = make_context(model, n, x0, horizon, b_level, opts);
  const Kernel kern(model);
  std::vector<unsigned char> hit(trials, 0);
  std::vector<int> caps(trials, 0);
  std::vector<unsigned char> dead(trials, 0);
  parallel_for(trials, resolve_threads(opts.threads), [&](std::size_t i) {
    StreamRng rng(seed, i);
    const SimRun run = run_trial(ctx, kern, rng, false);
    hit[i] = run.overflow_time.has_value();
    caps[i] = run.cap_hits;
    dead[i] = run.dead;
  });

  OverflowEstimate out;
  out.n = n;
  out.b_level = b_level;
  out.trials = trials;
  for (std::size_t i = 0; i < trials; ++i) {
    out.hits += hit[i];
    out.cap_hits += static_cast<std::uint64_t>(caps[i]);
    out.dead_runs += dead[i];
  }
  const double nt = static_cast<double>(trials);
  const double p = static_cast<double>(out.hits) / nt;
  out.p_hat = p;
  const double z = 1.959963984540054;
  const double denom = 1.0 + z * z / nt;
  const double center = (p + z * z / (2.0 * nt)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nt + z * z / (4.0 * nt * nt)) / denom;
  out.ci_low = out.hits == 0 ? 0.0 : std::max(0.0, center - half);
  out.ci_high = out.hits == trials ? 1.0 : std::min(1.0, center + half);
  auto rate_of = [n](double q) { return q > 0.0 ? -std::log(q) / n : kInf; };
  out.log_rate = rate_of(p);
  out.log_rate_low = rate_of(out.ci_high);
  out.log_rate_high = rate_of(out.ci_low);
  return out;
}

ConditionalPaths conditional_paths(const JumpModel& model, int n, const Vector& x0,
                                   double b_level, double horizon, std::uint64_t trials,
                                   std::uint64_t seed, double window, int mesh,
                                   std::uint64_t max_hits, const SimOptions& opts) {
  if (!(window > 0.0) || mesh < 2) fail(ErrorKind::InvalidArgument, "window and mesh must be positive");
  const Context ctx = make_context(model, n, x0, horizon, b_level, opts);
  const Kernel kern(model);
  const unsigned threads = resolve_threads(opts.threads);
  std::vector<unsigned char> hit(trials, 0);
  parallel_for(trials, threads, [&](std::size_t i) {
    StreamRng rng(seed, i);
    hit[i] = run_trial(ctx, kern, rng, false).overflow_time.has_value();
  });

  ConditionalPaths out;
  std::vector<std::size_t> chosen;
  for (std::size_t i = 0; i < trials; ++i) {
    if (!hit[i]) continue;
    ++out.hits;
    if (chosen.size() < max_hits) chosen.push_back(i);
  }
  if (out.hits < 10) {
    std::ostringstream msg;
    msg << "only " << out.hits << " of " << trials << " trials overflowed (need 10)";
    fail(ErrorKind::TooFewHits, msg.str());
  }
  out.used = chosen.size();

  // replay the chosen trials with recording; streams make this exact
  std::vector<SimRun> runs(chosen.size());
  parallel_for(chosen.size(), threads, [&](std::size_t j) {
    StreamRng rng(seed, chosen[j]);
    runs[j] = run_trial(ctx, kern, rng, true);
  });

  const int k = model.dim();
  out.times.resize(static_cast<std::size_t>(mesh));
  for (int m = 0; m < mesh; ++m)
    out.times[static_cast<std::size_t>(m)] = window * m / (mesh - 1);
  out.times.back() = window;

  std::vector<Matrix> samples(runs.size(), Matrix(k, mesh));
  for (std::size_t j = 0; j < runs.size(); ++j) {
    const SimRun& run = runs[j];
    const double shift = *run.overflow_time - window;
    std::size_t e = 0;
    for (int m = 0; m < mesh; ++m) {
      const double t = out.times[static_cast<std::size_t>(m)] + shift;
      if (t < 0.0) {
        samples[j].col(m) = x0;
        continue;
      }
      while (e + 1 < run.times.size() && run.times[e + 1] <= t) ++e;
      samples[j].col(m) = run.states[e];
    }
  }
  out.mean = Matrix::Zero(k, mesh);
  for (const Matrix& s : samples) out.mean += s;
  out.mean /= static_cast<double>(samples.size());
  out.envelope.assign(static_cast<std::size_t>(mesh), 0.0);
  for (const Matrix& s : samples)
    for (int m = 0; m < mesh; ++m)
      out.envelope[static_cast<std::size_t>(m)] = std::max(
          out.envelope[static_cast<std::size_t>(m)], (s.col(m) - out.mean.col(m)).cwiseAbs().maxCoeff());
  out.width = *std::max_element(out.envelope.begin(), out.envelope.end());
  return out;
}

EnsembleMean ensemble_mean(const JumpModel& model, int n, const Vector& x0, double horizon,
                           std::uint64_t trials, std::uint64_t seed, int mesh,
                           const SimOptions& opts) {
  if (trials < 1 || mesh < 2) fail(ErrorKind::InvalidArgument, "trials and mesh must be positive");
  const Context ctx = make_context(model, n, x0, horizon, kInf, opts);
  const Kernel kern(model);
  EnsembleMean out;
  out.times.resize(static_cast<std::size_t>(mesh));
  for (int m = 0; m < mesh; ++m) out.times[static_cast<std::size_t>(m)] = horizon * m / (mesh - 1);
  out.times.back() = horizon;

  std::vector<Matrix> per_trial(trials, Matrix::Zero(model.dim(), mesh));
  parallel_for(trials, resolve_threads(opts.threads), [&](std::size_t i) {
    StreamRng rng(seed, i);
    // a sample at time t reads the state in force just after t
    std::vector<double> probe(out.times);
    for (double& t : probe) t = std::nextafter(t, kInf);
    Sampler sampler{&probe, &per_trial[i]};
    run_trial(ctx, kern, rng, false, sampler);
  });
  out.mean = Matrix::Zero(model.dim(), mesh);
  for (const Matrix& m : per_trial) out.mean += m;
  out.mean /= static_cast<double>(trials);
  return out;
}

void write_run_csv(std::ostream& out, const SimRun& run) {
  out << "t";
  const int k = run.states.empty() ? 0 : static_cast<int>(run.states.front().size());
  for (int j = 1; j <= k; ++j) out << ",x" << j;
  out << ",b,event\n" << std::setprecision(17);
  for (std::size_t e = 0; e < run.times.size(); ++e) {
    out << run.times[e];
    for (int j = 0; j < k; ++j) out << ',' << run.states[e](j);
    out << ',' << run.buffer[e] << ',' << run.transitions[e] << '\n';
  }
}

}  // namespace ldb
