#include "ldbuffer/varsolver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Sparse>

#include "ldbuffer/error.hpp"
#include "ldbuffer/parallel.hpp"
#include "ldbuffer/rng.hpp"

namespace ldb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Fixed-T subproblem on a uniform grid. Node 0 is pinned at x0; the unknowns
// are nodes 1..N.
struct Subproblem {
  const CostModel& cost;
  Vector x0;
  double duration;
  int segments;
  double b_level;
  Vector a;
  double drain;
  bool terminal;

  double dt() const { return duration / segments; }
  int dim() const { return static_cast<int>(x0.size()); }
  // normalizations keep both constraints O(1)
  double buffer_scale() const { return b_level; }
  double rate_scale() const { return b_level / duration; }

  std::vector<double> grid() const {
    std::vector<double> t(static_cast<std::size_t>(segments) + 1);
    for (int k = 0; k <= segments; ++k)
      t[static_cast<std::size_t>(k)] =
          k == segments ? duration : duration * static_cast<double>(k) / segments;
    return t;
  }

  // int_0^T (<r,a> - C) dt for the piecewise-linear path (exact)
  double buffer_integral(const Matrix& nodes) const {
    double s = 0.0;
    const Eigen::RowVectorXd phi = a.transpose() * nodes;
    for (int k = 0; k < segments; ++k) s += 0.5 * (phi(k) + phi(k + 1)) - drain;
    return s * dt();
  }

  double c1(const Matrix& nodes) const {
    return (buffer_integral(nodes) - b_level) / buffer_scale();
  }
  double c2(const Matrix& nodes) const {
    return (nodes.col(segments).dot(a) - drain) / rate_scale();
  }
};

struct Multipliers {
  double lambda = 0.0;  // buffer equality
  double mu = 0.0;      // terminal inequality
  double rho = 1.0;
};

double terminal_penalty(double c, const Multipliers& m) {
  if (m.mu - m.rho * c > 0.0) return -m.mu * c + 0.5 * m.rho * c * c;
  return -0.5 * m.mu * m.mu / m.rho;
}

// Action plus augmented-Lagrangian terms; +inf outside the model's domain.
double merit(const Subproblem& p, const Matrix& nodes, const Multipliers& m,
             std::vector<Vector>& thetas, double* action_out = nullptr) {
  double action = 0.0;
  try {
    for (int k = 0; k < p.segments; ++k) {
      const Vector mid = 0.5 * (nodes.col(k) + nodes.col(k + 1));
      const Vector slope = (nodes.col(k + 1) - nodes.col(k)) / p.dt();
      DualSolve d = p.cost.cost(mid, slope, thetas[static_cast<std::size_t>(k)]);
      action += d.value * p.dt();
      thetas[static_cast<std::size_t>(k)] = std::move(d.theta_star);
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::DomainError || e.kind() == ErrorKind::RangeError ||
        e.kind() == ErrorKind::UnboundedDual || e.kind() == ErrorKind::NonConvergence)
      return kInf;
    throw;
  }
  if (action_out) *action_out = action;
  const double c1 = p.c1(nodes);
  double value = action - m.lambda * c1 + 0.5 * m.rho * c1 * c1;
  if (p.terminal) value += terminal_penalty(p.c2(nodes), m);
  return value;
}

// Gradient of c1 with respect to the free nodes, stacked (node-major).
Vector buffer_gradient(const Subproblem& p) {
  const int k = p.dim();
  Vector w(static_cast<Eigen::Index>(p.segments) * k);
  for (int j = 1; j <= p.segments; ++j) {
    const double weight = (j < p.segments ? p.dt() : 0.5 * p.dt());
    w.segment((j - 1) * k, k) = p.a * (weight / p.buffer_scale());
  }
  return w;
}

struct InnerStats {
  int iterations = 0;
};

// Newton minimization of the merit function over the free nodes.
void minimize_inner(const Subproblem& p, Matrix& nodes, const Multipliers& m,
                    std::vector<Vector>& thetas, int max_iter, InnerStats& stats) {
  const int k = p.dim();
  const int n = p.segments;
  const Eigen::Index nv = static_cast<Eigen::Index>(n) * k;
  const double h = p.dt();
  const Vector w = buffer_gradient(p);

  double phi = merit(p, nodes, m, thetas);
  if (!std::isfinite(phi)) fail(ErrorKind::DomainError, "initial path leaves the model domain");

  for (int it = 0; it < max_iter; ++it) {
    ++stats.iterations;
    Vector grad = Vector::Zero(nv);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n) * 4 * k * k + 8);

    for (int s = 0; s < n; ++s) {
      const Vector mid = 0.5 * (nodes.col(s) + nodes.col(s + 1));
      const Vector slope = (nodes.col(s + 1) - nodes.col(s)) / h;
      LocalCostDerivatives d = p.cost.derivatives(mid, slope, thetas[static_cast<std::size_t>(s)]);
      thetas[static_cast<std::size_t>(s)] = d.theta;

      // (x, y) = J (n_s, n_{s+1}),  J = [[I/2, I/2], [-I/h, I/h]]
      const Vector g_left = 0.5 * h * d.grad_x - d.theta;
      const Vector g_right = 0.5 * h * d.grad_x + d.theta;
      const Matrix& lxx = d.hess_xx;
      const Matrix lxy = d.hess_yx.transpose();
      const Matrix& lyy = d.hess_yy;
      // h * J^T M J, blocks for (left,left), (left,right), (right,right)
      const Matrix sym = 0.25 * h * lxx;
      const Matrix yy = lyy / h;
      const Matrix b_ll = sym - 0.5 * (lxy + lxy.transpose()) + yy;
      const Matrix b_rr = sym + 0.5 * (lxy + lxy.transpose()) + yy;
      const Matrix b_lr = sym + 0.5 * lxy - 0.5 * lxy.transpose() - yy;

      const int left = s - 1;  // free-node index of n_s (-1 when pinned)
      const int right = s;     // free-node index of n_{s+1}
      if (left >= 0) grad.segment(left * k, k) += g_left;
      grad.segment(right * k, k) += g_right;
      for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) {
          trip.emplace_back(right * k + r, right * k + c, b_rr(r, c));
          if (left >= 0) {
            trip.emplace_back(left * k + r, left * k + c, b_ll(r, c));
            trip.emplace_back(left * k + r, right * k + c, b_lr(r, c));
            trip.emplace_back(right * k + r, left * k + c, b_lr(c, r));
          }
        }
    }

    const double c1 = p.c1(nodes);
    grad += (-m.lambda + m.rho * c1) * w;
    if (p.terminal) {
      const double c2 = p.c2(nodes);
      if (m.mu - m.rho * c2 > 0.0) {
        const Vector da = p.a / p.rate_scale();
        grad.segment((n - 1) * k, k) += (-m.mu + m.rho * c2) * da;
        const Matrix t = m.rho * da * da.transpose();
        for (int r = 0; r < k; ++r)
          for (int c = 0; c < k; ++c) trip.emplace_back((n - 1) * k + r, (n - 1) * k + c, t(r, c));
      }
    }

    Eigen::SparseMatrix<double> hess(nv, nv);
    hess.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
    double shift = 0.0;
    const double diag_scale = std::max(1e-300, hess.diagonal().cwiseAbs().maxCoeff());
    for (int attempt = 0; attempt < 30; ++attempt) {
      Eigen::SparseMatrix<double> shifted = hess;
      if (shift > 0.0) {
        for (Eigen::Index i = 0; i < nv; ++i) shifted.coeffRef(i, i) += shift;
      }
      solver.compute(shifted);
      if (solver.info() == Eigen::Success && (solver.vectorD().array() > 0.0).all()) break;
      shift = shift == 0.0 ? 1e-12 * diag_scale : shift * 10.0;
    }
    if (solver.info() != Eigen::Success)
      fail(ErrorKind::NonConvergence, "Newton system could not be factorized");

    // rank-one buffer term via Sherman-Morrison
    const Vector a_inv_g = solver.solve(grad);
    const Vector a_inv_w = solver.solve(w);
    const double denom = 1.0 + m.rho * w.dot(a_inv_w);
    const Vector step = -(a_inv_g - (m.rho * w.dot(a_inv_g) / denom) * a_inv_w);

    const double decrement = -grad.dot(step);
    if (!(decrement > 1e-18 * (1.0 + std::abs(phi)))) break;

    double t = 1.0;
    bool accepted = false;
    std::vector<Vector> trial_thetas;
    for (int ls = 0; ls < 50; ++ls, t *= 0.5) {
      Matrix trial = nodes;
      for (int j = 0; j < n; ++j) trial.col(j + 1) += t * step.segment(j * k, k);
      trial_thetas = thetas;
      const double value = merit(p, trial, m, trial_thetas);
      if (value <= phi - 1e-4 * t * decrement + 1e-15 * (1.0 + std::abs(phi))) {
        nodes = std::move(trial);
        thetas = std::move(trial_thetas);
        accepted = value < phi;
        phi = value;
        break;
      }
    }
    if (!accepted) break;
  }
}

Matrix straight_line(const Subproblem& p) {
  const double g0 = p.x0.dot(p.a) - p.drain;
  const double T = p.duration;
  const double growth = 2.0 * (p.b_level - g0 * T) / (T * T);
  const Vector s = p.a * (growth / p.a.squaredNorm());
  const std::vector<double> t = p.grid();
  Matrix nodes(p.dim(), p.segments + 1);
  for (int k = 0; k <= p.segments; ++k) nodes.col(k) = p.x0 + s * t[static_cast<std::size_t>(k)];
  return nodes;
}

bool inside_domain(const Subproblem& p, const Matrix& nodes) {
  if (p.cost.is_frozen()) return true;
  for (int k = 0; k <= p.segments; ++k)
    if ((p.cost.effective_state(nodes.col(k)).array() < 0.0).any()) return false;
  return true;
}

Matrix randomized_start(const Subproblem& p, StreamRng& rng, double perturbation) {
  Matrix base = straight_line(p);
  const double span = std::max((base.col(p.segments) - p.x0).norm(), 1e-3 * (1.0 + p.x0.norm()));
  Matrix coef(p.dim(), 3);
  for (int j = 0; j < p.dim(); ++j)
    for (int m = 0; m < 3; ++m) coef(j, m) = rng.normal() / (m + 1);
  const std::vector<double> t = p.grid();
  double amp = perturbation * span;
  for (int attempt = 0; attempt < 30; ++attempt, amp *= 0.5) {
    Matrix nodes = base;
    for (int k = 1; k <= p.segments; ++k) {
      const double u = t[static_cast<std::size_t>(k)] / p.duration;
      for (int m = 0; m < 3; ++m)
        nodes.col(k) += amp * std::sin((m + 1) * M_PI * u) * coef.col(m);
    }
    if (inside_domain(p, nodes)) return nodes;
  }
  return base;
}

Path fluid_path(const CostModel& cost, const Vector& x0, double duration, int segments) {
  const Matrix dirs = cost.model().direction_matrix();
  auto velocity = [&](const Vector& x) -> Vector { return dirs * cost.rates_at(x); };
  return Path::uniform(duration, segments, [&, state = Vector(x0), clock = 0.0](double t) mutable {
    const int sub = 8;
    const double h = (t - clock) / sub;
    for (int i = 0; i < sub && h > 0.0; ++i) {
      const Vector k1 = velocity(state);
      const Vector k2 = velocity(state + 0.5 * h * k1);
      const Vector k3 = velocity(state + 0.5 * h * k2);
      const Vector k4 = velocity(state + h * k3);
      state += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    clock = t;
    return state;
  });
}

struct WarmStart {
  Matrix nodes;
  Multipliers multipliers;
};

FixedTimeSolution solve_fixed_impl(const Subproblem& p, const SolverOptions& opts,
                                   Matrix nodes, std::optional<Multipliers> warm,
                                   Multipliers* final_multipliers) {
  std::vector<Vector> thetas(static_cast<std::size_t>(p.segments), Vector::Zero(p.dim()));
  Multipliers m;
  if (warm) {
    m = *warm;
  } else {
    std::vector<Vector> scratch = thetas;
    double action = 0.0;
    Multipliers zero;
    if (!std::isfinite(merit(p, nodes, zero, scratch, &action)))
      fail(ErrorKind::DomainError, "initial path leaves the model domain");
    m.rho = 10.0 * std::max(action, 1e-8);
  }

  InnerStats stats;
  double previous = kInf;
  int outer = 0;
  for (; outer < opts.max_outer; ++outer) {
    minimize_inner(p, nodes, m, thetas, opts.max_newton, stats);
    const double c1 = p.c1(nodes);
    const double c2 = p.terminal ? p.c2(nodes) : 0.0;
    const double violation =
        std::max(std::abs(c1), p.terminal ? std::max(-c2, std::min(m.mu, std::abs(c2))) : 0.0);
    if (violation <= opts.constraint_tol) break;
    m.lambda -= m.rho * c1;
    if (p.terminal) m.mu = std::max(0.0, m.mu - m.rho * c2);
    if (violation > 0.25 * previous) m.rho = std::min(m.rho * 10.0, 1e16);
    previous = violation;
  }
  if (outer == opts.max_outer) {
    const double c1 = p.c1(nodes);
    if (std::abs(c1) > 1e3 * opts.constraint_tol) {
      std::ostringstream msg;
      msg << "augmented Lagrangian did not meet the buffer constraint (relative violation "
          << std::abs(c1) << ")";
      fail(ErrorKind::NonConvergence, msg.str());
    }
  }

  FixedTimeSolution out{Path(p.grid(), nodes)};
  out.cost = path_cost(p.cost, out.path);
  if (out.cost > opts.cost_cap) {
    std::ostringstream msg;
    msg << "no path on [0," << p.duration << "] reaches B=" << p.b_level
        << " within the cost cap";
    fail(ErrorKind::Infeasible, msg.str());
  }
  out.buffer_terminal = buffer_value(out.path, p.a, p.drain).terminal;
  out.multiplier = m.lambda / p.buffer_scale();
  out.outer_iterations = outer + 1;
  out.newton_iterations = stats.iterations;
  if (final_multipliers) *final_multipliers = m;
  return out;
}

void check_start(const CostModel& cost, const Vector& x0) {
  if (x0.size() != cost.dim()) fail(ErrorKind::InvalidArgument, "x0 must have length K");
  const JumpModel& model = cost.model();
  if (x0.dot(model.buffer_weights()) < model.drain() - 1e-9 * (1.0 + model.drain()))
    fail(ErrorKind::InvalidArgument, "x0 must lie on or above the hyperplane <x,a> = C");
}

}  // namespace

FixedTimeSolution solve_fixed_T(const CostModel& cost, const Vector& x0, double duration,
                                double b_level, const SolverOptions& opts,
                                const std::optional<Path>& init) {
  check_start(cost, x0);
  if (!(duration > 0.0)) fail(ErrorKind::InvalidArgument, "T must be positive");
  if (!(b_level >= 0.0)) fail(ErrorKind::InvalidArgument, "B_level must be nonnegative");
  if (opts.grid < 1) fail(ErrorKind::InvalidArgument, "grid must be positive");
  const JumpModel& model = cost.model();

  if (b_level == 0.0) {
    FixedTimeSolution out{fluid_path(cost, x0, duration, opts.grid)};
    out.cost = path_cost(cost, out.path);
    out.buffer_terminal = buffer_value(out.path, model.buffer_weights(), model.drain()).terminal;
    return out;
  }

  Subproblem p{cost, x0, duration, opts.grid, b_level, model.buffer_weights(), model.drain(),
               opts.terminal_above_hyperplane};
  Matrix nodes;
  if (init) {
    if (init->segments() != opts.grid || init->dim() != cost.dim())
      fail(ErrorKind::InvalidArgument, "initial path must match the grid");
    nodes = init->nodes();
    nodes.col(0) = x0;
  } else {
    nodes = straight_line(p);
  }
  return solve_fixed_impl(p, opts, std::move(nodes), std::nullopt, nullptr);
}

namespace {

struct Evaluation {
  double T = 0.0;
  std::vector<FixedTimeSolution> solutions;  // converged starts
  std::size_t best = 0;
  Multipliers multipliers;
  double cost() const { return solutions[best].cost; }
};

double straight_line_time(const CostModel& cost, const Vector& x0, double b_level,
                          const SolverOptions& opts) {
  const JumpModel& model = cost.model();
  const Vector& a = model.buffer_weights();
  const double g0 = x0.dot(a) - model.drain();
  double best_T = 1.0;
  double best = kInf;
  for (int i = 0; i <= 160; ++i) {
    const double T = std::pow(10.0, -6.0 + 0.075 * i);
    if (T < opts.t_min || T > opts.t_max) continue;
    const double growth = 2.0 * (b_level - g0 * T) / (T * T);
    const Vector s = a * (growth / a.squaredNorm());
    try {
      const Path line = Path::uniform(T, 1, [&](double t) -> Vector { return x0 + s * t; });
      if (!cost.is_frozen() && (cost.effective_state(line.end()).array() < 0.0).any()) continue;
      const double c = path_cost(cost, line);
      if (c < best) {
        best = c;
        best_T = T;
      }
    } catch (const Error&) {
    }
  }
  return best_T;
}

}  // namespace

VariationalSolution solve_problem_A(const CostModel& cost, const Vector& x0, double b_level,
                                    const SolverOptions& opts) {
  check_start(cost, x0);
  if (!(b_level > 0.0)) fail(ErrorKind::InvalidArgument, "B_level must be positive");
  if (opts.starts < 1) fail(ErrorKind::InvalidArgument, "starts must be >= 1");
  const JumpModel& model = cost.model();
  const unsigned threads = resolve_threads(opts.threads);

  std::optional<WarmStart> warm;
  int eval_count = 0;
  std::vector<Evaluation> history;

  auto evaluate = [&](double T) -> double {
    const int index = eval_count++;
    Subproblem p{cost, x0, T, opts.grid, b_level, model.buffer_weights(), model.drain(),
                 opts.terminal_above_hyperplane};
    const auto n_starts = static_cast<std::size_t>(opts.starts);
    std::vector<std::optional<FixedTimeSolution>> results(n_starts);
    std::vector<Multipliers> mults(n_starts);
    std::vector<std::string> errors(n_starts);
    parallel_for(n_starts, threads, [&](std::size_t s) {
      Matrix nodes;
      std::optional<Multipliers> m0;
      if (s == 0) {
        if (warm) {
          nodes = warm->nodes;
          m0 = warm->multipliers;
        } else {
          nodes = straight_line(p);
        }
      } else {
        StreamRng rng(opts.seed, static_cast<std::uint64_t>(index), s);
        nodes = randomized_start(p, rng, opts.perturbation);
      }
      try {
        results[s] = solve_fixed_impl(p, opts, std::move(nodes), m0, &mults[s]);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NonConvergence && e.kind() != ErrorKind::DomainError &&
            e.kind() != ErrorKind::Infeasible)
          throw;
        errors[s] = e.what();
      }
    });

    Evaluation ev;
    ev.T = T;
    for (std::size_t s = 0; s < n_starts; ++s) {
      if (!results[s]) continue;
      if (ev.solutions.empty() || results[s]->cost < ev.cost()) {
        ev.best = ev.solutions.size();
        ev.multipliers = mults[s];
      }
      ev.solutions.push_back(std::move(*results[s]));
    }
    if (ev.solutions.empty()) {
      history.push_back(Evaluation{T, {}, 0, {}});
      return kInf;
    }
    warm = WarmStart{ev.solutions[ev.best].path.nodes(), ev.multipliers};
    const double value = ev.cost();
    history.push_back(std::move(ev));
    return value;
  };

  auto exhausted = [&](const std::string& where) {
    std::ostringstream msg;
    msg << "no minimum over T within [" << opts.t_min << ", " << opts.t_max << "] (" << where
        << ")";
    fail(ErrorKind::BracketExhausted, msg.str());
  };

  double mid = opts.t_initial > 0.0 ? opts.t_initial : straight_line_time(cost, x0, b_level, opts);
  mid = std::clamp(mid, opts.t_min, opts.t_max);
  double f_mid = evaluate(mid);
  double hi = std::min(2.0 * mid, opts.t_max);
  double f_hi = hi > mid ? evaluate(hi) : kInf;
  double lo = 0.0;
  double f_lo = kInf;
  if (f_hi < f_mid) {
    for (;;) {
      lo = mid;
      f_lo = f_mid;
      mid = hi;
      f_mid = f_hi;
      if (hi >= opts.t_max) exhausted("cost still decreasing at the upper cap");
      hi = std::min(2.0 * hi, opts.t_max);
      f_hi = evaluate(hi);
      if (f_hi >= f_mid) break;
    }
  } else {
    for (;;) {
      lo = std::max(0.5 * mid, opts.t_min);
      if (lo >= mid) exhausted("cost still decreasing at the lower cap");
      f_lo = evaluate(lo);
      if (f_lo >= f_mid) break;
      hi = mid;
      f_hi = f_mid;
      mid = lo;
      f_mid = f_lo;
    }
  }
  if (!std::isfinite(f_mid)) fail(ErrorKind::Infeasible, "no feasible terminal time found");

  // golden section on [lo, hi]
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - invphi * (hi - lo);
  double x2 = lo + invphi * (hi - lo);
  double f1 = evaluate(x1);
  double f2 = evaluate(x2);
  while (hi - lo > opts.t_rel_tol * 0.5 * (x1 + x2)) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - invphi * (hi - lo);
      f1 = evaluate(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + invphi * (hi - lo);
      f2 = evaluate(x2);
    }
  }

  // lowest cost, then smallest T
  const Evaluation* best = nullptr;
  for (const Evaluation& ev : history) {
    if (ev.solutions.empty()) continue;
    if (!best || ev.cost() < best->cost() || (ev.cost() == best->cost() && ev.T < best->T))
      best = &ev;
  }
  if (!best) fail(ErrorKind::Infeasible, "every fixed-T subproblem failed");

  const FixedTimeSolution& sol = best->solutions[best->best];
  VariationalSolution out{best->T, sol.path};
  out.cost = sol.cost;
  out.buffer_terminal = sol.buffer_terminal;
  out.active = std::abs(out.buffer_terminal - b_level) <= 1e-6 * b_level;
  out.starts = static_cast<int>(best->solutions.size());
  out.multiplier = sol.multiplier;
  out.evaluations = eval_count;
  for (const FixedTimeSolution& other : best->solutions)
    out.spread = std::max(out.spread, sup_distance(other.path, sol.path));
  return out;
}

VariationalSolution scale_solution(const VariationalSolution& unit, double b_level,
                                   const Vector& x_star, const JumpModel& model) {
  if (!(b_level > 0.0)) fail(ErrorKind::InvalidArgument, "B_level must be positive");
  const double alpha = std::sqrt(b_level);
  std::vector<double> times = unit.path.times();
  for (double& t : times) t *= alpha;
  Matrix nodes = (alpha * unit.path.nodes()).colwise() + (1.0 - alpha) * x_star;
  VariationalSolution out = unit;
  out.path = Path(std::move(times), std::move(nodes));
  out.T = alpha * unit.T;
  out.cost = alpha * unit.cost;
  out.buffer_terminal =
      buffer_value(out.path, model.buffer_weights(), model.drain()).terminal;
  out.active = std::abs(out.buffer_terminal - b_level) <= 1e-6 * b_level;
  out.spread = alpha * unit.spread;
  return out;
}

namespace {

// Piecewise-linear combination on the union of the two grids.
Path mix(const Path& y, const Path& u, double gamma) {
  std::vector<double> grid = y.times();
  grid.insert(grid.end(), u.times().begin(), u.times().end());
  std::sort(grid.begin(), grid.end());
  const double horizon = std::min(y.duration(), u.duration());
  std::vector<double> times;
  for (double t : grid) {
    if (t > horizon) break;
    if (times.empty() || t - times.back() > 1e-12 * horizon) times.push_back(t);
  }
  if (times.back() < horizon) times.back() = horizon;
  Matrix nodes(y.dim(), static_cast<Eigen::Index>(times.size()));
  for (std::size_t i = 0; i < times.size(); ++i)
    nodes.col(static_cast<Eigen::Index>(i)) =
        gamma * y.at(times[i]) + (1.0 - gamma) * u.at(times[i]);
  return Path(std::move(times), std::move(nodes));
}

Path scale_about(const Path& path, const Vector& origin, double factor) {
  std::vector<double> times = path.times();
  for (double& t : times) t *= factor;
  Matrix nodes = (factor * path.nodes()).colwise() + (1.0 - factor) * origin;
  return Path(std::move(times), std::move(nodes));
}

}  // namespace

CertificateResult uniqueness_certificate(const Path& sol1, const Path& sol2,
                                         const CostModel& frozen, double b_level,
                                         double f_exponent) {
  if (!frozen.is_frozen())
    fail(ErrorKind::InvalidArgument, "uniqueness certificate needs a frozen cost model");
  if (!(f_exponent >= 1.0)) fail(ErrorKind::InvalidArgument, "f exponent must be >= 1");
  const JumpModel& model = frozen.model();
  const Vector& a = model.buffer_weights();
  const double drain = model.drain();
  if ((sol1.start() - sol2.start()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + sol1.start().norm()))
    fail(ErrorKind::InvalidArgument, "certificate inputs must start at the same point");
  const double feas_tol = 1e-6 * b_level;
  const double b1 = buffer_value(sol1, a, drain).terminal;
  const double b2 = buffer_value(sol2, a, drain).terminal;
  if (b1 < b_level - feas_tol || b2 < b_level - feas_tol)
    fail(ErrorKind::Infeasible, "certificate inputs must both reach B_level");

  CertificateResult out;
  out.cost1 = path_cost(frozen, sol1);
  out.cost2 = path_cost(frozen, sol2);

  // r lives on the shorter interval, y on the longer one
  const bool swap = sol1.duration() > sol2.duration();
  const Path& r = swap ? sol2 : sol1;
  const Path& y = swap ? sol1 : sol2;
  const Vector origin = r.start();
  out.alpha = y.duration() / r.duration();
  const Path u = scale_about(r, origin, out.alpha);

  const double claimed = std::max(out.cost1, out.cost2);
  out.improved_cost = kInf;
  for (int i = 1; i < 40; ++i) {
    const double gamma = i / 40.0;
    const Path v = mix(y, u, gamma);
    const double bv = buffer_value(v, a, drain).terminal;
    if (!(bv > 0.0)) continue;
    double delta;
    if (f_exponent > 1.0 && out.alpha > 1.0 + 1e-12) {
      // strictly convex f: shrink until the buffer constraint is just met
      delta = std::sqrt(b_level / bv);
    } else if (f_exponent > 1.0) {
      delta = std::sqrt(b_level / bv);
    } else {
      delta = 1.0 / (gamma + (1.0 - gamma) * out.alpha);
    }
    const Path w = scale_about(v, origin, delta);
    if (buffer_value(w, a, drain).terminal < b_level - feas_tol) continue;
    const double cw = path_cost(frozen, w);
    if (cw < out.improved_cost) {
      out.improved_cost = cw;
      out.gamma = gamma;
      out.delta = delta;
    }
  }
  const double tol = 1e-6 * std::max(claimed, 1e-12);
  out.verdict = out.improved_cost < claimed - tol ? CertificateResult::Verdict::ContradictionFound
                                                  : CertificateResult::Verdict::ConfirmsUniqueness;
  return out;
}

Path rescale_small_buffer(const Path& path, double b_level) {
  if (!(b_level > 0.0)) fail(ErrorKind::InvalidArgument, "B_level must be positive");
  const double root = std::sqrt(b_level);
  std::vector<double> times = path.times();
  for (double& t : times) t /= root;
  const Vector origin = path.start();
  Matrix nodes = (path.nodes() / root).colwise() + (1.0 - 1.0 / root) * origin;
  return Path(std::move(times), std::move(nodes));
}

ConvergenceTable small_buffer_study(const JumpModel& model, const Vector& x_star,
                                    const std::vector<double>& b_levels,
                                    const SolverOptions& opts) {
  return small_buffer_study(CostModel::state_dependent(model), model, x_star, b_levels, opts);
}

ConvergenceTable small_buffer_study(const CostModel& cost, const JumpModel& model,
                                    const Vector& x_star, const std::vector<double>& b_levels,
                                    const SolverOptions& opts) {
  for (std::size_t i = 1; i < b_levels.size(); ++i)
    if (!(b_levels[i] < b_levels[i - 1]))
      fail(ErrorKind::InvalidArgument, "B list must be strictly decreasing");

  const CostModel reference = CostModel::frozen(freeze(model, x_star));
  const VariationalSolution unit = solve_problem_A(reference, x_star, 1.0, opts);
  ConvergenceTable table{unit.T, unit.cost, unit.path, {}};

  for (double b : b_levels) {
    const VariationalSolution sol = solve_problem_A(cost, x_star, b, opts);
    const Path scaled = rescale_small_buffer(sol.path, b);
    ConvergenceRow row;
    row.b_level = b;
    row.T = sol.T;
    row.scaled_T = sol.T / std::sqrt(b);
    row.cost = sol.cost;
    const CostModel zoomed =
        cost.is_frozen() ? cost : CostModel::zoomed(model, sol.path.start(), std::sqrt(b));
    row.scaled_cost = path_cost(zoomed, scaled);
    row.distance = sup_distance(scaled, unit.path);
    row.time_error = std::abs(row.scaled_T - unit.T) / unit.T;
    row.entry = sol.path.start();
    row.path = sol.path;
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace ldb
