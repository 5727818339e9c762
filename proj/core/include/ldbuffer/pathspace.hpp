#pragma once

#include <functional>
#include <iosfwd>
#include <utility>
#include <vector>

#include "ldbuffer/model.hpp"
#include "ldbuffer/ratefn.hpp"

namespace ldb {

/// Continuous piecewise-linear path r(t) on [0, T]: strictly increasing
/// times t_0 = 0 < ... < t_N = T and nodes r(t_k) stored as the columns of a
/// K x (N+1) matrix.
class PiecewiseLinearPath {
 public:
  PiecewiseLinearPath(std::vector<double> times, Matrix nodes);

  /// N equal segments on [0, T]; node k = f(t_k).
  static PiecewiseLinearPath uniform(double duration, int segments,
                                     const std::function<Vector(double)>& f);

  int dim() const noexcept { return static_cast<int>(nodes_.rows()); }
  int segments() const noexcept { return static_cast<int>(times_.size()) - 1; }
  double duration() const noexcept { return times_.back(); }
  const std::vector<double>& times() const noexcept { return times_; }
  const Matrix& nodes() const noexcept { return nodes_; }
  Vector node(int k) const { return nodes_.col(k); }
  Vector start() const { return nodes_.col(0); }
  Vector end() const { return nodes_.col(nodes_.cols() - 1); }

  double dt(int k) const { return times_[k + 1] - times_[k]; }
  Vector slope(int k) const { return (nodes_.col(k + 1) - nodes_.col(k)) / dt(k); }
  Vector midpoint(int k) const { return 0.5 * (nodes_.col(k) + nodes_.col(k + 1)); }

  /// Linear interpolation; t is clamped to [0, T].
  Vector at(double t) const;

  /// <r(t_k), a> - C at every node.
  std::vector<double> net_inflow(const Vector& a, double drain) const;

 private:
  std::vector<double> times_;
  Matrix nodes_;
};

using Path = PiecewiseLinearPath;

struct BufferTrace {
  std::vector<double> times;
  std::vector<double> values;  // B(r, t_k)
  double terminal = 0.0;       // B(r, T)
};

/// I(r) = sum_k l(midpoint_k, slope_k) dt_k. Unbounded local costs surface
/// as InfiniteCost.
double path_cost(const CostModel& cost, const Path& path);

/// B(r, t) = F(t) - min_{s<=t} F(s) with F(t) = int_0^t (<r,a> - C),
/// evaluated exactly for piecewise-linear r (including minima of F inside a
/// segment). O(N).
BufferTrace buffer_value(const Path& path, const Vector& a, double drain);

/// Same functional for a piecewise-constant inflow: phi[k] = <x,a> holds on
/// [times[k], times[k+1]), the last value up to `end_time`.
BufferTrace buffer_value_steps(const std::vector<double>& times,
                               const std::vector<double>& phi, double drain,
                               double end_time);

/// y(t) = alpha r(t / alpha) on [0, alpha T].
Path scale_path(const Path& path, double alpha);

/// Adds delta to every node; delta must satisfy |<delta, a>| <= 1e-12.
Path shift_anchor(const Path& path, const Vector& delta, const Vector& a);

struct PositivizeReport {
  double removed_measure = 0.0;
  int removed_pieces = 0;
};

/// Deletes the time spent below the hyperplane <r,a> = C and splices the
/// remaining increments back into a continuous path. Requires <r(0),a> >= C.
std::pair<Path, PositivizeReport> positivize(const Path& path, const Vector& a, double drain);

/// Largest positive jump in the slope of phi(t) = <r(t), a> over interior
/// nodes; zero iff phi is concave on the grid.
double concavity_gap(const Path& path, const Vector& a);

/// Sup-norm distance between two paths on [0, min(T1, T2)].
double sup_distance(const Path& lhs, const Path& rhs);

/// Path CSV: header `t,x1,...,xK`, one row per node.
void write_path_csv(std::ostream& out, const Path& path);
Path read_path_csv(std::istream& in);
/// Buffer trace CSV: header `t,B`.
void write_buffer_csv(std::ostream& out, const BufferTrace& trace);

}  // namespace ldb
