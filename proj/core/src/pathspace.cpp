#include "ldbuffer/pathspace.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "ldbuffer/error.hpp"

namespace ldb {

PiecewiseLinearPath::PiecewiseLinearPath(std::vector<double> times, Matrix nodes)
    : times_(std::move(times)), nodes_(std::move(nodes)) {
  if (times_.size() < 2) fail(ErrorKind::InvalidArgument, "path needs at least one segment");
  if (static_cast<std::size_t>(nodes_.cols()) != times_.size())
    fail(ErrorKind::InvalidArgument, "path needs one node per grid time");
  if (times_.front() != 0.0) fail(ErrorKind::InvalidArgument, "path grid must start at t = 0");
  for (std::size_t k = 1; k < times_.size(); ++k)
    if (!(times_[k] > times_[k - 1]))
      fail(ErrorKind::InvalidArgument, "path grid times must be strictly increasing");
  if (!nodes_.allFinite()) fail(ErrorKind::InvalidArgument, "path nodes must be finite");
}

PiecewiseLinearPath PiecewiseLinearPath::uniform(double duration, int segments,
                                                 const std::function<Vector(double)>& f) {
  if (!(duration > 0.0) || segments < 1)
    fail(ErrorKind::InvalidArgument, "uniform path needs T > 0 and N >= 1");
  std::vector<double> times(static_cast<std::size_t>(segments) + 1);
  Vector first = f(0.0);
  Matrix nodes(first.size(), segments + 1);
  for (int k = 0; k <= segments; ++k) {
    times[static_cast<std::size_t>(k)] =
        k == segments ? duration : duration * static_cast<double>(k) / segments;
    nodes.col(k) = k == 0 ? first : f(times[static_cast<std::size_t>(k)]);
  }
  return PiecewiseLinearPath(std::move(times), std::move(nodes));
}

Vector PiecewiseLinearPath::at(double t) const {
  if (t <= 0.0) return nodes_.col(0);
  if (t >= duration()) return nodes_.col(nodes_.cols() - 1);
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const auto k = static_cast<int>(it - times_.begin()) - 1;
  const double w = (t - times_[static_cast<std::size_t>(k)]) / dt(k);
  return (1.0 - w) * nodes_.col(k) + w * nodes_.col(k + 1);
}

std::vector<double> PiecewiseLinearPath::net_inflow(const Vector& a, double drain) const {
  std::vector<double> g(times_.size());
  for (std::size_t k = 0; k < times_.size(); ++k)
    g[k] = nodes_.col(static_cast<Eigen::Index>(k)).dot(a) - drain;
  return g;
}

double path_cost(const CostModel& cost, const Path& path) {
  double total = 0.0;
  std::optional<Vector> warm;
  try {
    for (int k = 0; k < path.segments(); ++k) {
      DualSolve d = cost.cost(path.midpoint(k), path.slope(k), warm);
      total += d.value * path.dt(k);
      warm = std::move(d.theta_star);
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::UnboundedDual)
      fail(ErrorKind::InfiniteCost, std::string("path has infinite cost: ") + e.what());
    throw;
  }
  return total;
}

BufferTrace buffer_value(const Path& path, const Vector& a, double drain) {
  if (a.size() != path.dim()) fail(ErrorKind::InvalidArgument, "a must have length K");
  const std::vector<double> g = path.net_inflow(a, drain);
  BufferTrace out;
  out.times = path.times();
  out.values.resize(g.size());
  double f = 0.0;
  double running_min = 0.0;
  out.values[0] = 0.0;
  for (int k = 0; k < path.segments(); ++k) {
    const double h = path.dt(k);
    const double g0 = g[static_cast<std::size_t>(k)];
    const double g1 = g[static_cast<std::size_t>(k) + 1];
    if (g0 < 0.0 && g1 > 0.0) {
      // F is minimal where g changes sign inside the segment
      const double tau = -g0 * h / (g1 - g0);
      running_min = std::min(running_min, f + 0.5 * g0 * tau);
    }
    f += 0.5 * h * (g0 + g1);
    running_min = std::min(running_min, f);
    out.values[static_cast<std::size_t>(k) + 1] = f - running_min;
  }
  out.terminal = out.values.back();
  return out;
}

BufferTrace buffer_value_steps(const std::vector<double>& times,
                               const std::vector<double>& phi, double drain,
                               double end_time) {
  if (times.empty() || times.size() != phi.size())
    fail(ErrorKind::InvalidArgument, "step inflow needs one value per time");
  BufferTrace out;
  out.times = times;
  out.times.push_back(end_time);
  out.values.assign(out.times.size(), 0.0);
  double f = 0.0;
  double running_min = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double h = out.times[k + 1] - out.times[k];
    f += h * (phi[k] - drain);
    running_min = std::min(running_min, f);
    out.values[k + 1] = f - running_min;
  }
  out.terminal = out.values.back();
  return out;
}

Path scale_path(const Path& path, double alpha) {
  if (!(alpha > 0.0)) fail(ErrorKind::InvalidArgument, "scale factor must be positive");
  std::vector<double> times = path.times();
  for (double& t : times) t *= alpha;
  return Path(std::move(times), alpha * path.nodes());
}

Path shift_anchor(const Path& path, const Vector& delta, const Vector& a) {
  if (delta.size() != path.dim() || a.size() != path.dim())
    fail(ErrorKind::InvalidArgument, "shift and a must have length K");
  if (std::abs(delta.dot(a)) > 1e-12)
    fail(ErrorKind::InvalidArgument, "shift is not parallel to the hyperplane <x,a> = 0");
  Matrix nodes = path.nodes().colwise() + delta;
  return Path(path.times(), std::move(nodes));
}

std::pair<Path, PositivizeReport> positivize(const Path& path, const Vector& a, double drain) {
  const std::vector<double> g = path.net_inflow(a, drain);
  if (g.front() < 0.0)
    fail(ErrorKind::InvalidArgument, "positivize needs <r(0),a> >= C");

  PositivizeReport report;
  std::vector<double> times{0.0};
  std::vector<Vector> nodes{path.start()};
  bool in_removed = false;
  for (int k = 0; k < path.segments(); ++k) {
    const double h = path.dt(k);
    const double g0 = g[static_cast<std::size_t>(k)];
    const double g1 = g[static_cast<std::size_t>(k) + 1];
    // {g >= 0} on a linear segment is an interval [lo, hi] of local time
    double lo = 0.0;
    double hi = h;
    if (g0 < 0.0 && g1 < 0.0) {
      hi = lo;  // empty
    } else if (g0 < 0.0) {
      lo = h * (-g0) / (g1 - g0);
    } else if (g1 < 0.0) {
      hi = h * g0 / (g0 - g1);
    }
    const double kept = std::max(0.0, hi - lo);
    if (kept <= 0.0) {
      if (!in_removed) ++report.removed_pieces;
      in_removed = true;
    } else {
      if (lo > 0.0 && !in_removed) ++report.removed_pieces;
      in_removed = hi < h;
      if (in_removed) ++report.removed_pieces;
    }
    if (kept <= 1e-15 * h) continue;
    times.push_back(times.back() + kept);
    nodes.push_back(nodes.back() + kept * path.slope(k));
  }
  if (times.size() < 2)
    fail(ErrorKind::InvalidArgument, "path spends no time above the hyperplane");

  Matrix m(path.dim(), static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t i = 0; i < nodes.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = nodes[i];
  report.removed_measure = path.duration() - times.back();
  return {Path(std::move(times), std::move(m)), report};
}

double concavity_gap(const Path& path, const Vector& a) {
  double gap = 0.0;
  for (int k = 1; k < path.segments(); ++k) {
    const double before = path.slope(k - 1).dot(a);
    const double after = path.slope(k).dot(a);
    gap = std::max(gap, after - before);
  }
  return gap;
}

double sup_distance(const Path& lhs, const Path& rhs) {
  if (lhs.dim() != rhs.dim()) fail(ErrorKind::InvalidArgument, "paths differ in dimension");
  const double horizon = std::min(lhs.duration(), rhs.duration());
  std::vector<double> grid;
  for (double t : lhs.times())
    if (t <= horizon) grid.push_back(t);
  for (double t : rhs.times())
    if (t <= horizon) grid.push_back(t);
  grid.push_back(horizon);
  double best = 0.0;
  for (double t : grid)
    best = std::max(best, (lhs.at(t) - rhs.at(t)).cwiseAbs().maxCoeff());
  return best;
}

void write_path_csv(std::ostream& out, const Path& path) {
  out << "t";
  for (int j = 1; j <= path.dim(); ++j) out << ",x" << j;
  out << '\n' << std::setprecision(17);
  for (int k = 0; k <= path.segments(); ++k) {
    out << path.times()[static_cast<std::size_t>(k)];
    for (int j = 0; j < path.dim(); ++j) out << ',' << path.nodes()(j, k);
    out << '\n';
  }
}

Path read_path_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::ParseError, "empty path CSV");
  const auto dim = static_cast<int>(std::count(line.begin(), line.end(), ','));
  if (dim < 1 || line.rfind("t,", 0) != 0)
    fail(ErrorKind::ParseError, "path CSV header must be t,x1,...,xK");
  std::vector<double> times;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> values;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        fail(ErrorKind::ParseError, "path CSV: not a number: " + cell);
      }
    }
    if (static_cast<int>(values.size()) != dim + 1)
      fail(ErrorKind::ParseError, "path CSV: wrong column count");
    times.push_back(values[0]);
    rows.emplace_back(values.begin() + 1, values.end());
  }
  Matrix nodes(dim, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k)
    for (int j = 0; j < dim; ++j)
      nodes(j, static_cast<Eigen::Index>(k)) = rows[k][static_cast<std::size_t>(j)];
  return Path(std::move(times), std::move(nodes));
}

void write_buffer_csv(std::ostream& out, const BufferTrace& trace) {
  out << "t,B\n" << std::setprecision(17);
  for (std::size_t k = 0; k < trace.times.size(); ++k)
    out << trace.times[k] << ',' << trace.values[k] << '\n';
}

}  // namespace ldb
