#pragma once

#include "tdsim/model.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tdsim {

enum class TrajectoryKind { stochastic, deterministic };

struct TrajectoryMeta {
  std::optional<LoopSpec> spec;
  std::uint64_t seed = 0;
  std::string integrator;  // empty for stochastic paths
};

/// Time-stamped states. Stochastic paths are right-continuous and piecewise
/// constant; deterministic paths are read by linear interpolation.
struct Trajectory {
  TrajectoryKind kind = TrajectoryKind::deterministic;
  std::vector<double> times;
  std::vector<Vector> states;
  TrajectoryMeta meta;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }
  double start_time() const { return times.front(); }
  double end_time() const { return times.back(); }

  void push(double t, Vector x) {
    times.push_back(t);
    states.push_back(std::move(x));
  }

  /// Value at time t (right limit for stochastic paths).
  Vector at(double t) const { return value(t, false); }

  /// Left limit at time t; equals at(t) for deterministic paths.
  Vector left_limit(double t) const { return value(t, true); }

 private:
  Vector value(double t, bool left) const {
    if (times.empty()) throw ParameterError("empty trajectory");
    if (t <= times.front()) return states.front();
    if (t >= times.back()) {
      if (kind == TrajectoryKind::stochastic && left && t == times.back() && times.size() > 1) {
        return states[times.size() - 2];
      }
      return states.back();
    }
    if (kind == TrajectoryKind::stochastic) {
      // last index with times[i] <= t (or < t for the left limit)
      auto it = left ? std::lower_bound(times.begin(), times.end(), t)
                     : std::upper_bound(times.begin(), times.end(), t);
      return states[static_cast<std::size_t>(it - times.begin()) - 1];
    }
    auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t hi = static_cast<std::size_t>(it - times.begin());
    const std::size_t lo = hi - 1;
    const double w = (t - times[lo]) / (times[hi] - times[lo]);
    return (1.0 - w) * states[lo] + w * states[hi];
  }
};

namespace detail {

// Monotone reader of a trajectory for nondecreasing query times.
class Cursor {
 public:
  explicit Cursor(const Trajectory& p) : p_(p), value_(p.states.front().size()) {}

  /// Right-continuous value (left limit when `left`) at s >= previous query.
  const Vector& read(double s, bool left) {
    const auto& ts = p_.times;
    const std::size_t last = ts.size() - 1;
    if (p_.kind == TrajectoryKind::stochastic) {
      std::size_t& i = left ? left_ : right_;
      while (i < last && (left ? ts[i + 1] < s : ts[i + 1] <= s)) ++i;
      return p_.states[i];
    }
    while (right_ < last && ts[right_ + 1] <= s) ++right_;
    if (right_ == last || s <= ts[right_]) return p_.states[right_];
    const double w = (s - ts[right_]) / (ts[right_ + 1] - ts[right_]);
    value_ = (1.0 - w) * p_.states[right_] + w * p_.states[right_ + 1];
    return value_;
  }

 private:
  const Trajectory& p_;
  std::size_t right_ = 0;
  std::size_t left_ = 0;
  Vector value_;
};

}  // namespace detail

/// sup_{s <= t} max_i |a_i(s) - b_i(s)|.
///
/// Between consecutive breakpoints of either path both are affine in s, so
/// the max-norm gap is convex there and its supremum sits at an interval end
/// (taking one-sided limits of piecewise-constant paths).
inline double sup_distance(const Trajectory& a, const Trajectory& b, double t) {
  if (a.empty() || b.empty()) throw ParameterError("sup_distance: empty trajectory");
  if (!(t >= 0.0)) throw ParameterError("sup_distance: horizon must be nonnegative");
  for (const Trajectory* p : {&a, &b}) {
    if (p->start_time() > 0.0 || p->end_time() < t) {
      throw ParameterError("sup_distance: trajectory does not cover [0, t]");
    }
  }
  if (a.states.front().size() != b.states.front().size()) {
    throw ParameterError("sup_distance: dimension mismatch");
  }
  std::vector<double> grid;
  grid.reserve(a.size() + b.size() + 2);
  grid.push_back(0.0);
  {
    // Merge the two sorted time lists restricted to (0, t).
    std::size_t i = 0, j = 0;
    auto push = [&](double s) {
      if (s > 0.0 && s < t && s != grid.back()) grid.push_back(s);
    };
    while (i < a.size() || j < b.size()) {
      if (j >= b.size() || (i < a.size() && a.times[i] <= b.times[j])) {
        push(a.times[i++]);
      } else {
        push(b.times[j++]);
      }
    }
  }
  if (t > 0.0) grid.push_back(t);

  detail::Cursor ra(a), rb(b), la(a), lb(b);
  double sup = (ra.read(0.0, false) - rb.read(0.0, false)).lpNorm<Eigen::Infinity>();
  for (std::size_t j = 1; j < grid.size(); ++j) {
    const double s = grid[j];
    sup = std::max(sup, (la.read(s, true) - lb.read(s, true)).lpNorm<Eigen::Infinity>());
    sup = std::max(sup, (ra.read(s, false) - rb.read(s, false)).lpNorm<Eigen::Infinity>());
  }
  return sup;
}

}  // namespace tdsim
