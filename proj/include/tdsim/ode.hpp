#pragma once

// Integration of x' = F(x) for the mean-field limit, and of small linear
// systems z' = A z.
//
// Two explicit methods: classical fixed-step RK4 and adaptive Dormand-Prince
// 5(4). Every accepted step is kept together with the field value at its end
// point, which gives C^1 cubic Hermite dense output between steps.

#include "tdsim/model.hpp"
#include "tdsim/trajectory.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace tdsim::ode {

enum class Method { rk4, rk45 };

struct Settings {
  Method method = Method::rk4;
  double step = 1e-3;  // rk4 step; initial step guess for rk45
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double max_step = std::numeric_limits<double>::infinity();

  static Settings rk4(double h = 1e-3) {
    Settings s;
    s.method = Method::rk4;
    s.step = h;
    return s;
  }
  static Settings rk45(double rel = 1e-8, double abs = 1e-10) {
    Settings s;
    s.method = Method::rk45;
    s.rel_tol = rel;
    s.abs_tol = abs;
    return s;
  }

  std::string describe() const {
    if (method == Method::rk4) return "rk4 h=" + std::to_string(step);
    return "rk45 rtol=" + std::to_string(rel_tol) + " atol=" + std::to_string(abs_tol);
  }

  void validate() const {
    if (method == Method::rk4 && !(step > 0.0 && std::isfinite(step))) throw ParameterError("rk4 step must be positive");
    if (method == Method::rk45 && !(rel_tol > 0.0 && abs_tol > 0.0)) throw ParameterError("tolerances must be positive");
  }
};

/// Burn-in and observation horizons used for asymptotic classification.
inline constexpr double kBurnIn = 200.0;
inline constexpr double kObservation = 100.0;

/// Accepted steps plus end-point slopes; evaluates the Hermite interpolant.
struct Solution {
  Trajectory path;
  std::vector<Vector> slopes;

  double end_time() const { return path.end_time(); }
  const Vector& final_state() const { return path.states.back(); }

  Vector at(double t) const {
    const auto& ts = path.times;
    if (t <= ts.front()) return path.states.front();
    if (t >= ts.back()) return path.states.back();
    const std::size_t hi = static_cast<std::size_t>(std::upper_bound(ts.begin(), ts.end(), t) - ts.begin());
    return hermite(hi - 1, (t - ts[hi - 1]) / (ts[hi] - ts[hi - 1]));
  }

  /// Samples the dense output on a uniform grid (plus the end point).
  Trajectory resample(double dt) const {
    Trajectory out;
    out.kind = TrajectoryKind::deterministic;
    out.meta = path.meta;
    const double t0 = path.start_time();
    const double t1 = path.end_time();
    const auto steps = static_cast<std::size_t>(std::floor((t1 - t0) / dt));
    for (std::size_t j = 0; j <= steps; ++j) {
      const double t = t0 + static_cast<double>(j) * dt;
      if (t < t1) out.push(t, at(t));
    }
    out.push(t1, path.states.back());
    return out;
  }

  /// Min and max of coordinate i over [from, to], using the critical points
  /// of the cubic on every step.
  std::pair<double, double> extrema(Eigen::Index i, double from, double to) const {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    auto take = [&](double v) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    };
    take(at(from)[i]);
    take(at(to)[i]);
    const auto& ts = path.times;
    for (std::size_t j = 0; j + 1 < ts.size(); ++j) {
      if (ts[j + 1] <= from || ts[j] >= to) continue;
      if (ts[j] >= from) take(path.states[j][i]);
      const double h = ts[j + 1] - ts[j];
      const double y0 = path.states[j][i], y1 = path.states[j + 1][i];
      const double f0 = slopes[j][i] * h, f1 = slopes[j + 1][i] * h;
      // d/dtheta of the Hermite cubic: a theta^2 + b theta + c
      const double a = 6.0 * y0 + 3.0 * f0 - 6.0 * y1 + 3.0 * f1;
      const double b = -6.0 * y0 - 4.0 * f0 + 6.0 * y1 - 2.0 * f1;
      const double c = f0;
      std::array<double, 2> roots{};
      int n_roots = 0;
      if (std::abs(a) < 1e-300) {
        if (std::abs(b) > 1e-300) roots[n_roots++] = -c / b;
      } else {
        const double disc = b * b - 4.0 * a * c;
        if (disc >= 0.0) {
          const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
          if (q != 0.0) roots[n_roots++] = c / q;
          roots[n_roots++] = q / a;
        }
      }
      for (int r = 0; r < n_roots; ++r) {
        const double theta = roots[static_cast<std::size_t>(r)];
        const double t = ts[j] + theta * h;
        if (theta > 0.0 && theta < 1.0 && t >= from && t <= to) take(hermite(j, theta)[i]);
      }
    }
    return {lo, hi};
  }

 private:
  Vector hermite(std::size_t j, double theta) const {
    const double h = path.times[j + 1] - path.times[j];
    const double t2 = theta * theta, t3 = t2 * theta;
    return (2 * t3 - 3 * t2 + 1) * path.states[j] + (t3 - 2 * t2 + theta) * h * slopes[j] +
           (-2 * t3 + 3 * t2) * path.states[j + 1] + (t3 - t2) * h * slopes[j + 1];
  }
};

namespace detail {

inline void check_finite(const Vector& x, double t) {
  if (!x.allFinite()) throw SimulationError("non-finite state at t = " + std::to_string(t));
}

template <class Field>
void rk4(Field& f, Solution& sol, double t_end, double h) {
  double t = 0.0;
  Vector x = sol.path.states.back();
  Vector k1 = sol.slopes.back();
  while (t < t_end) {
    double step = h;
    // Avoid a sliver step at the end.
    if (t + step > t_end || t_end - (t + step) < 1e-12 * h) step = t_end - t;
    const Vector k2 = f(x + 0.5 * step * k1);
    const Vector k3 = f(x + 0.5 * step * k2);
    const Vector k4 = f(x + step * k3);
    x += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t = (step == t_end - t) ? t_end : t + step;
    check_finite(x, t);
    k1 = f(x);
    sol.path.push(t, x);
    sol.slopes.push_back(k1);
  }
}

template <class Field>
void dopri5(Field& f, Solution& sol, double t_end, const Settings& s) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                          b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
  (void)c2, (void)c3, (void)c4, (void)c5;

  // Continuous extension of the method at theta = 1/2 (Shampine's
  // coefficients), used to check the cubic Hermite midpoint.
  static constexpr auto mid = [] {
    constexpr double p[7][4] = {
        {1.0, -8048581381.0 / 2820520608, 8663915743.0 / 2820520608, -12715105075.0 / 11282082432},
        {0.0, 0.0, 0.0, 0.0},
        {0.0, 131558114200.0 / 32700410799, -68118460800.0 / 10900136933, 87487479700.0 / 32700410799},
        {0.0, -1754552775.0 / 470086768, 14199869525.0 / 1410260304, -10690763975.0 / 1880347072},
        {0.0, 127303824393.0 / 49829197408, -318862633887.0 / 49829197408, 701980252875.0 / 199316789632},
        {0.0, -282668133.0 / 205662961, 2019193451.0 / 616988883, -1453857185.0 / 822651844},
        {0.0, 40617522.0 / 29380423, -110615467.0 / 29380423, 69997945.0 / 29380423}};
    std::array<double, 7> w{};
    for (int i = 0; i < 7; ++i) w[i] = p[i][0] / 2 + p[i][1] / 4 + p[i][2] / 8 + p[i][3] / 16;
    return w;
  }();

  double t = 0.0;
  Vector x = sol.path.states.back();
  Vector k1 = sol.slopes.back();
  Vector next, k7;
  double h = std::min({s.step, s.max_step, t_end});

  auto weighted = [&](const Vector& e) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double scale = s.abs_tol + s.rel_tol * std::max(std::abs(x[i]), std::abs(next[i]));
      sum += (e[i] / scale) * (e[i] / scale);
    }
    return std::sqrt(sum / static_cast<double>(x.size()));
  };

  // Error of one trial step: the embedded estimate or the Hermite midpoint
  // defect, whichever is larger. Stages that leave the model's domain count
  // as a failed step.
  auto attempt = [&]() -> double {
    try {
      const Vector k2 = f(x + h * (a21 * k1));
      const Vector k3 = f(x + h * (a31 * k1 + a32 * k2));
      const Vector k4 = f(x + h * (a41 * k1 + a42 * k2 + a43 * k3));
      const Vector k5 = f(x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      const Vector k6 = f(x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      next = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      k7 = f(next);
      const Vector err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      const Vector dense = x + h * (mid[0] * k1 + mid[2] * k3 + mid[3] * k4 + mid[4] * k5 + mid[5] * k6 +
                                    mid[6] * k7);
      const Vector hermite = 0.5 * (x + next) + (h / 8.0) * (k1 - k7);
      return std::max(weighted(err), weighted(dense - hermite));
    } catch (const ParameterError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  while (t < t_end) {
    if (h < 1e-14 * std::max(1.0, std::abs(t))) {
      throw SimulationError("step size underflow at t = " + std::to_string(t));
    }
    const bool last = t + h >= t_end;
    if (last) h = t_end - t;
    const double norm = attempt();
    if (!std::isfinite(norm)) {
      h *= 0.2;
      continue;
    }
    if (norm <= 1.0) {
      t = last ? t_end : t + h;
      x = next;
      check_finite(x, t);
      k1 = k7;
      sol.path.push(t, x);
      sol.slopes.push_back(k1);
    }
    const double factor = norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(norm, -0.2), 0.2, 5.0);
    h = std::min(h * (norm <= 1.0 ? factor : std::min(1.0, factor)), s.max_step);
  }
}

}  // namespace detail

/// Solves z' = field(z) on [0, t_end].
template <class Field>
Solution integrate_field(Field field, const Vector& z0, double t_end, const Settings& settings) {
  settings.validate();
  if (!std::isfinite(t_end) || t_end < 0.0) throw ParameterError("t_end must be finite and >= 0");
  detail::check_finite(z0, 0.0);
  Solution sol;
  sol.path.kind = TrajectoryKind::deterministic;
  sol.path.meta.integrator = settings.describe();
  sol.path.push(0.0, z0);
  sol.slopes.push_back(field(z0));
  if (t_end == 0.0) return sol;
  if (settings.method == Method::rk4) {
    detail::rk4(field, sol, t_end, settings.step);
  } else {
    detail::dopri5(field, sol, t_end, settings);
  }
  return sol;
}

/// Mean-field limit x' = F(x) from x0 in [0,1]^k.
inline Solution integrate(const LoopSpec& spec, const Vector& x0, double t_end, const Settings& settings = {}) {
  spec.validate();
  if (x0.size() != spec.k) throw ParameterError("initial state has wrong dimension");
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    if (!(x0[i] >= 0.0 && x0[i] <= 1.0)) throw ParameterError("initial state outside [0,1]^k");
  }
  Solution sol = integrate_field([&spec](const Vector& x) { return vector_field(spec, x); }, x0, t_end, settings);
  sol.path.meta.spec = spec;
  return sol;
}

inline Solution integrate_linear(const Matrix& a, const Vector& z0, double t_end, const Settings& settings = {}) {
  if (a.rows() != a.cols() || a.cols() != z0.size()) throw ParameterError("dimension mismatch in linear system");
  return integrate_field([&a](const Vector& z) -> Vector { return a * z; }, z0, t_end, settings);
}

}  // namespace tdsim::ode
