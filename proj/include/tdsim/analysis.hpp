#pragma once

// Linear stability and bifurcation structure of the three-type loop with
// kappa_i = J/2, where x* = (1/2, 1/2, 1/2) is always a fixed point.
//
// The Jacobian at x* is the circulant -2 * circ(1, (1-delta)J, delta*J). Its
// eigenvalues are
//   -2(J + 1)                               along the diagonal (1,1,1),
//   (J - 2) +- sqrt(3) J (1 - 2 delta) i    on the orthogonal plane,
// so x* is stable for -1 < J < 2, a pitchfork occurs at J = -1 and a Hopf
// bifurcation at J = 2 (delta != 1/2).

#include "tdsim/jump.hpp"
#include "tdsim/model.hpp"
#include "tdsim/ode.hpp"
#include "tdsim/parallel.hpp"
#include "tdsim/trajectory.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace tdsim::analysis {

using Complex = std::complex<double>;

inline constexpr double kEigenTolerance = 1e-9;  // epsilon_lambda
inline constexpr double kAmplitudeTolerance = 1e-3;
inline constexpr double kSpectrumAgreement = 1e-8;

struct Spectrum {
  /// Sorted by real part, then imaginary part, both descending.
  std::array<Complex, 3> eigenvalues;
};

inline Spectrum canonical(std::array<Complex, 3> ev) {
  std::sort(ev.begin(), ev.end(), [](Complex a, Complex b) {
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() > b.imag();
  });
  return {ev};
}

/// Largest distance between matched eigenvalues (greedy nearest matching, so
/// near-ties in the canonical order cannot cause spurious mismatches).
inline double spectrum_distance(const Spectrum& a, const Spectrum& b) {
  std::array<bool, 3> used{};
  double worst = 0.0;
  for (const Complex& x : a.eigenvalues) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < 3; ++j) {
      if (used[j]) continue;
      const double d = std::abs(x - b.eigenvalues[j]);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    used[best] = true;
    worst = std::max(worst, best_d);
  }
  return worst;
}

inline Spectrum numerical_spectrum(const Matrix& m) {
  if (m.rows() != 3 || m.cols() != 3) throw ParameterError("numerical_spectrum expects a 3x3 matrix");
  Eigen::EigenSolver<Matrix> solver(m, false);
  if (solver.info() != Eigen::Success) throw SimulationError("eigenvalue computation failed");
  const Eigen::VectorXcd ev = solver.eigenvalues();
  return canonical({ev[0], ev[1], ev[2]});
}

/// Real eigenvalue of the diagonal mode.
inline double diagonal_eigenvalue(double J) { return -2.0 * (J + 1.0); }

/// Complex pair (J - 2) +- i sqrt(3) J (1 - 2 delta); returns the member with
/// the sign of J(1 - 2 delta) on the imaginary part.
inline Complex planar_eigenvalue(double J, double delta) {
  return {J - 2.0, std::numbers::sqrt3 * J * (1.0 - 2.0 * delta)};
}

inline Matrix symmetric_jacobian(double J, double delta) {
  return jacobian(LoopSpec::half_J(J, delta), symmetric_point());
}

inline Spectrum closed_form_spectrum(double J, double delta) {
  const Complex p = planar_eigenvalue(J, delta);
  return canonical({Complex(diagonal_eigenvalue(J), 0.0), p, std::conj(p)});
}

/// Closed-form spectrum at x*, cross-checked against a numerical
/// diagonalisation of the analytic Jacobian.
inline Spectrum symmetric_spectrum(double J, double delta) {
  LoopSpec::half_J(J, delta).validate();
  const Spectrum closed = closed_form_spectrum(J, delta);
  const Spectrum numeric = numerical_spectrum(symmetric_jacobian(J, delta));
  const double gap = spectrum_distance(closed, numeric);
  if (!(gap <= kSpectrumAgreement * std::max(1.0, std::abs(J)))) {
    throw SimulationError("closed-form and numerical spectra disagree by " + std::to_string(gap));
  }
  return closed;
}

/// Roots of sinh(2Jy) + 2y cosh(2Jy) = 0 in (-1/2, 1/2), ascending. The
/// diagonal point x = 1/2 + y is then a fixed point; nonzero roots exist only
/// for J < -1 and solve J = log((1-2y)/(1+2y)) / (4y).
inline std::vector<double> fixed_point_branch(double J) {
  if (!std::isfinite(J)) throw ParameterError("J must be finite");
  if (J >= -1.0) return {0.0};
  auto g = [J](double y) { return std::sinh(2.0 * J * y) + 2.0 * y * std::cosh(2.0 * J * y); };
  // g < 0 just above 0 (slope 2(J+1)) and g(1/2) = e^J > 0.
  double lo = 0.0, hi = 0.5;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) < 0.0 || mid == lo) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double y = 0.5 * (lo + hi);
  return {-y, 0.0, y};
}

inline double branch_residual(double J, double y) {
  return std::abs(std::sinh(2.0 * J * y) + 2.0 * y * std::cosh(2.0 * J * y));
}

enum class Classification { stable_point, bistable, oscillatory, degenerate };

inline std::string_view to_string(Classification c) {
  switch (c) {
    case Classification::stable_point: return "stable-point";
    case Classification::bistable: return "bistable";
    case Classification::oscillatory: return "oscillatory";
    case Classification::degenerate: return "degenerate";
  }
  return "?";
}

inline std::optional<Classification> classification_from_string(std::string_view s) {
  for (auto c : {Classification::stable_point, Classification::bistable, Classification::oscillatory,
                 Classification::degenerate}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

struct BifurcationRecord {
  double J = 0.0;
  double delta = 0.0;
  Spectrum spectrum;
  Classification classification = Classification::degenerate;
  std::vector<Vector> fixed_points;     // stable ones
  std::vector<Vector> unstable_points;  // x* once it has lost stability
  Vector orbit_min;                     // oscillatory only
  Vector orbit_max;
  bool amplitude_confirmed = false;     // oscillatory: max - min > kAmplitudeTolerance

  double amplitude(Eigen::Index i = 0) const {
    return orbit_max.size() > i ? orbit_max[i] - orbit_min[i] : 0.0;
  }
};

/// Orthonormal rotation taking y = x - x* to z = R^T y; its third column is
/// the diagonal (1,1,1)/sqrt(3).
inline Matrix rotation_matrix() {
  const double s6 = std::sqrt(6.0), s2 = std::numbers::sqrt2, s3 = std::numbers::sqrt3;
  Matrix r(3, 3);
  r << 1 / s6, -1 / s2, 1 / s3,
       1 / s6, 1 / s2, 1 / s3,
      -2 / s6, 0, 1 / s3;
  return r;
}

/// Point x* + r * (first rotated axis); starting point for orbit tracking.
inline Vector planar_offset(double r) { return symmetric_point() + r * rotation_matrix().col(0); }

/// Asymptotic per-coordinate range of the orbit starting near x*.
inline std::pair<Vector, Vector> orbit_extrema(double J, double delta, double burn_in = ode::kBurnIn,
                                               double observe = ode::kObservation) {
  const LoopSpec spec = LoopSpec::half_J(J, delta);
  const ode::Solution sol = ode::integrate(spec, planar_offset(0.05), burn_in + observe, ode::Settings::rk45());
  Vector lo(3), hi(3);
  for (Eigen::Index i = 0; i < 3; ++i) {
    const auto [a, b] = sol.extrema(i, burn_in, burn_in + observe);
    lo[i] = a;
    hi[i] = b;
  }
  return {lo, hi};
}

inline BifurcationRecord classify(double J, double delta) {
  if (!(delta >= 0.0 && delta <= 1.0)) throw ParameterError("delta must lie in [0,1]");
  BifurcationRecord rec;
  rec.J = J;
  rec.delta = delta;
  rec.spectrum = symmetric_spectrum(J, delta);
  const double diag = diagonal_eigenvalue(J);
  const Complex planar = planar_eigenvalue(J, delta);
  const Vector center = symmetric_point();

  const bool marginal = std::abs(diag) <= kEigenTolerance || std::abs(planar.real()) <= kEigenTolerance;
  if (marginal) {
    rec.classification = Classification::degenerate;
    rec.fixed_points = {center};
  } else if (diag < 0.0 && planar.real() < 0.0) {
    rec.classification = Classification::stable_point;
    rec.fixed_points = {center};
  } else if (diag > 0.0) {
    rec.classification = Classification::bistable;
    for (double y : fixed_point_branch(J)) {
      if (y != 0.0) rec.fixed_points.push_back(Vector::Constant(3, 0.5 + y));
    }
    rec.unstable_points = {center};
  } else if (std::abs(planar.imag()) <= kEigenTolerance) {
    // delta = 1/2: real double eigenvalue, no rotation.
    rec.classification = Classification::degenerate;
    rec.unstable_points = {center};
  } else {
    rec.classification = Classification::oscillatory;
    rec.unstable_points = {center};
    std::tie(rec.orbit_min, rec.orbit_max) = orbit_extrema(J, delta);
    rec.amplitude_confirmed = rec.amplitude(0) > kAmplitudeTolerance;
  }
  return rec;
}

/// classify() over a J grid; records come back in grid order.
inline std::vector<BifurcationRecord> scan(const std::vector<double>& J_grid, double delta) {
  for (double J : J_grid) {
    if (!std::isfinite(J)) throw ParameterError("J grid must be finite");
  }
  std::vector<BifurcationRecord> out(J_grid.size());
  parallel_for(J_grid.size(), [&](std::size_t i) { out[i] = classify(J_grid[i], delta); });
  return out;
}

/// start, start + step, ... up to stop (inclusive within half a step).
inline std::vector<double> make_grid(double start, double stop, double step) {
  if (!std::isfinite(start) || !std::isfinite(stop) || !std::isfinite(step)) {
    throw ParameterError("grid bounds must be finite");
  }
  if (start == stop) return {start};
  if (!(step > 0.0) || stop < start) throw ParameterError("grid needs start <= stop and step > 0");
  const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 0.5));
  std::vector<double> g(n + 1);
  for (std::size_t i = 0; i <= n; ++i) g[i] = start + static_cast<double>(i) * step;
  return g;
}

inline Matrix z_system_closed_form(double J, double delta) {
  const double w = std::numbers::sqrt3 * J * (2.0 * delta - 1.0);
  Matrix a(3, 3);
  a << J - 2.0, w, 0.0,
       -w, J - 2.0, 0.0,
       0.0, 0.0, -(2.0 * J + 2.0);
  return a;
}

/// Linearisation at x* in rotated coordinates, R^T DF(x*) R.
inline Matrix z_system(double J, double delta) {
  const Matrix r = rotation_matrix();
  const Matrix a = r.transpose() * symmetric_jacobian(J, delta) * r;
  const Matrix closed = z_system_closed_form(J, delta);
  const double gap = (a - closed).lpNorm<Eigen::Infinity>();
  if (!(gap <= 1e-10 * std::max(1.0, std::abs(J)))) {
    throw SimulationError("rotated Jacobian deviates from closed form by " + std::to_string(gap));
  }
  return a;
}

struct PolarRates {
  double radial = 0.0;   // r'/r
  double angular = 0.0;  // theta'
};

/// Polar form of the planar linear flow: r' = (J-2) r, theta' = -sqrt(3) J (2 delta - 1).
inline PolarRates polar_rates(double J, double delta) {
  return {J - 2.0, -std::numbers::sqrt3 * J * (2.0 * delta - 1.0)};
}

struct ConvergenceRow {
  int N = 0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  std::vector<double> distances;  // per replica, replica order
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  /// Least-squares slope of log(median) against log(N); NaN with < 2 rows.
  double slope = std::numeric_limits<double>::quiet_NaN();
  bool medians_decreasing = true;
};

/// Linear-interpolation quantile of sorted data.
inline double quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double log_log_slope(const std::vector<ConvergenceRow>& rows) {
  if (rows.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(rows.size());
  for (const auto& r : rows) {
    const double x = std::log(double(r.N)), y = std::log(r.median);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Sup-distance between SSA paths and the ODE limit for each N.
///
/// Replica r at N-index j uses random stream j * 2^32 + r of `seed`. Paths
/// start from the grid point nearest x0; the reference solves the ODE from
/// x0 with RK45 at rel tol 1e-8.
inline ConvergenceTable convergence_experiment(const LoopSpec& base, const std::vector<int>& Ns, const Vector& x0,
                                               double t, int replicas, std::uint64_t seed) {
  base.validate();
  if (replicas < 0) throw ParameterError("replicas must be >= 0");
  if (!std::isfinite(t) || t < 0.0) throw ParameterError("t must be finite and >= 0");
  ConvergenceTable table;
  if (replicas == 0) return table;

  const ode::Solution reference = ode::integrate(base, x0, t, ode::Settings::rk45(1e-8, 1e-10));
  const Trajectory ref_path = reference.resample(1e-3);

  for (std::size_t j = 0; j < Ns.size(); ++j) {
    const LoopSpec spec = base.with_N(Ns[j]);
    spec.validate();
    const DensityState start = DensityState::nearest(x0, spec.N);
    ConvergenceRow row;
    row.N = spec.N;
    row.distances.resize(static_cast<std::size_t>(replicas));
    parallel_for(static_cast<std::size_t>(replicas), [&](std::size_t r) {
      const std::uint64_t stream = (static_cast<std::uint64_t>(j) << 32) | r;
      const Trajectory path = jump::ssa_simulate(spec, start, t, seed, 1, stream);
      row.distances[r] = sup_distance(path, ref_path, t);
    });
    std::vector<double> sorted = row.distances;
    std::sort(sorted.begin(), sorted.end());
    row.median = quantile(sorted, 0.5);
    row.q25 = quantile(sorted, 0.25);
    row.q75 = quantile(sorted, 0.75);
    table.rows.push_back(std::move(row));
  }
  for (std::size_t j = 1; j < table.rows.size(); ++j) {
    if (!(table.rows[j].median < table.rows[j - 1].median)) table.medians_decreasing = false;
  }
  table.slope = log_log_slope(table.rows);
  return table;
}

}  // namespace tdsim::analysis
