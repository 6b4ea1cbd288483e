#pragma once

// Mean-field type-dependent stochastic Ising model on a cyclic feedback loop.
//
// Types 0..k-1 sit on a cycle. Type i is inhibited (J > 0) or activated
// (J < 0) by its anticlockwise neighbour a(i) with weight delta*J and by its
// clockwise neighbour h(i) with weight (1-delta)*J. All rates depend on a
// configuration only through per-type densities x_i in [0,1].

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tdsim {

class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Largest admissible magnitude of a rate exponent before exp() leaves
/// double range.
inline constexpr double kMaxExponent = 700.0;

struct LoopSpec {
  int k = 3;
  double J = 0.0;
  double delta = 0.0;
  std::vector<double> kappa = std::vector<double>(3, 0.0);
  int N = 1;

  /// External fields kappa_i = J/2 for every type; (1/2,...,1/2) is then a
  /// fixed point of the limiting flow.
  static LoopSpec half_J(double J, double delta, int N = 1, int k = 3) {
    LoopSpec s;
    s.k = k;
    s.J = J;
    s.delta = delta;
    s.kappa.assign(static_cast<std::size_t>(k), J / 2.0);
    s.N = N;
    return s;
  }

  LoopSpec with_N(int n) const {
    LoopSpec s = *this;
    s.N = n;
    return s;
  }

  int clockwise(int i) const { return (i + 1) % k; }
  int anticlockwise(int i) const { return (i - 1 + k) % k; }

  void validate() const {
    if (k < 2) throw ParameterError("k must be >= 2, got " + std::to_string(k));
    if (N < 1) throw ParameterError("N must be >= 1, got " + std::to_string(N));
    if (!std::isfinite(J)) throw ParameterError("J must be finite");
    if (!std::isfinite(delta)) throw ParameterError("delta must be finite");
    if (delta < 0.0 || delta > 1.0) throw ParameterError("delta must lie in [0,1]");
    if (kappa.size() != static_cast<std::size_t>(k)) {
      throw ParameterError("kappa must have k=" + std::to_string(k) + " entries, got " +
                           std::to_string(kappa.size()));
    }
    for (double v : kappa) {
      if (!std::isfinite(v)) throw ParameterError("kappa entries must be finite");
    }
  }

  bool operator==(const LoopSpec&) const = default;
};

inline void require_k3(const LoopSpec& spec, const char* what) {
  if (spec.k != 3) {
    throw ParameterError(std::string(what) + " is defined for k = 3 only, got k = " +
                         std::to_string(spec.k));
  }
}

/// Macroscopic state. grid == 0 marks a continuum point (ODE states);
/// otherwise every N*x_i is an integer.
struct DensityState {
  Vector x;
  int grid = 0;

  static DensityState from_counts(const std::vector<int>& counts, int N) {
    DensityState s;
    s.grid = N;
    s.x.resize(static_cast<Eigen::Index>(counts.size()));
    for (std::size_t i = 0; i < counts.size(); ++i) {
      s.x[static_cast<Eigen::Index>(i)] = static_cast<double>(counts[i]) / N;
    }
    return s;
  }

  /// Nearest grid point to an arbitrary point of [0,1]^k.
  static DensityState nearest(const Vector& p, int N) {
    std::vector<int> counts(static_cast<std::size_t>(p.size()));
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      counts[static_cast<std::size_t>(i)] = static_cast<int>(std::lround(std::clamp(p[i], 0.0, 1.0) * N));
    }
    return from_counts(counts, N);
  }

  std::vector<int> counts() const {
    std::vector<int> c(static_cast<std::size_t>(x.size()));
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      c[static_cast<std::size_t>(i)] = static_cast<int>(std::lround(x[i] * grid));
    }
    return c;
  }

  void validate(const LoopSpec& spec) const {
    if (x.size() != spec.k) throw ParameterError("density state has wrong dimension");
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (!(x[i] >= 0.0 && x[i] <= 1.0)) throw ParameterError("density outside [0,1]");
      if (grid > 0) {
        const double scaled = x[i] * grid;
        if (std::abs(scaled - std::round(scaled)) > 1e-9) {
          throw ParameterError("density state is not on the 1/N grid");
        }
      }
    }
    if (grid > 0 && grid != spec.N) throw ParameterError("density grid does not match N");
  }
};

/// Jump vector sign * e_index of the density-profile process.
struct JumpDirection {
  int index = 0;
  int sign = +1;

  bool operator==(const JumpDirection&) const = default;
};

inline std::vector<JumpDirection> all_directions(int k) {
  std::vector<JumpDirection> dirs;
  dirs.reserve(static_cast<std::size_t>(2 * k));
  for (int i = 0; i < k; ++i) {
    dirs.push_back({i, +1});
    dirs.push_back({i, -1});
  }
  return dirs;
}

struct FlipRates {
  double up = 0.0;    // -1 -> +1
  double down = 0.0;  // +1 -> -1
};

namespace detail {

// 2[-delta*J*x_a - (1-delta)*J*x_h + kappa_i]; no validation.
inline double activation_exponent(const LoopSpec& spec, int i, double x_anti, double x_clock) {
  // -delta J x_anti - (1-delta) J x_clock + kappa_i, grouped so that equal
  // neighbours cancel exactly.
  return 2.0 * (spec.kappa[static_cast<std::size_t>(i)] - spec.J * (x_clock + spec.delta * (x_anti - x_clock)));
}

inline double checked_exponent(const LoopSpec& spec, int i, double x_anti, double x_clock) {
  const double e = activation_exponent(spec, i, x_anti, x_clock);
  if (!(std::abs(e) <= kMaxExponent)) {
    throw ParameterError("rate exponent " + std::to_string(e) + " for type " + std::to_string(i) +
                         " exceeds double range");
  }
  return e;
}

inline double exponent_at(const LoopSpec& spec, const Vector& x, int i) {
  return checked_exponent(spec, i, x[spec.anticlockwise(i)], x[spec.clockwise(i)]);
}

}  // namespace detail

inline FlipRates flip_rates(const LoopSpec& spec, const Vector& x, int i) {
  spec.validate();
  if (i < 0 || i >= spec.k) throw ParameterError("type index out of range");
  if (x.size() != spec.k) throw ParameterError("state has wrong dimension");
  const double e = detail::exponent_at(spec, x, i);
  return {std::exp(e), std::exp(-e)};
}

/// beta_l(x). The process performs this jump at rate N * beta_l(x).
inline double jump_rate(const LoopSpec& spec, const Vector& x, JumpDirection d) {
  const FlipRates r = flip_rates(spec, x, d.index);
  const double xi = x[d.index];
  return d.sign > 0 ? (1.0 - xi) * r.up : xi * r.down;
}

inline double jump_rate(const LoopSpec& spec, const DensityState& s, JumpDirection d) {
  return jump_rate(spec, s.x, d);
}

inline Vector vector_field(const LoopSpec& spec, const Vector& x) {
  spec.validate();
  if (x.size() != spec.k) throw ParameterError("state has wrong dimension");
  Vector f(spec.k);
  for (int i = 0; i < spec.k; ++i) {
    const double e = detail::exponent_at(spec, x, i);
    f[i] = (1.0 - x[i]) * std::exp(e) - x[i] * std::exp(-e);
  }
  return f;
}

inline Matrix jacobian(const LoopSpec& spec, const Vector& x) {
  spec.validate();
  if (x.size() != spec.k) throw ParameterError("state has wrong dimension");
  Matrix jac = Matrix::Zero(spec.k, spec.k);
  for (int i = 0; i < spec.k; ++i) {
    const double e = detail::exponent_at(spec, x, i);
    const double ep = std::exp(e);
    const double em = std::exp(-e);
    // dF_i/dE_i
    const double gain = (1.0 - x[i]) * ep + x[i] * em;
    jac(i, i) += -ep - em;
    jac(i, spec.anticlockwise(i)) += gain * (-2.0 * spec.delta * spec.J);
    jac(i, spec.clockwise(i)) += gain * (-2.0 * (1.0 - spec.delta) * spec.J);
  }
  return jac;
}

inline Vector symmetric_point(int k = 3) { return Vector::Constant(k, 0.5); }

inline std::string type_name(int i, int k) {
  if (k == 3) return std::string(1, static_cast<char>('A' + i));
  return std::to_string(i);
}

}  // namespace tdsim
