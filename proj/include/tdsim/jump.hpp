#pragma once

// Exact simulation of the density-profile process X^N(t).
//
// At state x the process leaves through one of the 2k jumps +-e_i/N with rate
// N*beta_l(x). This is the direct Gillespie method: the holding time is
// exponential with rate Lambda(x) = N * sum_l beta_l(x) and the jump is drawn
// with probability N*beta_l(x)/Lambda(x). It has the same law as the random
// time-change construction X(t) = X(0) + sum_l l/N * Y_l(N int beta_l).

#include "tdsim/model.hpp"
#include "tdsim/rng.hpp"
#include "tdsim/trajectory.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace tdsim::jump {

/// Default recording stride: every event up to N = 1000, ceil(N/100) beyond.
inline int default_thinning(int N) { return N <= 1000 ? 1 : (N + 99) / 100; }

namespace detail {

// N * beta_l for every direction, ordered (+e_0, -e_0, +e_1, ...).
inline double channel_rates(const LoopSpec& spec, const std::vector<int>& counts,
                            std::vector<double>& rates) {
  const double n = spec.N;
  double total = 0.0;
  for (int i = 0; i < spec.k; ++i) {
    const double e = tdsim::detail::checked_exponent(
        spec, i, counts[static_cast<std::size_t>(spec.anticlockwise(i))] / n,
        counts[static_cast<std::size_t>(spec.clockwise(i))] / n);
    const double up = (spec.N - counts[static_cast<std::size_t>(i)]) * std::exp(e);
    const double down = counts[static_cast<std::size_t>(i)] * std::exp(-e);
    rates[static_cast<std::size_t>(2 * i)] = up;
    rates[static_cast<std::size_t>(2 * i + 1)] = down;
    total += up + down;
  }
  return total;
}

inline Vector to_density(const std::vector<int>& counts, int N) {
  Vector x(static_cast<Eigen::Index>(counts.size()));
  for (std::size_t i = 0; i < counts.size(); ++i) x[static_cast<Eigen::Index>(i)] = double(counts[i]) / N;
  return x;
}

}  // namespace detail

/// Lambda(x) = N * sum_l beta_l(x).
inline double total_rate(const LoopSpec& spec, const DensityState& x) {
  spec.validate();
  x.validate(spec);
  std::vector<double> rates(static_cast<std::size_t>(2 * spec.k));
  return detail::channel_rates(spec, x.counts(), rates);
}

/// One exact sample path on [0, t_end]. The first entry is x0 at time 0 and,
/// when t_end > 0, the last entry is the state at t_end. Between those every
/// `thinning`-th event is kept (0 selects default_thinning(N)).
inline Trajectory ssa_simulate(const LoopSpec& spec, const DensityState& x0, double t_end,
                               std::uint64_t seed, int thinning = 0, std::uint64_t stream = 0) {
  spec.validate();
  x0.validate(spec);
  if (x0.grid != spec.N) throw ParameterError("initial state must lie on the 1/N grid");
  if (!std::isfinite(t_end) || t_end < 0.0) throw ParameterError("t_end must be finite and >= 0");
  if (thinning < 0) throw ParameterError("thinning must be >= 0");
  const int stride = thinning == 0 ? default_thinning(spec.N) : thinning;

  Trajectory path;
  path.kind = TrajectoryKind::stochastic;
  path.meta.spec = spec;
  path.meta.seed = seed;

  std::vector<int> counts = x0.counts();
  path.push(0.0, detail::to_density(counts, spec.N));
  if (t_end == 0.0) return path;

  rng::Engine gen = rng::make_stream(seed, stream);
  std::vector<double> rates(static_cast<std::size_t>(2 * spec.k));
  double t = 0.0;
  std::uint64_t events = 0;
  for (;;) {
    const double lambda = detail::channel_rates(spec, counts, rates);
    if (!(lambda > 0.0)) {
      throw SimulationError("absorbing state reached at t = " + std::to_string(t));
    }
    t += rng::exponential(gen, lambda);
    if (t >= t_end) break;
    double target = rng::uniform01(gen) * lambda;
    std::size_t channel = 0;
    for (; channel + 1 < rates.size(); ++channel) {
      if (target < rates[channel]) break;
      target -= rates[channel];
    }
    // Roundoff can leave target past the last positive channel.
    while (rates[channel] == 0.0) --channel;
    const std::size_t type = channel / 2;
    counts[type] += (channel % 2 == 0) ? 1 : -1;
    ++events;
    if (events % static_cast<std::uint64_t>(stride) == 0) {
      path.push(t, detail::to_density(counts, spec.N));
    }
  }
  path.push(t_end, detail::to_density(counts, spec.N));
  return path;
}

/// Mixed-radix index of a count vector on {0..N}^k (type 0 least significant).
inline std::size_t grid_index(const std::vector<int>& counts, int N) {
  std::size_t idx = 0;
  for (std::size_t i = counts.size(); i-- > 0;) idx = idx * static_cast<std::size_t>(N + 1) + counts[i];
  return idx;
}

inline std::vector<int> grid_counts(std::size_t idx, int k, int N) {
  std::vector<int> c(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    c[static_cast<std::size_t>(i)] = static_cast<int>(idx % static_cast<std::size_t>(N + 1));
    idx /= static_cast<std::size_t>(N + 1);
  }
  return c;
}

/// Generator of X^N on its (N+1)^k grid. Products and the diagonal sum are
/// formed in extended precision and rounded once.
inline Matrix density_generator(const LoopSpec& spec) {
  spec.validate();
  std::size_t states = 1;
  for (int i = 0; i < spec.k; ++i) states *= static_cast<std::size_t>(spec.N + 1);
  if (states > 20000) throw ParameterError("density_generator: grid too large");
  Matrix q = Matrix::Zero(static_cast<Eigen::Index>(states), static_cast<Eigen::Index>(states));
  for (std::size_t s = 0; s < states; ++s) {
    const std::vector<int> c = grid_counts(s, spec.k, spec.N);
    long double out = 0.0L;
    for (int i = 0; i < spec.k; ++i) {
      const double e = tdsim::detail::checked_exponent(
          spec, i, double(c[static_cast<std::size_t>(spec.anticlockwise(i))]) / spec.N,
          double(c[static_cast<std::size_t>(spec.clockwise(i))]) / spec.N);
      const int n = c[static_cast<std::size_t>(i)];
      for (const int sign : {+1, -1}) {
        const int m = sign > 0 ? spec.N - n : n;
        if (m == 0) continue;
        const long double r = static_cast<long double>(m) * std::exp(sign * e);
        std::vector<int> c2 = c;
        c2[static_cast<std::size_t>(i)] += sign;
        q(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(grid_index(c2, spec.N))) = static_cast<double>(r);
        out += r;
      }
    }
    q(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s)) = -static_cast<double>(out);
  }
  return q;
}

}  // namespace tdsim::jump
