#pragma once

// Spin-level view of the model on small systems.
//
// Site (i, n) is position n of type i; sigma(i, n) = +1 means a molecule of
// type i is present there. Couplings are mean-field: the influence of a site
// in state a of type j on a site in state b of type i is alpha / N with
//
//   alpha = -delta*J*b       if i = h(j) and a = +1
//         = -(1-delta)*J*b   if i = a(j) and a = +1
//         = kappa_j          if i = j
//         = 0                otherwise.
//
// Flip rates are the TDSIM rates of model.hpp, which depend on sigma only
// through the counts of +1 spins of the two neighbouring types.

#include "tdsim/jump.hpp"
#include "tdsim/model.hpp"
#include "tdsim/rng.hpp"
#include "tdsim/trajectory.hpp"

#include <Eigen/Sparse>

#include <cmath>
#include <cstdint>
#include <algorithm>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace tdsim::micro {

/// Exact enumerations are capped at 2^20 configurations.
inline constexpr int kMaxEnumeratedSites = 20;

class SpinConfiguration {
 public:
  SpinConfiguration(LoopSpec spec, std::vector<int> spins) : spec_(std::move(spec)), spins_(std::move(spins)) {
    spec_.validate();
    if (spins_.size() != static_cast<std::size_t>(spec_.k * spec_.N)) {
      throw ParameterError("spin array must have k*N entries");
    }
    for (int s : spins_) {
      if (s != 1 && s != -1) throw ParameterError("spins must be +1 or -1");
    }
  }

  /// All spins -1.
  explicit SpinConfiguration(LoopSpec spec)
      : SpinConfiguration(spec, std::vector<int>(static_cast<std::size_t>(spec.k * spec.N), -1)) {}

  /// Bit i*N+n of `bits` set means sigma(i, n) = +1.
  static SpinConfiguration from_bits(const LoopSpec& spec, std::uint64_t bits) {
    std::vector<int> s(static_cast<std::size_t>(spec.k * spec.N));
    for (std::size_t b = 0; b < s.size(); ++b) s[b] = ((bits >> b) & 1U) ? 1 : -1;
    return SpinConfiguration(spec, std::move(s));
  }

  /// First round(x_i N) positions of each type set to +1.
  static SpinConfiguration from_density(const LoopSpec& spec, const Vector& x) {
    const DensityState g = DensityState::nearest(x, spec.N);
    const std::vector<int> c = g.counts();
    SpinConfiguration cfg(spec);
    for (int i = 0; i < spec.k; ++i) {
      for (int n = 0; n < c[static_cast<std::size_t>(i)]; ++n) cfg.set(i, n, 1);
    }
    return cfg;
  }

  const LoopSpec& spec() const { return spec_; }
  int at(int i, int n) const { return spins_[index(i, n)]; }
  void set(int i, int n, int value) { spins_[index(i, n)] = value; }
  void flip(int i, int n) { spins_[index(i, n)] = -spins_[index(i, n)]; }

  std::uint64_t bits() const {
    std::uint64_t b = 0;
    for (std::size_t s = 0; s < spins_.size(); ++s) {
      if (spins_[s] == 1) b |= (std::uint64_t{1} << s);
    }
    return b;
  }

  std::vector<int> counts() const {
    std::vector<int> c(static_cast<std::size_t>(spec_.k), 0);
    for (int i = 0; i < spec_.k; ++i) {
      for (int n = 0; n < spec_.N; ++n) c[static_cast<std::size_t>(i)] += at(i, n) == 1;
    }
    return c;
  }

  /// Density profile x_i = |{n : sigma(i, n) = +1}| / N.
  DensityState projection() const { return DensityState::from_counts(counts(), spec_.N); }

 private:
  std::size_t index(int i, int n) const { return static_cast<std::size_t>(i * spec_.N + n); }

  LoopSpec spec_;
  std::vector<int> spins_;
};

inline double alpha(const LoopSpec& spec, int influencer_type, int influencer_spin, int target_type,
                    int target_spin) {
  if (target_type == spec.clockwise(influencer_type) && influencer_spin == 1) {
    return -spec.delta * spec.J * target_spin;
  }
  if (target_type == spec.anticlockwise(influencer_type) && influencer_spin == 1) {
    return -(1.0 - spec.delta) * spec.J * target_spin;
  }
  if (target_type == influencer_type) return spec.kappa[static_cast<std::size_t>(influencer_type)];
  return 0.0;
}

/// H(sigma) = -sum_{(i,n)} sum_{(j,l)} alpha[(j, sigma(j,l)); (i, sigma(i,n))] / N,
/// diagonal pair included.
inline double hamiltonian(const SpinConfiguration& config) {
  const LoopSpec& spec = config.spec();
  require_k3(spec, "hamiltonian");
  double sum = 0.0;
  for (int i = 0; i < spec.k; ++i) {
    for (int n = 0; n < spec.N; ++n) {
      for (int j = 0; j < spec.k; ++j) {
        for (int l = 0; l < spec.N; ++l) sum += alpha(spec, j, config.at(j, l), i, config.at(i, n));
      }
    }
  }
  return -sum / spec.N;
}

struct EnergyDelta {
  double delta_in = 0.0;
  double delta_out = 0.0;
  double total = 0.0;
};

/// Energy cost of moving site (i, n) from state a to state b with every other
/// site as in `config`, split into the change of influence received by the
/// site (IN) and exerted by it (OUT).
inline EnergyDelta energy_deltas(const SpinConfiguration& config, int i, int n, int a, int b) {
  const LoopSpec& spec = config.spec();
  require_k3(spec, "energy_deltas");
  if ((a != 1 && a != -1) || (b != 1 && b != -1)) throw ParameterError("spins must be +1 or -1");
  double in = 0.0;
  double out = 0.0;
  for (int j = 0; j < spec.k; ++j) {
    for (int l = 0; l < spec.N; ++l) {
      const int s = (j == i && l == n) ? a : config.at(j, l);
      in += alpha(spec, j, s, i, a) - alpha(spec, j, s, i, b);
      out += alpha(spec, i, a, j, s) - alpha(spec, i, b, j, s);
    }
  }
  in /= spec.N;
  out /= spec.N;
  return {in, out, in + out};
}

namespace detail {

inline void require_enumerable(const LoopSpec& spec, const char* what) {
  spec.validate();
  if (spec.k * spec.N > kMaxEnumeratedSites) {
    throw ParameterError(std::string(what) + ": k*N = " + std::to_string(spec.k * spec.N) +
                         " exceeds the enumeration limit of " + std::to_string(kMaxEnumeratedSites));
  }
}

inline std::vector<int> counts_of_bits(const LoopSpec& spec, std::uint64_t bits) {
  std::vector<int> c(static_cast<std::size_t>(spec.k), 0);
  for (int i = 0; i < spec.k; ++i) {
    for (int n = 0; n < spec.N; ++n) c[static_cast<std::size_t>(i)] += (bits >> (i * spec.N + n)) & 1U;
  }
  return c;
}

// Rate of flipping a site of type i currently in state `spin`.
inline double site_rate(const LoopSpec& spec, const std::vector<int>& counts, int i, int spin) {
  const double e = tdsim::detail::checked_exponent(
      spec, i, double(counts[static_cast<std::size_t>(spec.anticlockwise(i))]) / spec.N,
      double(counts[static_cast<std::size_t>(spec.clockwise(i))]) / spec.N);
  return spin == 1 ? std::exp(-e) : std::exp(e);
}

}  // namespace detail

/// Gibbs weights e^{-H}/Z indexed by SpinConfiguration::bits().
inline std::vector<double> gibbs_measure(const LoopSpec& spec) {
  detail::require_enumerable(spec, "gibbs_measure");
  require_k3(spec, "gibbs_measure");
  const std::size_t count = std::size_t{1} << (spec.k * spec.N);
  std::vector<double> energy(count);
  double min_energy = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < count; ++s) {
    energy[s] = hamiltonian(SpinConfiguration::from_bits(spec, s));
    min_energy = std::min(min_energy, energy[s]);
  }
  std::vector<double> mu(count);
  double z = 0.0;
  for (std::size_t s = 0; s < count; ++s) {
    mu[s] = std::exp(-(energy[s] - min_energy));
    z += mu[s];
  }
  for (double& m : mu) m /= z;
  return mu;
}

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Generator of the spin-flip process over all 2^(kN) configurations.
inline SparseMatrix generator_matrix(const LoopSpec& spec) {
  detail::require_enumerable(spec, "generator_matrix");
  const int sites = spec.k * spec.N;
  const std::size_t count = std::size_t{1} << sites;
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(count * static_cast<std::size_t>(sites + 1));
  for (std::size_t s = 0; s < count; ++s) {
    const std::vector<int> c = detail::counts_of_bits(spec, s);
    long double out = 0.0L;
    for (int site = 0; site < sites; ++site) {
      const int spin = ((s >> site) & 1U) ? 1 : -1;
      const double r = detail::site_rate(spec, c, site / spec.N, spin);
      entries.emplace_back(static_cast<int>(s), static_cast<int>(s ^ (std::size_t{1} << site)), r);
      out += r;
    }
    entries.emplace_back(static_cast<int>(s), static_cast<int>(s), -static_cast<double>(out));
  }
  SparseMatrix q(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(count));
  q.setFromTriplets(entries.begin(), entries.end());
  return q;
}

struct LumpedGenerator {
  Matrix q;                           // over the count grid, jump::grid_index order
  double lumpability_residual = 0.0;  // max spread of lumped rows within a class
};

/// Projects the spin generator onto per-type counts: q(c, c') is the total
/// rate from a configuration with counts c into the class c'.
inline LumpedGenerator lumped_generator(const LoopSpec& spec) {
  const SparseMatrix q = generator_matrix(spec);
  std::size_t classes = 1;
  for (int i = 0; i < spec.k; ++i) classes *= static_cast<std::size_t>(spec.N + 1);
  const auto n_classes = static_cast<Eigen::Index>(classes);

  std::vector<std::size_t> class_of(static_cast<std::size_t>(q.rows()));
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    class_of[static_cast<std::size_t>(s)] =
        jump::grid_index(detail::counts_of_bits(spec, static_cast<std::uint64_t>(s)), spec.N);
  }

  LumpedGenerator out;
  out.q = Matrix::Zero(n_classes, n_classes);
  std::vector<bool> seen(classes, false);
  // Class sums are accumulated in extended precision and rounded once.
  std::vector<long double> acc(classes);
  Vector row(n_classes);
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    std::fill(acc.begin(), acc.end(), 0.0L);
    for (SparseMatrix::InnerIterator it(q, s); it; ++it) {
      acc[class_of[static_cast<std::size_t>(it.col())]] += it.value();
    }
    for (std::size_t j = 0; j < classes; ++j) row[static_cast<Eigen::Index>(j)] = static_cast<double>(acc[j]);
    const std::size_t c = class_of[static_cast<std::size_t>(s)];
    if (!seen[c]) {
      out.q.row(static_cast<Eigen::Index>(c)) = row.transpose();
      seen[c] = true;
    } else {
      out.lumpability_residual = std::max(
          out.lumpability_residual,
          (out.q.row(static_cast<Eigen::Index>(c)) - row.transpose()).lpNorm<Eigen::Infinity>());
    }
  }
  return out;
}

/// max over configuration pairs of |mu(s) q(s,s') - mu(s') q(s',s)|; zero iff
/// the dynamics is reversible with respect to the Gibbs measure.
inline double reversibility_residual(const LoopSpec& spec) {
  const std::vector<double> mu = gibbs_measure(spec);
  const int sites = spec.k * spec.N;
  double worst = 0.0;
  for (std::size_t s = 0; s < mu.size(); ++s) {
    const std::vector<int> c = detail::counts_of_bits(spec, s);
    for (int site = 0; site < sites; ++site) {
      const std::size_t t = s ^ (std::size_t{1} << site);
      if (t < s) continue;
      const int spin = ((s >> site) & 1U) ? 1 : -1;
      const double forward = detail::site_rate(spec, c, site / spec.N, spin);
      const double backward = detail::site_rate(spec, detail::counts_of_bits(spec, t), site / spec.N, -spin);
      worst = std::max(worst, std::abs(mu[s] * forward - mu[t] * backward));
    }
  }
  return worst;
}

/// Per-site flip rates in site order i*N + n.
inline std::vector<double> site_rates(const SpinConfiguration& config) {
  const LoopSpec& spec = config.spec();
  const std::vector<int> c = config.counts();
  std::vector<double> r(static_cast<std::size_t>(spec.k * spec.N));
  for (int i = 0; i < spec.k; ++i) {
    for (int n = 0; n < spec.N; ++n) {
      r[static_cast<std::size_t>(i * spec.N + n)] = detail::site_rate(spec, c, i, config.at(i, n));
    }
  }
  return r;
}

/// Called before every event with the current configuration and its site rates.
using EventObserver = std::function<void(const SpinConfiguration&, std::span<const double>)>;

/// Event-driven simulation of the spin-flip process, recorded through its
/// density projection. Every event is recorded; a terminal entry at t_end
/// closes the path.
inline Trajectory micro_simulate(const LoopSpec& spec, SpinConfiguration config, double t_end,
                                 std::uint64_t seed, const EventObserver& observer = {}) {
  spec.validate();
  if (!(config.spec() == spec)) throw ParameterError("configuration belongs to a different spec");
  if (!std::isfinite(t_end) || t_end < 0.0) throw ParameterError("t_end must be finite and >= 0");

  Trajectory path;
  path.kind = TrajectoryKind::stochastic;
  path.meta.spec = spec;
  path.meta.seed = seed;
  path.push(0.0, config.projection().x);
  if (t_end == 0.0) return path;

  rng::Engine gen = rng::make_stream(seed, 0);
  double t = 0.0;
  for (;;) {
    const std::vector<double> rates = site_rates(config);
    if (observer) observer(config, rates);
    double total = 0.0;
    for (double r : rates) total += r;
    t += rng::exponential(gen, total);
    if (t >= t_end) break;
    double target = rng::uniform01(gen) * total;
    std::size_t site = 0;
    for (; site + 1 < rates.size(); ++site) {
      if (target < rates[site]) break;
      target -= rates[site];
    }
    config.flip(static_cast<int>(site) / spec.N, static_cast<int>(site) % spec.N);
    path.push(t, config.projection().x);
  }
  path.push(t_end, config.projection().x);
  return path;
}

}  // namespace tdsim::micro
