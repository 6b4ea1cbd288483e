#include "oracles.hpp"

#include "tdsim/jump.hpp"
#include "tdsim/ode.hpp"
#include "tdsim/parallel.hpp"
#include "tdsim/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace tdsim;

namespace {

LoopSpec spec_with(double J, double delta, double kappa, int N) {
  LoopSpec s;
  s.J = J;
  s.delta = delta;
  s.kappa.assign(3, kappa);
  s.N = N;
  return s;
}

// Time average of coordinate i of a right-continuous path over [from, to].
double time_average(const Trajectory& p, Eigen::Index i, double from, double to) {
  double acc = 0.0;
  for (std::size_t j = 0; j + 1 < p.size(); ++j) {
    const double a = std::max(p.times[j], from), b = std::min(p.times[j + 1], to);
    if (b > a) acc += (b - a) * p.states[j][i];
  }
  return acc / (to - from);
}

Trajectory constant_path(TrajectoryKind kind, const Vector& x, double t_end) {
  Trajectory p;
  p.kind = kind;
  p.push(0.0, x);
  p.push(t_end, x);
  return p;
}

}  // namespace

TEST(Ssa, EmptyHorizon) {
  const LoopSpec s = LoopSpec::half_J(1, 0.2, 10);
  const DensityState x0 = DensityState::from_counts({3, 4, 5}, 10);
  const Trajectory p = jump::ssa_simulate(s, x0, 0.0, 42);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p.times[0], 0.0);
  EXPECT_EQ(p.states[0], x0.x);
}

TEST(Ssa, InitialTotalRate) {
  const LoopSpec s = spec_with(2, 1, 1, 100);
  EXPECT_NEAR(jump::total_rate(s, DensityState::from_counts({50, 50, 50}, 100)), 300.0, 1e-10);
}

TEST(Ssa, RejectsBadInput) {
  const LoopSpec s = LoopSpec::half_J(1, 0.2, 10);
  const DensityState x0 = DensityState::from_counts({3, 4, 5}, 10);
  EXPECT_THROW(jump::ssa_simulate(s, x0, -1.0, 1), ParameterError);
  EXPECT_THROW(jump::ssa_simulate(s, x0, INFINITY, 1), ParameterError);
  EXPECT_THROW(jump::ssa_simulate(s, DensityState::from_counts({1, 1, 1}, 5), 1.0, 1), ParameterError);
  EXPECT_THROW(jump::ssa_simulate(s, x0, 1.0, 1, -2), ParameterError);
}

TEST(Ssa, StaysOnGridAndMovesOneCoordinate) {
  const LoopSpec s = spec_with(1.7, 0.3, 0.2, 25);
  const Trajectory p = jump::ssa_simulate(s, DensityState::from_counts({0, 25, 10}, 25), 5.0, 3, 1);
  ASSERT_GT(p.size(), 100u);
  EXPECT_EQ(p.times.back(), 5.0);
  for (std::size_t j = 0; j < p.size(); ++j) {
    for (Eigen::Index i = 0; i < 3; ++i) {
      const double c = p.states[j][i] * 25;
      EXPECT_NEAR(c, std::round(c), 1e-9);
      EXPECT_GE(p.states[j][i], 0.0);
      EXPECT_LE(p.states[j][i], 1.0);
    }
    if (j > 0 && j + 1 < p.size()) {
      EXPECT_GT(p.times[j], p.times[j - 1]);
      EXPECT_NEAR((p.states[j] - p.states[j - 1]).cwiseAbs().sum(), 1.0 / 25, 1e-12);
    }
  }
}

TEST(Ssa, SeedDeterminismAndStreams) {
  const LoopSpec s = LoopSpec::half_J(1, 0.3, 200);
  const DensityState x0 = DensityState::nearest(Vector::Constant(3, 0.4), 200);
  const Trajectory a = jump::ssa_simulate(s, x0, 2.0, 17);
  const Trajectory b = jump::ssa_simulate(s, x0, 2.0, 17);
  EXPECT_EQ(a.times, b.times);
  EXPECT_EQ(a.states, b.states);
  EXPECT_NE(a.times, jump::ssa_simulate(s, x0, 2.0, 18).times);
  EXPECT_NE(a.times, jump::ssa_simulate(s, x0, 2.0, 17, 0, 1).times);
}

TEST(Ssa, ThinningKeepsEveryKthEvent) {
  const LoopSpec s = LoopSpec::half_J(0.5, 0.3, 50);
  const DensityState x0 = DensityState::nearest(Vector::Constant(3, 0.5), 50);
  const Trajectory full = jump::ssa_simulate(s, x0, 3.0, 5, 1);
  const Trajectory thin = jump::ssa_simulate(s, x0, 3.0, 5, 4);
  const std::size_t events = full.size() - 2;
  ASSERT_EQ(thin.size(), events / 4 + 2);
  for (std::size_t j = 1; j + 1 < thin.size(); ++j) {
    EXPECT_EQ(thin.times[j], full.times[4 * j]);
    EXPECT_EQ(thin.states[j], full.states[4 * j]);
  }
  EXPECT_EQ(thin.states.back(), full.states.back());
  EXPECT_EQ(jump::default_thinning(1000), 1);
  EXPECT_EQ(jump::default_thinning(10000), 100);
}

TEST(Ssa, DecoupledStationaryMean) {
  const int N = 1000;
  EXPECT_NEAR(oracle::birth_death_stationary_mean(N), 0.5, 1e-12);
  const LoopSpec s = spec_with(0, 0.5, 0, N);
  const Trajectory p = jump::ssa_simulate(s, DensityState::from_counts({100, 500, 900}, N), 100.0, 8, 1);
  for (Eigen::Index i = 0; i < 3; ++i) {
    const double m = time_average(p, i, 10.0, 100.0);
    EXPECT_GE(m, 0.48);
    EXPECT_LE(m, 0.52);
  }
}

TEST(Ssa, MeanIncrementMatchesDrift) {
  // E[X(h)] = x + h F + h^2/2 DF F + O(h^3); compare against that within 3 standard errors.
  const int N = 10000, replicas = 40000;
  const double h = 1e-3;
  const LoopSpec s = spec_with(1.2, 0.3, 0.4, N);
  const DensityState x0 = DensityState::from_counts({3000, 6000, 5000}, N);
  std::vector<Vector> ends(static_cast<std::size_t>(replicas));
  parallel_for(ends.size(), [&](std::size_t r) {
    ends[r] = jump::ssa_simulate(s, x0, h, 2024, 0, r).states.back();
  });
  Vector mean = Vector::Zero(3), sq = Vector::Zero(3);
  for (const Vector& e : ends) {
    const Vector d = (e - x0.x) / h;
    mean += d;
    sq += d.cwiseProduct(d);
  }
  mean /= replicas;
  const Vector var = sq / replicas - mean.cwiseProduct(mean);
  const Vector f = vector_field(s, x0.x);
  const Vector expected = f + 0.5 * h * jacobian(s, x0.x) * f;
  for (Eigen::Index i = 0; i < 3; ++i) {
    const double se = std::sqrt(var[i] / replicas);
    EXPECT_LT(std::abs(mean[i] - expected[i]), 3 * se) << "coordinate " << i;
  }
}

TEST(DensityGenerator, RowsSumToZero) {
  const LoopSpec s = LoopSpec::half_J(1.4, 0.2, 3);
  const Matrix q = jump::density_generator(s);
  EXPECT_EQ(q.rows(), 64);
  EXPECT_LT(q.rowwise().sum().lpNorm<Eigen::Infinity>(), 1e-12);
  for (std::size_t idx = 0; idx < 64; ++idx) {
    EXPECT_EQ(jump::grid_index(jump::grid_counts(idx, 3, 3), 3), idx);
  }
}

TEST(SupDistance, IdenticalAndShifted) {
  const LoopSpec s = LoopSpec::half_J(1, 0.3, 100);
  const Trajectory a = jump::ssa_simulate(s, DensityState::nearest(Vector::Constant(3, 0.3), 100), 2.0, 1, 1);
  EXPECT_EQ(sup_distance(a, a, 2.0), 0.0);
  Trajectory b = a;
  const Vector c = Vector::Constant(3, 0.125);
  for (Vector& x : b.states) x += c;
  EXPECT_NEAR(sup_distance(a, b, 2.0), 0.125, 1e-15);
  EXPECT_NEAR(sup_distance(a, b, 0.0), 0.125, 1e-15);
}

TEST(SupDistance, JumpAgainstLine) {
  // step from 0 to 1 at t = 1 vs. the line x = t/2: gap peaks at the jump.
  Trajectory step;
  step.kind = TrajectoryKind::stochastic;
  step.push(0.0, Vector::Constant(1, 0.0));
  step.push(1.0, Vector::Constant(1, 1.0));
  step.push(2.0, Vector::Constant(1, 1.0));
  Trajectory line;
  line.push(0.0, Vector::Constant(1, 0.0));
  line.push(2.0, Vector::Constant(1, 1.0));
  EXPECT_NEAR(sup_distance(step, line, 2.0), 0.5, 1e-15);
  EXPECT_NEAR(sup_distance(step, line, 0.9), 0.45, 1e-15);
  EXPECT_NEAR(sup_distance(line, step, 2.0), 0.5, 1e-15);
}

TEST(SupDistance, Errors) {
  const Trajectory a = constant_path(TrajectoryKind::deterministic, Vector::Zero(3), 1.0);
  const Trajectory b = constant_path(TrajectoryKind::deterministic, Vector::Zero(2), 1.0);
  EXPECT_THROW(sup_distance(a, a, 2.0), ParameterError);
  EXPECT_THROW(sup_distance(a, a, -1.0), ParameterError);
  EXPECT_THROW(sup_distance(a, b, 1.0), ParameterError);
  EXPECT_THROW(sup_distance(a, Trajectory{}, 1.0), ParameterError);
}

TEST(SupDistance, LargeSystemStaysClose) {
  // calibrated regression: at N = 1e4 at least 95 of 100 seeds are within 0.05
  const LoopSpec base = spec_with(1, 0.3, 0.5, 10000);
  const Vector x0 = (Vector(3) << 0.7, 0.2, 0.5).finished();
  const Trajectory ref = ode::integrate(base, x0, 5.0, ode::Settings::rk45()).resample(1e-3);
  std::vector<double> d(100);
  parallel_for(d.size(), [&](std::size_t r) {
    d[r] = sup_distance(jump::ssa_simulate(base, DensityState::nearest(x0, 10000), 5.0, 99, 1, r), ref, 5.0);
  });
  EXPECT_GE(std::count_if(d.begin(), d.end(), [](double v) { return v < 0.05; }), 95);
}
