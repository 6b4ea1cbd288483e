#include "tdsim/analysis.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace tdsim;
using analysis::Classification;
using analysis::Complex;

namespace {

bool near(Complex a, Complex b, double tol) { return std::abs(a - b) <= tol; }

}  // namespace

TEST(Spectrum, Examples) {
  const double s3 = std::numbers::sqrt3;
  auto ev = analysis::symmetric_spectrum(2, 0).eigenvalues;
  EXPECT_TRUE(near(ev[0], {0, 2 * s3}, 1e-12));
  EXPECT_TRUE(near(ev[1], {0, -2 * s3}, 1e-12));
  EXPECT_TRUE(near(ev[2], {-6, 0}, 1e-12));

  ev = analysis::symmetric_spectrum(3, 0.5).eigenvalues;
  EXPECT_TRUE(near(ev[0], {1, 0}, 1e-12));
  EXPECT_TRUE(near(ev[1], {1, 0}, 1e-12));
  EXPECT_TRUE(near(ev[2], {-8, 0}, 1e-12));

  for (double d : {0.0, 0.4, 1.0}) {
    double smallest = INFINITY;
    for (const Complex& z : analysis::symmetric_spectrum(-1, d).eigenvalues) smallest = std::min(smallest, std::abs(z));
    EXPECT_LT(smallest, 1e-12) << d;
  }
}

TEST(Spectrum, ClosedFormMatchesNumericOnGrid) {
  for (int a = 0; a <= 20; ++a) {
    for (int b = 0; b <= 10; ++b) {
      const double J = -3 + 0.3 * a, d = 0.1 * b;
      const auto closed = analysis::closed_form_spectrum(J, d);
      const auto numeric = analysis::numerical_spectrum(analysis::symmetric_jacobian(J, d));
      EXPECT_LE(analysis::spectrum_distance(closed, numeric), 1e-8) << J << " " << d;
    }
  }
}

TEST(Spectrum, MirrorConjugates) {
  for (double J : {-2.5, 0.5, 2.0, 3.0}) {
    for (double d : {0.0, 0.15, 0.5, 0.7}) {
      const auto a = analysis::symmetric_spectrum(J, d);
      auto b = analysis::symmetric_spectrum(J, 1 - d);
      for (auto& z : b.eigenvalues) z = std::conj(z);
      EXPECT_LE(analysis::spectrum_distance(a, b), 1e-12);
    }
  }
}

TEST(Spectrum, ClosedUnderConjugation) {
  const auto s = analysis::numerical_spectrum(analysis::symmetric_jacobian(2.7, 0.1));
  for (const Complex& z : s.eigenvalues) {
    double best = INFINITY;
    for (const Complex& w : s.eigenvalues) best = std::min(best, std::abs(std::conj(z) - w));
    EXPECT_LE(best, 1e-10);
  }
}

TEST(FixedPointBranch, Examples) {
  EXPECT_EQ(analysis::fixed_point_branch(-0.5), std::vector<double>{0.0});
  EXPECT_EQ(analysis::fixed_point_branch(-1.0), std::vector<double>{0.0});

  const auto b = analysis::fixed_point_branch(-std::log(3.0));
  ASSERT_EQ(b.size(), 3u);
  EXPECT_NEAR(b[2], 0.25, 1e-9);
  EXPECT_EQ(b[0], -b[2]);
  EXPECT_EQ(b[1], 0.0);

  // 40-digit root of sinh(2Jy) + 2y cosh(2Jy) at J = -1.12; the leading-order
  // estimate y^2 = 3(-1-J)/4 gives 0.300 but the quartic term pulls it in.
  EXPECT_NEAR(analysis::fixed_point_branch(-1.12).back(), 0.2710959175493269, 1e-12);
}

TEST(FixedPointBranch, ResidualsAndInverseRelation) {
  for (double J = -3.0; J < -1.0; J += 0.07) {
    const auto b = analysis::fixed_point_branch(J);
    ASSERT_EQ(b.size(), 3u);
    for (double y : b) EXPECT_LT(analysis::branch_residual(J, y), 1e-9);
    const double y = b.back();
    EXPECT_NEAR(std::log((1 - 2 * y) / (1 + 2 * y)) / (4 * y), J, 1e-9);
    const Vector x = Vector::Constant(3, 0.5 + y);
    EXPECT_LT(vector_field(LoopSpec::half_J(J, 0.3), x).lpNorm<Eigen::Infinity>(), 1e-9);
  }
}

TEST(Classify, Examples) {
  auto r = analysis::classify(1, 0);
  EXPECT_EQ(r.classification, Classification::stable_point);
  ASSERT_EQ(r.fixed_points.size(), 1u);
  EXPECT_EQ(r.fixed_points[0], symmetric_point());

  r = analysis::classify(-1.5, 0.2);
  EXPECT_EQ(r.classification, Classification::bistable);
  ASSERT_EQ(r.fixed_points.size(), 2u);
  EXPECT_NEAR(r.fixed_points[0][0] + r.fixed_points[1][0], 1.0, 1e-15);
  for (const Vector& x : r.fixed_points) {
    EXPECT_LT(analysis::branch_residual(-1.5, x[0] - 0.5), 1e-9);
    EXPECT_LT(vector_field(LoopSpec::half_J(-1.5, 0.2), x).lpNorm<Eigen::Infinity>(), 1e-9);
  }

  r = analysis::classify(2.5, 0);
  EXPECT_EQ(r.classification, Classification::oscillatory);
  EXPECT_GT(r.amplitude(0), 0.1);
  EXPECT_TRUE(r.amplitude_confirmed);
}

TEST(Classify, DegenerateCases) {
  EXPECT_EQ(analysis::classify(-1, 0.3).classification, Classification::degenerate);
  EXPECT_EQ(analysis::classify(2, 0.3).classification, Classification::degenerate);
  EXPECT_EQ(analysis::classify(2.5, 0.5).classification, Classification::degenerate);
  EXPECT_THROW(analysis::classify(1, 1.5), ParameterError);
}

TEST(Classify, TagsAreMirrorSymmetric) {
  for (double J : {-2.0, -0.5, 1.0, 1.9, 2.2}) {
    for (double d : {0.0, 0.2, 0.4}) {
      EXPECT_EQ(analysis::classify(J, d).classification, analysis::classify(J, 1 - d).classification) << J << " " << d;
    }
  }
}

TEST(Classify, StringTags) {
  for (auto c : {Classification::stable_point, Classification::bistable, Classification::oscillatory,
                 Classification::degenerate}) {
    EXPECT_EQ(analysis::classification_from_string(analysis::to_string(c)), c);
  }
  EXPECT_EQ(analysis::to_string(Classification::stable_point), "stable-point");
  EXPECT_FALSE(analysis::classification_from_string("limit-cycle").has_value());
}

TEST(Scan, StableRegion) {
  for (const auto& r : analysis::scan({-0.5, 0.0, 1.0}, 0.0)) {
    EXPECT_EQ(r.classification, Classification::stable_point);
  }
}

TEST(Scan, PitchforkOnset) {
  const auto grid = analysis::make_grid(-1.2, -0.8, 0.01);
  const auto recs = analysis::scan(grid, 0.3);
  double last_bistable = NAN;
  for (const auto& r : recs) {
    if (r.classification == Classification::bistable) last_bistable = r.J;
  }
  EXPECT_GE(last_bistable, -1.01 - 1e-9);
  EXPECT_LE(last_bistable, -1.0);
}

TEST(Scan, HopfOnset) {
  const auto grid = analysis::make_grid(1.9, 2.1, 0.01);
  const auto recs = analysis::scan(grid, 0.0);
  double first = NAN;
  for (const auto& r : recs) {
    if (r.classification == Classification::oscillatory) {
      first = r.J;
      break;
    }
  }
  EXPECT_GE(first, 2.0);
  EXPECT_LE(first, 2.01 + 1e-9);
}

TEST(Scan, MakeGrid) {
  const auto g = analysis::make_grid(-2, 3, 0.05);
  ASSERT_EQ(g.size(), 101u);
  EXPECT_EQ(g.front(), -2.0);
  EXPECT_NEAR(g.back(), 3.0, 1e-12);
  EXPECT_EQ(analysis::make_grid(1, 1, 0.1), std::vector<double>{1.0});
  EXPECT_THROW(analysis::make_grid(1, 0, 0.1), ParameterError);
}

TEST(Rotation, Orthonormal) {
  const Matrix r = analysis::rotation_matrix();
  EXPECT_LT((r.transpose() * r - Matrix::Identity(3, 3)).lpNorm<Eigen::Infinity>(), 1e-14);
  EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
  const Vector d = Vector::Constant(3, 1 / std::sqrt(3.0));
  const Vector z = r.transpose() * d;
  EXPECT_LT((z - Vector::Unit(3, 2)).lpNorm<Eigen::Infinity>(), 1e-15);
}

TEST(ZSystem, Examples) {
  Matrix a = analysis::z_system(2, 0.5);
  EXPECT_LT(a.topLeftCorner(2, 2).lpNorm<Eigen::Infinity>(), 1e-12);
  EXPECT_NEAR(a(2, 2), -6, 1e-12);

  a = analysis::z_system(0, 0.3);
  EXPECT_LT((a + 2 * Matrix::Identity(3, 3)).lpNorm<Eigen::Infinity>(), 1e-12);

  const double s3 = std::numbers::sqrt3;
  Matrix expected(3, 3);
  expected << 1, -3 * s3, 0, 3 * s3, 1, 0, 0, 0, -8;
  EXPECT_LT((analysis::z_system(3, 0) - expected).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(ZSystem, MatchesClosedFormOnGrid) {
  for (double J = -3; J <= 3; J += 0.5) {
    for (double d = 0; d <= 1.0001; d += 0.25) {
      const Matrix a = analysis::rotation_matrix().transpose() * analysis::symmetric_jacobian(J, d) *
                       analysis::rotation_matrix();
      EXPECT_LT((a - analysis::z_system_closed_form(J, d)).lpNorm<Eigen::Infinity>(), 1e-10);
    }
  }
}

TEST(PolarRates, Examples) {
  const double s3 = std::numbers::sqrt3;
  auto p = analysis::polar_rates(2, 0);
  EXPECT_EQ(p.radial, 0.0);
  EXPECT_NEAR(p.angular, 2 * s3, 1e-15);
  p = analysis::polar_rates(2, 1);
  EXPECT_NEAR(p.angular, -2 * s3, 1e-15);
  p = analysis::polar_rates(3, 0.5);
  EXPECT_EQ(p.radial, 1.0);
  EXPECT_EQ(p.angular, 0.0);
}

TEST(PolarRates, AgreeWithLinearFlow) {
  // theta' from z1 z2' - z2 z1' over r^2 for the rotated linear system.
  for (double d : {0.1, 0.9}) {
    const Matrix a = analysis::z_system_closed_form(2.4, d);
    const Vector z = (Vector(3) << 0.3, 0.4, 0).finished();
    const Vector dz = a * z;
    const double r2 = z.head(2).squaredNorm();
    EXPECT_NEAR((z[0] * dz[1] - z[1] * dz[0]) / r2, analysis::polar_rates(2.4, d).angular, 1e-12);
    EXPECT_NEAR((z[0] * dz[0] + z[1] * dz[1]) / r2, analysis::polar_rates(2.4, d).radial, 1e-12);
  }
}

TEST(Convergence, EmptyWhenNoReplicas) {
  const auto t = analysis::convergence_experiment(LoopSpec::half_J(1, 0.3), {100, 1000},
                                                  Vector::Constant(3, 0.4), 1.0, 0, 1);
  EXPECT_TRUE(t.rows.empty());
}

TEST(Convergence, SmallRunIsReproducible) {
  LoopSpec base;
  base.J = 1;
  base.delta = 0.3;
  base.kappa.assign(3, 0.5);
  const Vector x0 = (Vector(3) << 0.7, 0.2, 0.5).finished();
  const auto a = analysis::convergence_experiment(base, {50, 500}, x0, 1.0, 20, 3);
  const auto b = analysis::convergence_experiment(base, {50, 500}, x0, 1.0, 20, 3);
  ASSERT_EQ(a.rows.size(), 2u);
  EXPECT_EQ(a.rows[0].distances, b.rows[0].distances);
  EXPECT_EQ(a.rows[1].distances, b.rows[1].distances);
  EXPECT_LE(a.rows[0].q25, a.rows[0].median);
  EXPECT_LE(a.rows[0].median, a.rows[0].q75);
}

TEST(Convergence, QuantileAndSlope) {
  EXPECT_EQ(analysis::quantile({1, 2, 3, 4}, 0.5), 2.5);
  EXPECT_EQ(analysis::quantile({1, 2, 3, 4}, 0.25), 1.75);
  std::vector<analysis::ConvergenceRow> rows(3);
  for (int j = 0; j < 3; ++j) {
    rows[j].N = static_cast<int>(std::pow(10, j + 2));
    rows[j].median = 1 / std::sqrt(double(rows[j].N));
  }
  EXPECT_NEAR(analysis::log_log_slope(rows), -0.5, 1e-12);
}
