#include <gtest/gtest.h>

#include "fedwad/error.hpp"
#include "fedwad/geodesics.hpp"
#include "fedwad/ot.hpp"
#include "test_util.hpp"

using namespace fedwad;
using fixtures::random_measure;
using fixtures::same_atoms;

namespace {

GaussianMeasure gauss(double x, double y, const Matrix& cov = Matrix::Identity(2, 2)) {
  Vector m(2);
  m << x, y;
  return GaussianMeasure(m, cov);
}

}  // namespace

TEST(InterpExact, EndpointReproducesMu) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto mu = random_measure(1 + static_cast<Index>(rng.below(10)), 2, rng, false);
    const auto nu = random_measure(1 + static_cast<Index>(rng.below(10)), 2, rng, false, 2.0);
    const auto at0 = interp_exact(mu, nu, 0.0);
    EXPECT_TRUE(same_atoms(at0, merge_atoms(mu.points(), mu.weights()), 1e-9));
  }
}

TEST(InterpExact, MidpointOfTwoAtoms) {
  Matrix x(1, 1), y(1, 1);
  x << 0.0;
  y << 1.0;
  const auto mid = interp_exact(new_discrete(x), new_discrete(y), 0.5);
  ASSERT_EQ(mid.size(), 1);
  EXPECT_DOUBLE_EQ(mid.point(0)(0), 0.5);
  EXPECT_DOUBLE_EQ(mid.weight(0), 1.0);
}

TEST(InterpExact, RejectsTOutsideUnitInterval) {
  Rng rng(2);
  const auto m = random_measure(3, 2, rng);
  for (double t : {-0.1, 1.5, std::nan("")}) {
    try {
      interp_exact(m, m, t);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidT);
    }
  }
  EXPECT_THROW(interp_approx(m, m, 2.0), Error);
}

TEST(InterpExact, GeodesicIdentityAndConstantSpeed) {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const Index d = 1 + static_cast<Index>(rng.below(4));
    const auto mu = random_measure(2 + static_cast<Index>(rng.below(12)), d, rng, rng.uniform() < 0.5);
    const auto nu = random_measure(2 + static_cast<Index>(rng.below(12)), d, rng, rng.uniform() < 0.5, 1.5);
    const double w = wasserstein(mu, nu, 2);
    for (int k = 0; k < 10; ++k) {
      const double t = rng.uniform();
      const auto mt = interp_exact(mu, nu, t);
      const double left = wasserstein(mu, mt, 2);
      EXPECT_NEAR(left + wasserstein(mt, nu, 2), w, 1e-7);
      EXPECT_NEAR(left, t * w, 1e-7);
      EXPECT_LE(mt.size(), mu.size() + nu.size() - 1);
    }
  }
}

TEST(InterpExact, CoincidentAtomsAreMerged) {
  Matrix x(2, 1), y(2, 1);
  x << 0.0, 2.0;
  y << 2.0, 0.0;
  // Both atoms meet at 1.0 halfway only if they swap; the optimal plan keeps
  // them in place, so the interpolant is the common support itself.
  const auto m = interp_exact(new_discrete(x), new_discrete(y), 0.5);
  EXPECT_EQ(m.size(), 2);
  const auto merged = merge_atoms((Matrix(3, 1) << 1.0, 1.0 + 1e-13, 3.0).finished(),
                                  (Vector(3) << 0.25, 0.25, 0.5).finished());
  ASSERT_EQ(merged.size(), 2);
  EXPECT_DOUBLE_EQ(merged.weight(0), 0.5);
  EXPECT_DOUBLE_EQ(merged.point(0)(0), 1.0);
}

TEST(MergeAtoms, DropsZeroWeights) {
  const auto m = merge_atoms((Matrix(3, 1) << 0.0, 1.0, 2.0).finished(), (Vector(3) << 0.5, 0.0, 0.5).finished());
  EXPECT_EQ(m.size(), 2);
}

TEST(InterpApprox, EqualsExactForEqualUniformMeasures) {
  Rng rng(4);
  int failures = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.below(19));
    const Index d = 1 + static_cast<Index>(rng.below(4));
    const auto mu = random_measure(n, d, rng);
    const auto nu = random_measure(n, d, rng, true, 1.0);
    const double t = 0.1 * static_cast<double>(1 + trial % 9);
    const auto plan = optimal_plan(mu, nu, 2);
    if (!same_atoms(interp_approx(mu, nu, t, plan), interp_exact(mu, nu, t, plan), 1e-9)) ++failures;
  }
  EXPECT_EQ(failures, 0);
}

TEST(InterpApprox, SupportIsSmallerSide) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 1 + static_cast<Index>(rng.below(15));
    const Index m = 1 + static_cast<Index>(rng.below(15));
    const auto mu = random_measure(n, 2, rng, false);
    const auto nu = random_measure(m, 2, rng, false);
    EXPECT_EQ(interp_approx(mu, nu, rng.uniform(), optimal_plan(mu, nu, 2)).size(), std::min(n, m));
  }
  const auto a = random_measure(3, 2, rng);
  const auto b = random_measure(10, 2, rng);
  EXPECT_EQ(interp_approx(a, b, 0.3).size(), 3);
  EXPECT_EQ(interp_approx(b, a, 0.3).size(), 3);
}

TEST(InterpApprox, AtZeroAnchorIsUnchanged) {
  Rng rng(6);
  const auto mu = random_measure(4, 3, rng, false);
  const auto nu = random_measure(9, 3, rng, false);
  EXPECT_TRUE(interp_approx(mu, nu, 0.0) == mu);
}

TEST(InterpApprox, BarycentricMapForWeightedAnchor) {
  // Anchor atom at 0 with mass 0.5 sends 0.25 to 2 and 0.25 to 4: image 3.
  Matrix x(2, 1), y(3, 1);
  x << 0.0, 10.0;
  y << 2.0, 4.0, 10.0;
  const auto mu = new_discrete(x);
  const auto nu = new_discrete(y, (Vector(3) << 0.25, 0.25, 0.5).finished());
  const auto out = interp_approx(mu, nu, 0.5);
  ASSERT_EQ(out.size(), 2);
  EXPECT_NEAR(out.point(0)(0), 1.5, 1e-12);
  EXPECT_NEAR(out.point(1)(0), 10.0, 1e-12);
  EXPECT_DOUBLE_EQ(out.weight(0), 0.5);
}

TEST(Gaussian, InterpolationMovesTheMeanOnly) {
  Matrix cov(2, 2);
  cov << 2.0, 0.3, 0.3, 1.0;
  const auto mid = gaussian_interp(gauss(0, 0, cov), gauss(2, 0, cov), 0.5);
  EXPECT_DOUBLE_EQ(mid.mean(0), 1.0);
  EXPECT_DOUBLE_EQ(mid.mean(1), 0.0);
  EXPECT_EQ(mid.covariance, cov);
  const auto start = gaussian_interp(gauss(0, 0, cov), gauss(2, 0, cov), 0.0);
  EXPECT_EQ(start.mean, gauss(0, 0).mean);
}

TEST(Gaussian, RepeatedMidpointsHalveTheGap) {
  const auto target = gauss(8, -4);
  auto g = gauss(0, 0);
  double gap = gaussian_w2(g, target);
  for (int k = 0; k < 10; ++k) {
    g = gaussian_interp(g, target, 0.5);
    const double next = gaussian_w2(g, target);
    EXPECT_NEAR(next, 0.5 * gap, 1e-12);
    gap = next;
  }
}

TEST(Gaussian, DistanceOfMeansAndMismatch) {
  EXPECT_DOUBLE_EQ(gaussian_w2(gauss(0, 0), gauss(3, 4)), 5.0);
  EXPECT_DOUBLE_EQ(gaussian_w2(gauss(1, 1), gauss(1, 1)), 0.0);
  try {
    gaussian_w2(gauss(0, 0), gauss(1, 1, 2.0 * Matrix::Identity(2, 2)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CovarianceMismatch);
  }
}

TEST(Gaussian, EmpiricalDistanceApproachesClosedForm) {
  for (std::uint64_t seed : {0u, 1u}) {
    const auto a = sample_gaussian(gauss(0, 0), 5000, 2 * seed);
    const auto b = sample_gaussian(gauss(4, 0), 5000, 2 * seed + 1);
    EXPECT_NEAR(wasserstein(a, b, 2), 4.0, 0.15);
  }
}
