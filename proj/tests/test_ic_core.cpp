#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <vector>

#include "icn/errors.hpp"
#include "icn/ic_core.hpp"
#include "icn/rng.hpp"

using namespace icn;

TEST(CollisionUnit, WorkedExamples) {
  // w = 3: x > 0 takes the collision branch (slope 2w - 1), x < 0 does not.
  EXPECT_DOUBLE_EQ(collision_unit(2.0, 3.0), 10.0);
  EXPECT_DOUBLE_EQ(collision_unit(-2.0, 3.0), -6.0);
  // w = 0.5: the branch opens for negative x instead.
  EXPECT_DOUBLE_EQ(collision_unit(-2.0, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(collision_unit(2.0, 0.5), 1.0);
  // w = 1 is the plain identity.
  EXPECT_DOUBLE_EQ(collision_unit(-4.0, 1.0), -4.0);
}

TEST(ICUnit, PreactivationByHand) {
  const std::vector<double> x{1.0, 2.0};
  const ICParams p = ICParams::standard({0.5, 2.0}, 0.75, 0.1, -0.2);
  // w·x = 4.5, sum = 3, branch = relu(4.5 - 2.25 + 0.1) = 2.35
  EXPECT_NEAR(hyperplane_value(x, p), 2.35, 1e-15);
  EXPECT_NEAR(ic_preactivation(x, p), 4.5 + 2.35 - 0.2, 1e-15);

  const ICParams q = ICParams::standard({0.5, 2.0}, 3.0, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(ic_preactivation(x, q), 4.5);  // branch closed
}

TEST(ICUnit, BasicPinsAdjustWeight) {
  const ICParams p = ICParams::basic({1.0, 2.0});
  EXPECT_EQ(p.w_prime, 1.0);
  EXPECT_FALSE(p.w_prime_learnable);
  EXPECT_TRUE(ICParams::standard({1.0}, 1.0).w_prime_learnable);
}

TEST(ICUnit, RejectsMismatchedInputs) {
  const std::vector<double> x{1.0, 2.0, 3.0};
  EXPECT_THROW(ic_preactivation(x, ICParams::basic({1.0, 2.0})), DimensionError);
  EXPECT_THROW(ic_preactivation({}, ICParams::basic({})), DimensionError);
}

TEST(Piecewise, MatchesUnitOnRandomPoints) {
  for (std::size_t n : {2u, 5u, 17u}) {
    Rng rng(derive_seed(11, "piecewise", n));
    std::size_t upper = 0;
    for (int trial = 0; trial < 10000; ++trial) {
      std::vector<double> w(n), x(n);
      for (double& v : w) v = rng.uniform(-3.0, 3.0);
      for (double& v : x) v = rng.uniform(-5.0, 5.0);
      const ICParams p = ICParams::basic(w);
      const BranchValue b = piecewise_branches(x, p);
      EXPECT_NEAR(b.value, ic_preactivation(x, p), 1e-12);
      if (b.branch == Branch::upper) ++upper;
    }
    // Both regimes are exercised.
    EXPECT_GT(upper, 1000u);
    EXPECT_LT(upper, 9000u);
  }
}

TEST(Piecewise, BoundaryGoesToUpperBranch) {
  const std::vector<double> x{1.0, 1.0};
  const BranchValue b = piecewise_branches(x, ICParams::basic({1.5, 0.5}));
  EXPECT_EQ(b.branch, Branch::upper);
  EXPECT_DOUBLE_EQ(b.value, 2.0);  // both branches agree on H = 0
}

TEST(Piecewise, RejectsStandardOrBiasedParams) {
  const std::vector<double> x{1.0, 1.0};
  EXPECT_THROW(piecewise_branches(x, ICParams::standard({1.0, 2.0}, 0.5)), ContractError);
  EXPECT_THROW(piecewise_branches(x, ICParams::basic({1.0, 2.0}, 0.1)), ContractError);
}

TEST(Hyperplane, ByHand) {
  const std::vector<double> w{1.0, 3.0};
  // normal (1, 3) - w'; at w' = 0 the normal is (1, 3): cos = 4 / (sqrt2 sqrt10)
  const HyperplaneReport r = hyperplane_cos_angle(w, 0.0);
  EXPECT_NEAR(r.cos_theta, 4.0 / std::sqrt(20.0), 1e-15);
  EXPECT_EQ(r.normal, (std::vector<double>{1.0, 3.0}));
  EXPECT_FALSE(r.degenerate);
}

TEST(Hyperplane, StrictlyDecreasingInAdjustWeight) {
  Rng rng(21);
  for (std::size_t n : {2u, 3u, 8u}) {
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> w(n);
      for (double& v : w) v = rng.uniform(-2.0, 2.0);
      double prev = 2.0;
      std::vector<double> grid;
      for (double e = 6.0; e >= -3.0; e -= 0.25) grid.push_back(-std::pow(10.0, e));
      for (double e = -3.0; e <= 6.0; e += 0.25) grid.push_back(std::pow(10.0, e));
      for (double wp : grid) {
        const double c = hyperplane_cos_angle(w, wp).cos_theta;
        EXPECT_LT(c, prev) << "n=" << n << " w'=" << wp;
        prev = c;
      }
      EXPECT_NEAR(hyperplane_cos_angle(w, -1e6).cos_theta, 1.0, 1e-6);
      EXPECT_NEAR(hyperplane_cos_angle(w, 1e6).cos_theta, -1.0, 1e-6);
    }
  }
}

TEST(Hyperplane, ZeroExactlyAtMeanWeight) {
  Rng rng(4);
  for (std::size_t n : {2u, 3u, 8u}) {
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> w(n);
      double s = 0.0;
      for (double& v : w) {
        v = rng.uniform(-2.0, 2.0);
        s += v;
      }
      EXPECT_EQ(hyperplane_cos_angle(w, s / static_cast<double>(n)).cos_theta, 0.0);
    }
  }
}

TEST(Hyperplane, DegenerateWeights) {
  const std::vector<double> w{0.7, 0.7, 0.7};
  EXPECT_TRUE(hyperplane_cos_angle(w, 0.0).degenerate);
  EXPECT_EQ(hyperplane_cos_angle(w, 0.0).cos_theta, 1.0);
  EXPECT_EQ(hyperplane_cos_angle(w, 2.0).cos_theta, -1.0);
  EXPECT_EQ(hyperplane_cos_angle(w, (0.7 + 0.7 + 0.7) / 3.0).cos_theta, 0.0);
  EXPECT_THROW(hyperplane_cos_angle(std::vector<double>{1.0}, 0.0), DimensionError);
}

TEST(XorClosedForm, PublishedParametersSeparateXor) {
  const ICParams p = xor_closed_form();
  EXPECT_EQ(p.w, (std::vector<double>{0.2805, 0.2805}));
  EXPECT_EQ(p.b1, 0.6463);
  EXPECT_EQ(p.b2, -0.3506);
  const std::array<std::array<double, 2>, 4> pts{{{0, 0}, {0, 1}, {1, 0}, {1, 1}}};
  std::array<double, 4> y{};
  for (std::size_t i = 0; i < 4; ++i) y[i] = std::max(0.0, ic_preactivation(pts[i], p));
  EXPECT_NEAR(y[0], 0.2957, 1e-12);
  EXPECT_EQ(y[1], 0.0);
  EXPECT_EQ(y[2], 0.0);
  EXPECT_NEAR(y[3], 0.2104, 1e-12);
  EXPECT_GE(std::min(y[0], y[3]) - std::max(y[1], y[2]), 0.2);
}
