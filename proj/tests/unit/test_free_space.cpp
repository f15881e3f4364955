#include <cmath>

#include <gtest/gtest.h>

#include "uaplab/error.hpp"
#include "uaplab/free_space.hpp"
#include "uaplab/random.hpp"

using namespace uaplab;

TEST(Eta, ZeroIsTheZeroFunction) {
  for (double x : {-1.0, 0.0, 0.5}) EXPECT_EQ(eta(0.0).scalar(x), 0.0);
}

TEST(Eta, SignedIndicatorValues) {
  EXPECT_EQ(eta(2.0).scalar(0.0), 1.0);
  EXPECT_EQ(eta(2.0).scalar(1.99), 1.0);
  EXPECT_EQ(eta(2.0).scalar(2.0), 0.0);
  EXPECT_EQ(eta(-1.5).scalar(-1.5), -1.0);
  EXPECT_EQ(eta(-1.5).scalar(-0.1), -1.0);
  EXPECT_EQ(eta(-1.5).scalar(0.0), 0.0);
}

TEST(Eta, NormEqualsAbsoluteValue) {
  const auto z = GridFunction::zero(1, 1);
  EXPECT_NEAR(l1_distance_piecewise(eta(2.0), z, -5, 5, 1000, {0.0, 2.0}), 2.0, 1e-12);
  EXPECT_NEAR(l1_distance_piecewise(eta(-0.7), z, -5, 5, 1000, {-0.7, 0.0}), 0.7, 1e-12);
}

TEST(Eta, IsometryOnRandomPairs) {
  Rng rng(21);
  for (int i = 0; i < 1000; ++i) {
    const double r = rng.uniform(-10, 10);
    const double s = rng.uniform(-10, 10);
    EXPECT_NEAR(eta_l1_distance(r, s), std::abs(r - s), 1e-12);
    if (i % 50 == 0) {
      const double measured = l1_distance_piecewise(eta(r), eta(s), -11, 11, 2000, {r, s, 0.0});
      EXPECT_NEAR(measured, std::abs(r - s), 1e-9);
    }
  }
}

TEST(Eta, OppositeSignsSpanOrigin) {
  EXPECT_NEAR(l1_distance_piecewise(eta(3.0), eta(1.0), -5, 5, 100, {0.0, 1.0, 3.0}), 2.0, 1e-12);
  EXPECT_NEAR(l1_distance_piecewise(eta(-1.0), eta(2.0), -5, 5, 100, {-1.0, 0.0, 2.0}), 3.0, 1e-12);
}

TEST(L1Piecewise, SmoothIntegrand) {
  const auto f = GridFunction::from_scalar([](double x) { return std::sin(x); });
  EXPECT_NEAR(l1_distance_piecewise(f, GridFunction::zero(1, 1), 0.0, M_PI, 20000), 2.0, 1e-8);
  EXPECT_THROW(l1_distance_piecewise(f, f, 1.0, 0.0, 10), Error);
}

TEST(Rho, SingleAtomIsTheFunction) {
  const auto f = GridFunction::from_scalar([](double x) { return x * x - 1.0; });
  const auto g = rho(FormalCombination::single(f));
  for (double x : {-2.0, 0.0, 1.3}) EXPECT_EQ(g.scalar(x), f.scalar(x));
}

TEST(Rho, HalvesOfTheSameFunction) {
  const auto f = GridFunction::from_scalar([](double x) { return std::cos(x); });
  FormalCombination c;
  c.add(0.5, f);
  c.add(0.5, f);
  for (double x : {-1.0, 0.0, 2.0}) EXPECT_NEAR(rho(c).scalar(x), f.scalar(x), 1e-15);
}

TEST(Rho, CancellationGivesZero) {
  const auto f = GridFunction::from_scalar([](double x) { return std::exp(x); });
  FormalCombination c;
  c.add(1.0, f);
  c.add(-1.0, f);
  for (double x : {-3.0, 0.0, 4.0}) EXPECT_EQ(rho(c).scalar(x), 0.0);
}

TEST(Rho, Linear) {
  const auto f = GridFunction::from_scalar([](double x) { return x; });
  const auto g = GridFunction::from_scalar([](double x) { return std::sin(x); });
  const auto a = FormalCombination::single(f).scaled(2.0);
  const auto b = FormalCombination::single(g).scaled(-0.5);
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform(-5, 5);
    EXPECT_NEAR(rho(a + b).scalar(x), 2.0 * f.scalar(x) - 0.5 * g.scalar(x), 1e-12);
    EXPECT_NEAR(rho(a.scaled(3.0)).scalar(x), 3.0 * rho(a).scalar(x), 1e-12);
  }
}

TEST(Rho, ShapeMismatchIsRejected) {
  FormalCombination c;
  c.add(1.0, GridFunction::zero(1, 1));
  EXPECT_THROW(c.add(1.0, GridFunction::zero(2, 1)), Error);
}
