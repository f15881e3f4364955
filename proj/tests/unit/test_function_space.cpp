#include <cmath>

#include <gtest/gtest.h>

#include "uaplab/error.hpp"
#include "uaplab/function_space.hpp"
#include "uaplab/random.hpp"

using namespace uaplab;

namespace {

GridSpec small_grid() { return GridSpec{1, 1, 401, 1.0}; }

GridFunction poly(double c0, double c1, double c2) {
  return GridFunction::from_scalar([=](double x) { return c0 + c1 * x + c2 * x * x; });
}

// s/(1+s) summed with weights 2^-k for constant s_k = s.
double constant_gap_series(double s, int terms) {
  double acc = 0.0;
  for (int k = 1; k <= terms; ++k) acc += std::ldexp(1.0, -k) * s / (1.0 + s);
  return acc;
}

}  // namespace

TEST(Ducc, IdenticalFunctionsAreAtZero) {
  const auto f = GridFunction::from_scalar([](double x) { return std::sin(x); });
  const auto r = d_ucc(f, f, 20, small_grid());
  EXPECT_EQ(r.value, 0.0);
  EXPECT_DOUBLE_EQ(r.truncation_bound, std::ldexp(1.0, -20));
}

TEST(Ducc, ConstantsZeroAndOneThreeTerms) {
  const auto r = d_ucc(GridFunction::zero(1, 1), GridFunction::constant(1, Vector::Ones(1)), 3,
                       small_grid());
  EXPECT_NEAR(r.value, constant_gap_series(1.0, 3), 1e-15);
  EXPECT_NEAR(r.value, 0.4375, 1e-15);
  ASSERT_EQ(r.cube_sups.size(), 3u);
}

TEST(Ducc, ConstantsZeroAndOneLongSeriesApproachesHalf) {
  const auto r = d_ucc(GridFunction::zero(1, 1), GridFunction::constant(1, Vector::Ones(1)), 40,
                       small_grid());
  EXPECT_NEAR(r.value, 0.5, 1e-11);
  EXPECT_LE(r.value, 0.5);
}

TEST(Ducc, CubeSupsOfIdentityGrowWithK) {
  const auto id = GridFunction::from_scalar([](double x) { return x; }, true);
  const auto r = d_ucc(id, GridFunction::zero(1, 1), 5, small_grid());
  for (int k = 1; k <= 5; ++k) EXPECT_NEAR(r.cube_sups[static_cast<std::size_t>(k - 1)], k, 1e-12);
}

TEST(Ducc, MetricPropertiesOnRandomPolynomials) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = poly(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-0.2, 0.2));
    const auto g = poly(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-0.2, 0.2));
    const auto h = poly(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-0.2, 0.2));
    const double fg = d_ucc(f, g, 10, small_grid()).value;
    const double gf = d_ucc(g, f, 10, small_grid()).value;
    const double fh = d_ucc(f, h, 10, small_grid()).value;
    const double hg = d_ucc(h, g, 10, small_grid()).value;
    EXPECT_DOUBLE_EQ(fg, gf);
    EXPECT_LE(fg, fh + hg + 1e-14);
    EXPECT_GE(fg, 0.0);
    EXPECT_LT(fg, 1.0);
  }
}

TEST(Ducc, MonotoneInTerms) {
  const auto f = poly(0.3, -1.0, 0.5);
  const auto g = GridFunction::zero(1, 1);
  double prev = 0.0;
  for (int k = 1; k <= 12; ++k) {
    const double v = d_ucc(f, g, k, small_grid()).value;
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(Ducc, TwoDimensionalInput) {
  const auto f = GridFunction(2, 1, [](const Vector& x) { return Vector::Constant(1, x.sum()); });
  const auto r = d_ucc(f, GridFunction::zero(2, 1), 2, GridSpec{2, 1, 41, 1.0});
  EXPECT_NEAR(r.cube_sups[0], 2.0, 1e-12);
  EXPECT_NEAR(r.cube_sups[1], 4.0, 1e-12);
}

TEST(Ducc, NonFiniteValuesAreRejected) {
  const auto bad = GridFunction::from_scalar([](double x) { return x > 0.5 ? NAN : 0.0; });
  try {
    d_ucc(bad, GridFunction::zero(1, 1), 2, small_grid());
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFinite);
  }
}

TEST(Ducc, ShapeMismatchIsRejected) {
  EXPECT_THROW(d_ucc(GridFunction::zero(1, 1), GridFunction::zero(2, 1), 2, small_grid()), Error);
}

TEST(LpNorm, ZeroFunctionHasZeroNorm) {
  EXPECT_EQ(lp_norm(GridFunction::zero(1, 1), {Measure1D::gaussian()}, 1.0, 1000), 0.0);
}

TEST(LpNorm, ConstantOneAgainstGaussianIsOne) {
  const auto one = GridFunction::constant(1, Vector::Ones(1));
  EXPECT_NEAR(lp_norm(one, {Measure1D::gaussian()}, 1.0, 1000), 1.0, 1e-12);
  EXPECT_NEAR(lp_norm(one, {Measure1D::gaussian()}, 2.0, 1000), 1.0, 1e-12);
}

TEST(LpNorm, IndicatorUnderUniformWindow) {
  const auto ind = GridFunction::from_scalar([](double x) { return (x >= 0.0 && x < 2.0) ? 1.0 : 0.0; });
  EXPECT_NEAR(lp_norm(ind, {Measure1D::uniform_window(-10, 10)}, 1.0, 10000), 2.0, 1e-3);
}

TEST(LpNorm, AbsoluteHomogeneity) {
  const auto f = GridFunction::from_scalar([](double x) { return std::sin(3 * x) + 0.2; });
  const auto mu = Measure1D::gaussian();
  const double base = lp_norm(f, {mu}, 1.0, 4000);
  EXPECT_NEAR(lp_norm(-2.5 * f, {mu}, 1.0, 4000), 2.5 * base, 1e-12);
}

TEST(LpNorm, GaussianFirstAbsoluteMoment) {
  const auto id = GridFunction::from_scalar([](double x) { return x; });
  EXPECT_NEAR(lp_norm(id, {Measure1D::gaussian()}, 1.0, 20000), std::sqrt(2.0 / M_PI), 1e-3);
}

TEST(Measure, QuantileInvertsCdf) {
  const auto g = Measure1D::gaussian(0.5, 2.0, 3.0);
  for (double u : {0.01, 0.2, 0.5, 0.9, 0.999}) {
    EXPECT_NEAR(g.cdf(g.quantile(u)) / g.total_mass(), u, 1e-10);
  }
  const auto t = Measure1D::custom_table({0, 1, 2}, {0, 1, 0});
  EXPECT_NEAR(t.total_mass(), 1.0, 1e-14);
  EXPECT_NEAR(t.quantile(0.5), 1.0, 1e-12);
}

TEST(Measure, JsonRoundTrip) {
  const auto m = Measure1D::uniform_window(-1, 3, 0.5);
  nlohmann::json j = m;
  const auto back = measure_from_json(j);
  EXPECT_EQ(back.kind(), Measure1D::Kind::kUniformWindow);
  EXPECT_DOUBLE_EQ(back.total_mass(), 2.0);
}

TEST(SupOnBall, IdentityOnRadiusThree) {
  const auto id = GridFunction::from_scalar([](double x) { return x; });
  const auto s = sup_norm_on_ball(id, 3.0, GridSpec{1, 1, 601, 1.0});
  EXPECT_NEAR(s.value, 3.0, 1e-12);
  EXPECT_NEAR(std::abs(s.argmax(0)), 3.0, 1e-12);
}

TEST(SupOnBall, DecayingExponentialPeaksAtOrigin) {
  const auto f = GridFunction::from_scalar([](double x) { return std::exp(-std::abs(x)); });
  EXPECT_NEAR(sup_norm_on_ball(f, 5.0, GridSpec{1, 1, 1001, 1.0}).value, 1.0, 1e-12);
}

TEST(SupOnBall, EuclideanBallExcludesCubeCorners) {
  const auto f = GridFunction(2, 1, [](const Vector& x) { return Vector::Constant(1, x.norm()); });
  EXPECT_LE(sup_norm_on_ball(f, 1.0, GridSpec{2, 1, 101, 1.0}).value, 1.0 + 1e-12);
}

TEST(WeightedSup, IdentityUnderLinearWeightStabilizesNearOne) {
  const auto id = GridFunction::from_scalar([](double x) { return x; }, true);
  const auto r = weighted_sup_norm(id, Weight::power(1), GridSpec{1, 1, 401, 1.0});
  EXPECT_TRUE(r.stabilized);
  EXPECT_NEAR(r.value, 1.0, 1e-2);
  EXPECT_LE(r.value, 1.0);
}

TEST(WeightedSup, SquareUnderLinearWeightDiverges) {
  const auto sq = GridFunction::from_scalar([](double x) { return x * x; }, true);
  const auto r = weighted_sup_norm(sq, Weight::power(1), GridSpec{1, 1, 401, 1.0});
  EXPECT_TRUE(r.diverged());
}

TEST(WeightedSup, UnitWeightHalvesBoundedSup) {
  const auto f = GridFunction::from_scalar([](double x) { return std::exp(-x * x); });
  const auto grid = GridSpec{1, 1, 401, 1.0};
  const auto r = weighted_sup_norm(f, Weight::unit(), grid);
  EXPECT_TRUE(r.stabilized);
  EXPECT_NEAR(r.value, 0.5, 1e-12);
}

TEST(Weights, JsonFormsRoundTrip) {
  for (const auto& w : {Weight::unit(), Weight::power(2), Weight::max_t_power(3), Weight::exp_decay(0.5)}) {
    nlohmann::json j = w;
    const auto back = weight_from_json(j);
    EXPECT_EQ(back.kind, w.kind);
    for (double t : {0.0, 0.5, 2.0, 7.0}) EXPECT_DOUBLE_EQ(back(t), w(t));
  }
}

TEST(GridSpecTest, JsonRoundTripAndValidation) {
  const GridSpec g{2, 3, 51, 4.0};
  nlohmann::json j = g;
  const auto back = j.get<GridSpec>();
  EXPECT_EQ(back.dim_in, 2);
  EXPECT_EQ(back.dim_out, 3);
  EXPECT_EQ(back.points_per_axis, 51);
  EXPECT_DOUBLE_EQ(back.radius, 4.0);
  EXPECT_THROW((GridSpec{1, 1, 1, 1.0}.validate()), Error);
  EXPECT_THROW((GridSpec{1, 1, 11, -1.0}.validate()), Error);
}
