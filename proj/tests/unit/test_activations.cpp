#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "uaplab/activations.hpp"
#include "uaplab/error.hpp"
#include "uaplab/random.hpp"

using namespace uaplab;
using Kind = TransitivityVerdict::Kind;

namespace {

ActivationSpec affine_activation(const std::string& name, double slope, double intercept) {
  return ActivationSpec(name, {Branch{-kInf, kInf, {AffineTerm{slope, intercept}}}});
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kConfig;
}

// Injectivity by sorting sampled values: a repeated value means not injective.
bool injective_on_samples(const ActivationSpec& s, double lo, double hi, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(s(lo + (hi - lo) * i / (n - 1)));
  std::sort(v.begin(), v.end());
  return std::adjacent_find(v.begin(), v.end()) == v.end();
}

}  // namespace

TEST(Classify, ShippedExamples) {
  const auto relu = classify(builtin_activation("relu"));
  EXPECT_EQ(relu.kind, Kind::kNotTransitive);
  ASSERT_TRUE(relu.witness.has_value());
  EXPECT_EQ(builtin_activation("relu")(*relu.witness), *relu.witness);

  const auto shifted = classify(builtin_activation("leaky_shifted_paper"));
  EXPECT_EQ(shifted.kind, Kind::kTransitive);
  EXPECT_EQ(shifted.dominance, Dominance::kAbove);
  EXPECT_TRUE(shifted.fixed_points.empty());

  const auto rescaled = classify(builtin_activation("leaky_rescaled_paper"));
  EXPECT_EQ(rescaled.kind, Kind::kLpTransitiveOnly);
  ASSERT_EQ(rescaled.fixed_points.size(), 1u);
  EXPECT_EQ(rescaled.fixed_points[0], 0.0);
}

TEST(Classify, IdentityHasAFixedInterval) {
  const auto v = classify(builtin_activation("identity"));
  EXPECT_EQ(v.kind, Kind::kNotTransitive);
  EXPECT_TRUE(v.fixed_interval.has_value());
}

TEST(Classify, VerdictSurvivesSplittingABranch) {
  const ActivationSpec split("split_shifted", {Branch{-kInf, 0.0, {AffineTerm{0.1, 0.1}}},
                                               Branch{0.0, 5.0, {AffineTerm{1.1, 0.1}}},
                                               Branch{5.0, kInf, {AffineTerm{1.1, 0.1}}}});
  const auto a = classify(split);
  const auto b = classify(builtin_activation("leaky_shifted_paper"));
  EXPECT_EQ(a.kind, b.kind);
  EXPECT_EQ(a.dominance, b.dominance);
  EXPECT_EQ(a.injective, b.injective);
}

TEST(Classify, SignOfSigmaMinusXOnSamples) {
  const auto s = builtin_activation("leaky_shifted_paper");
  Rng rng(5);
  for (int i = 0; i < 100000; ++i) {
    const double x = rng.uniform(-1e4, 1e4);
    ASSERT_GT(s(x) - x, 0.0) << x;
  }
}

TEST(Classify, InjectivityAgreesWithSortedSamples) {
  for (const auto& name : builtin_activation_names()) {
    const auto s = builtin_activation(name);
    EXPECT_EQ(classify(s).injective, injective_on_samples(s, -50.0, 50.0, 1001)) << name;
  }
}

TEST(ConstructTransitive, CubeExample) {
  const auto s = construct_transitive(builtin_activation("cube"), 0.5, 1.0);
  EXPECT_DOUBLE_EQ(s(1.0), 3.0);
  EXPECT_DOUBLE_EQ(s(-2.0), 0.0);
  EXPECT_DOUBLE_EQ(s(0.0), 1.0);
  EXPECT_EQ(classify(s).kind, Kind::kTransitive);
}

TEST(ConstructTransitive, RandomAffineTildesAreTransitive) {
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const double slope = rng.uniform(0.1, 3.0);
    const double a1 = rng.uniform(0.05, 0.95);
    const double a2 = rng.uniform(0.05, 2.0);
    if (std::abs(a2 - (slope - 1.0)) < 1e-3) continue;
    const auto s = construct_transitive(affine_activation("tilde", slope, 0.0), a1, a2);
    EXPECT_EQ(classify(s).kind, Kind::kTransitive) << slope << " " << a1 << " " << a2;
    for (int k = 0; k < 1000; ++k) {
      const double x = rng.uniform(-100, 100);
      ASSERT_GT(s(x), x);
    }
  }
}

TEST(ConstructTransitive, RejectsZeroMap) {
  EXPECT_EQ(code_of([] { construct_transitive(affine_activation("zero", 0.0, 0.0), 0.5, 1.0); }),
            ErrorCode::kPrecondition);
}

TEST(ConstructTransitive, RejectsAlphaOutsideRange) {
  const auto cube = builtin_activation("cube");
  EXPECT_EQ(code_of([&] { construct_transitive(cube, 1.0, 1.0); }), ErrorCode::kPrecondition);
  EXPECT_EQ(code_of([&] { construct_transitive(cube, 0.5, 0.0); }), ErrorCode::kPrecondition);
}

TEST(ConstructTransitive, RejectsAlpha2AtDerivativeMinusOne) {
  EXPECT_EQ(code_of([] { construct_transitive(affine_activation("double", 2.0, 0.0), 0.5, 1.0); }),
            ErrorCode::kPrecondition);
}

TEST(ConstructTransitive, RejectsKinkAtZero) {
  EXPECT_EQ(code_of([] { construct_transitive(builtin_activation("leaky_rescaled_paper"), 0.5, 1.0); }),
            ErrorCode::kPrecondition);
}

TEST(ConstructLpTransitive, IdentityTildeExample) {
  const auto s = construct_lp_transitive(builtin_activation("identity"), 0.1);
  EXPECT_DOUBLE_EQ(s(3.0), 6.0);
  EXPECT_DOUBLE_EQ(s(-1.0), -0.1);
  EXPECT_EQ(s(0.0), 0.0);
  EXPECT_EQ(classify(s).kind, Kind::kLpTransitiveOnly);
}

TEST(ConstructLpTransitive, RejectsAlphaOutsideRange) {
  EXPECT_EQ(code_of([] { construct_lp_transitive(builtin_activation("identity"), 1.5); }),
            ErrorCode::kPrecondition);
}

TEST(Invert, ShiftedLeakyExamples) {
  const auto s = builtin_activation("leaky_shifted_paper");
  EXPECT_NEAR(invert(s, 1.2), 1.0, 1e-14);
  EXPECT_NEAR(invert(s, 0.1), 0.0, 1e-14);
  EXPECT_NEAR(invert(s, 0.0), -1.0, 1e-14);
}

TEST(Invert, ReluIsRejected) {
  EXPECT_EQ(code_of([] { invert(builtin_activation("relu"), 1.0); }), ErrorCode::kPrecondition);
}

TEST(Invert, RoundTripOnInjectiveActivations) {
  std::vector<ActivationSpec> acts{builtin_activation("leaky_shifted_paper"),
                                   builtin_activation("leaky_rescaled_paper"),
                                   builtin_activation("cube"),
                                   construct_transitive(builtin_activation("cube"), 0.5, 1.0)};
  Rng rng(17);
  for (const auto& s : acts) {
    for (int i = 0; i < 1000; ++i) {
      const double x = rng.uniform(-20, 20);
      EXPECT_NEAR(invert(s, s(x)), x, 1e-10 * std::max(1.0, std::abs(x))) << s.name();
    }
  }
}

TEST(ActivationSpecTest, RejectsDiscontinuousBranches) {
  EXPECT_THROW(ActivationSpec("jump", {Branch{-kInf, 0.0, {AffineTerm{1.0, 0.0}}},
                                       Branch{0.0, kInf, {AffineTerm{1.0, 1.0}}}}),
               Error);
}

TEST(ActivationSpecTest, OneSidedDerivativesAtKink) {
  const auto s = builtin_activation("leaky_shifted_paper");
  EXPECT_DOUBLE_EQ(s.left_derivative(0.0), 0.1);
  EXPECT_DOUBLE_EQ(s.right_derivative(0.0), 1.1);
}

TEST(ActivationSpecTest, JsonRoundTripPreservesValues) {
  const auto s = construct_transitive(builtin_activation("cube"), 0.25, 0.5);
  const auto back = activation_from_json(to_json(s));
  for (double x : {-10.0, -1.0, 0.0, 0.3, 2.0, 9.0}) EXPECT_DOUBLE_EQ(back(x), s(x));
  EXPECT_EQ(activation_from_json("relu")(-3.0), 0.0);
}
