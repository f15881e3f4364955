#include <cmath>

#include <gtest/gtest.h>

#include "uaplab/constrained_approx.hpp"
#include "uaplab/error.hpp"

using namespace uaplab;

namespace {

CompositionOperator shifted_op() {
  return CompositionOperator(builtin_activation("leaky_shifted_paper"), Vector::Ones(1));
}

GridFunction sine() {
  return GridFunction::from_scalar([](double x) { return std::sin(x); });
}

void expect_frozen_identity(const ConstrainedNetReport& r) {
  ASSERT_EQ(r.split_index, r.n_frozen);
  const auto& layers = r.full_net.layers();
  for (int i = 0; i < r.n_frozen; ++i) {
    const auto& l = layers[static_cast<std::size_t>(i)];
    EXPECT_TRUE(l.matrix.isIdentity(0.0)) << "layer " << i;
    EXPECT_EQ(l.bias(0), 1.0);
    EXPECT_EQ(r.sparsity_per_frozen_layer[static_cast<std::size_t>(i)], 1);
  }
}

// full_net(x) must equal final_segment(S^N(x)).
void expect_decomposition(const ConstrainedNetReport& r, const CompositionOperator& op) {
  for (double x = -6.0; x <= 6.0; x += 0.37) {
    const Vector v = Vector::Constant(1, x);
    EXPECT_NEAR(r.full_net(v)(0), r.final_segment(op.iterate(v, r.n_frozen))(0), 1e-12);
  }
}

}  // namespace

TEST(Constraints, SupOnBallValue) {
  const auto c = sup_on_ball_constraint(2.0, 1.0);
  EXPECT_NEAR(c.eval(sine()), 1.0, 1e-4);
  const auto lin = GridFunction::from_scalar([](double x) { return 0.25 * x; });
  EXPECT_NEAR(c.eval(lin), 0.5, 1e-12);
}

TEST(Constraints, AbsAtPointValueAndJson) {
  const auto c = constraint_from_json({{"kind", "abs_at_point"}, {"point", {0.5}}, {"C", 0.3}});
  EXPECT_EQ(c.threshold, 0.3);
  EXPECT_NEAR(c.eval(sine()), std::sin(0.5), 1e-15);
  EXPECT_THROW(constraint_from_json({{"kind", "nope"}, {"C", 1.0}}), Error);
}

TEST(ConstrainedOptions, JsonRoundTrip) {
  ConstrainedFitOptions o;
  o.max_width = 512;
  o.shell_weight = 0.01;
  const auto back = constrained_options_from_json(to_json(o));
  EXPECT_EQ(back.max_width, 512);
  EXPECT_EQ(back.shell_weight, 0.01);
  EXPECT_EQ(back.fit.width, o.fit.width);
}

TEST(Prescribed, EqualFunctionsNeedNoFrozenLayers) {
  const auto op = shifted_op();
  const auto r = assemble_prescribed(sine(), sine(), 0.1, 0.1, op);
  EXPECT_EQ(r.n_frozen, 0);
  EXPECT_LT(r.d_prescribed, 0.1);
  EXPECT_LT(r.d_target, 0.1);
}

TEST(Prescribed, LooseTolerancesWithSmallFunctions) {
  const auto op = shifted_op();
  const auto f = 0.1 * sine();
  const auto f_hat = GridFunction::from_scalar([](double x) { return 0.1 * std::cos(x); });
  const auto r = assemble_prescribed(f_hat, f, 0.9, 0.9, op);
  EXPECT_LT(r.d_prescribed, 0.9);
  EXPECT_LT(r.d_target, 0.9);
  expect_frozen_identity(r);
  expect_decomposition(r, op);
}

TEST(Prescribed, RejectsGeneralMatrix) {
  Matrix a(1, 1);
  a << 2.0;
  const CompositionOperator op(builtin_activation("leaky_shifted_paper"), a, Vector::Ones(1));
  EXPECT_THROW(assemble_prescribed(sine(), GridFunction::zero(1, 1), 0.1, 0.1, op), Error);
}

TEST(Constrained, SupOnBallAroundZeroWitness) {
  const auto op = shifted_op();
  const std::vector<ConstraintFunctional> cs{sup_on_ball_constraint(3.0, 1.0)};
  const auto r = assemble_constrained(cs, GridFunction::zero(1, 1), sine(), 0.2, op);
  ASSERT_EQ(r.constraints.size(), 1u);
  EXPECT_TRUE(r.constraints[0].satisfied);
  EXPECT_LT(r.constraints[0].value, 1.0);
  EXPECT_LT(r.d_target, 0.2);
  EXPECT_GT(r.n_frozen, 0);
  expect_frozen_identity(r);
  expect_decomposition(r, op);

  const auto reloaded = net_from_json(to_json(r.final_segment)).as_function();
  EXPECT_NEAR(cs[0].eval(reloaded), r.constraints[0].value, 1e-9);
  EXPECT_EQ(r.width_bound, 4);
}

TEST(Constrained, EmptyListMatchesPrescribed) {
  const auto op = shifted_op();
  const auto z = GridFunction::zero(1, 1);
  const auto a = assemble_constrained({}, z, sine(), 0.2, op);
  const auto b = assemble_prescribed(z, sine(), 0.2, 0.2, op);
  EXPECT_EQ(a.n_frozen, b.n_frozen);
  EXPECT_TRUE(a.constraints.empty());
}

TEST(Constrained, ViolatingWitnessIsRejected) {
  const auto op = shifted_op();
  const auto f0 = GridFunction::constant(1, Vector::Constant(1, 0.7));
  const std::vector<ConstraintFunctional> cs{abs_at_point_constraint(Vector::Zero(1), 0.5)};
  try {
    assemble_constrained(cs, f0, sine(), 0.2, op);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPrecondition);
    EXPECT_NE(e.to_json().dump().find(cs[0].label), std::string::npos);
  }
}

TEST(Constrained, TighterToleranceNeverNeedsFewerLayers) {
  const auto op = shifted_op();
  const auto z = GridFunction::zero(1, 1);
  const auto loose = assemble_prescribed(z, sine(), 0.4, 0.4, op);
  const auto tight = assemble_prescribed(z, sine(), 0.2, 0.2, op);
  EXPECT_LE(loose.n_frozen, tight.n_frozen);
  EXPECT_LE(loose.k0, tight.k0);
}
