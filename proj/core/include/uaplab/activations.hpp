#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "uaplab/function_space.hpp"

namespace uaplab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// a*x + b
struct AffineTerm {
  double slope = 0.0;
  double intercept = 0.0;
};

/// scale * sgn(x) * |x|^exponent, exponent > 0 (odd extension of a power).
struct PowerTerm {
  double scale = 1.0;
  double exponent = 1.0;
};

/// Piecewise-linear interpolation through (xs, ys), extrapolated linearly
/// with the end slopes.
struct TableTerm {
  std::vector<double> xs;
  std::vector<double> ys;
};

/// Opaque closure. Its presence switches the activation to numeric-only mode.
struct CustomTerm {
  std::function<double(double)> value;
  std::function<double(double)> derivative;  // may be empty
  std::string label;
};

using Term = std::variant<AffineTerm, PowerTerm, TableTerm, CustomTerm>;

double term_value(const Term& t, double x);
/// One-sided derivative of the term at x (right unless `left`).
double term_derivative(const Term& t, double x, bool left = false);

/// Branch on [lo, hi). The value is the sum of its terms.
struct Branch {
  double lo = -kInf;
  double hi = kInf;
  std::vector<Term> terms;

  double value(double x) const;
  double derivative(double x, bool left = false) const;
  bool all_affine() const;
  bool has_custom() const;
  /// Combined slope and intercept; valid only when all_affine().
  AffineTerm as_affine() const;
  bool contains(double x) const { return x >= lo && x < hi; }
};

/// Continuous piecewise-analytic scalar activation. Branches partition R in
/// order; a breakpoint belongs to the branch on its right. Immutable; copies
/// share state.
class ActivationSpec {
 public:
  ActivationSpec(std::string name, std::vector<Branch> branches);

  double operator()(double x) const;
  /// Componentwise application.
  Vector apply(const Vector& x) const;
  double left_derivative(double x) const;
  double right_derivative(double x) const;
  double derivative(double x) const { return right_derivative(x); }

  const std::string& name() const;
  const std::vector<Branch>& branches() const;
  std::vector<double> breakpoints() const;
  std::size_t branch_index(double x) const;

  /// True when some branch carries a CustomTerm.
  bool numeric_only() const;
  /// +1 strictly increasing, -1 strictly decreasing, 0 otherwise.
  int monotone_direction() const;
  /// lim sigma(x) as x -> -inf and x -> +inf.
  double limit_at_neg_inf() const;
  double limit_at_pos_inf() const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

/// Strict-monotonicity direction of one branch: +1, -1, 0 for constant,
/// nullopt when the branch is not monotone. `probe_radius` bounds the
/// sampled window for non-analytic branches.
std::optional<int> branch_direction(const Branch& b, double probe_radius = 1e6);

/// Asymptotic expansion of a branch in t = |x| as x -> +inf (positive=true)
/// or -inf: (exponent, coefficient) pairs with nonzero coefficients, highest
/// exponent first. nullopt when the branch has custom terms.
std::optional<std::vector<std::pair<double, double>>> asymptotic_expansion(
    const Branch& b, bool positive);

enum class Dominance { kAbove, kBelow, kMixed };

struct TransitivityVerdict {
  enum class Kind { kTransitive, kLpTransitiveOnly, kNotTransitive };

  Kind kind = Kind::kNotTransitive;
  /// Fixed point, or the first point of an injectivity-violating pair.
  std::optional<double> witness;
  std::optional<std::pair<double, double>> witness_pair;
  Dominance dominance = Dominance::kMixed;
  bool injective = false;
  /// Isolated fixed points found.
  std::vector<double> fixed_points;
  /// Interval on which sigma is the identity, if any.
  std::optional<std::pair<double, double>> fixed_interval;
  bool numeric_only = false;
};

std::string_view to_string(TransitivityVerdict::Kind k);
std::string_view to_string(Dominance d);
nlohmann::json to_json(const TransitivityVerdict& v);

/// Decides injectivity and the fixed-point structure of sigma. The uniform
/// sample density per branch comes from `grid.points_per_axis`.
TransitivityVerdict classify(const ActivationSpec& sigma,
                             double search_radius = 1e6,
                             const GridSpec& grid = GridSpec{1, 1, 2001, 1.0});

/// x with sigma(x) = y, |sigma(x) - y| <= 1e-12 * max(1, |y|).
double invert(const ActivationSpec& sigma, double y);

/// sigma_tilde(x) + x + alpha2 on [0, inf), alpha1 x + alpha2 on (-inf, 0).
ActivationSpec construct_transitive(const ActivationSpec& sigma_tilde,
                                    double alpha1, double alpha2);

/// sigma_tilde(x) + x on [0, inf), alpha x on (-inf, 0).
ActivationSpec construct_lp_transitive(const ActivationSpec& sigma_tilde,
                                       double alpha);

/// Built-ins: relu, leaky_shifted_paper, leaky_rescaled_paper, identity,
/// cube.
ActivationSpec builtin_activation(const std::string& name);
std::vector<std::string> builtin_activation_names();

nlohmann::json to_json(const ActivationSpec& s);
/// Accepts a built-in name (string or {"name": ...} without branches) or a
/// full {name, branches: [...]} description.
ActivationSpec activation_from_json(const nlohmann::json& j);

}  // namespace uaplab
