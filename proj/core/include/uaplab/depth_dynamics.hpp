#pragma once

#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "uaplab/activations.hpp"
#include "uaplab/function_space.hpp"
#include "uaplab/network.hpp"

namespace uaplab {

/// Phi_{A,b}: f -> f o S with S(x) = sigma.(A x + b).
class CompositionOperator {
 public:
  /// A = identity; every b_i must be positive.
  CompositionOperator(ActivationSpec activation, Vector b);
  /// General A (square, full rank required by escape_time).
  CompositionOperator(ActivationSpec activation, Matrix a, Vector b);

  Vector step(const Vector& x) const;
  /// S^n(x).
  Vector iterate(const Vector& x, int n) const;
  /// S^{-1}(y) = A^{-1}(sigma^{-1}(y) - b).
  Vector inverse_step(const Vector& y) const;
  Vector inverse_iterate(const Vector& y, int n) const;

  /// x -> f(S^n(x)); n = 0 returns f.
  GridFunction apply(const GridFunction& f, int n) const;

  const ActivationSpec& activation() const { return activation_; }
  const Matrix& matrix() const { return a_; }
  const Vector& shift() const { return b_; }
  int dim() const { return static_cast<int>(b_.size()); }
  bool identity_matrix() const { return identity_; }

  /// Verdict of the activation, computed once and shared between copies.
  const TransitivityVerdict& verdict() const;

  /// The frozen layer s.(A . + b) for stacking onto networks.
  FrontLayer as_layer() const { return {AffineLayer{a_, b_}, true}; }

 private:
  struct VerdictCache;

  ActivationSpec activation_;
  Matrix a_;
  Vector b_;
  bool identity_ = true;
  std::shared_ptr<VerdictCache> cache_;
};

GridFunction apply(const CompositionOperator& op, const GridFunction& f, int n);

/// Axis-aligned box [lo, hi].
struct Box {
  Vector lo;
  Vector hi;
};

/// Image box of S^n([-radius, radius]^m). Exact for A = I and monotone
/// sigma (corner iteration), an enclosing box otherwise.
Box iterate_box(const CompositionOperator& op, double radius, int n);

/// Smallest N in [1, max_n] with S^N([-k, k]^m) disjoint from
/// [-guard, guard]^m. Throws kNoEscape past max_n.
int escape_time(const CompositionOperator& op, double k_radius, double guard_radius,
                int max_n = 10000);

struct EscapeBlend {
  GridFunction g_tilde;
  int n = 0;
  Box box;
};

/// g~ = target o S^{-n} on the box S^n([-k0, k0]^m), seed outside the
/// margin shell around it, linear in sup-distance across the shell. The
/// escape time n is computed with guard k0 + margin.
EscapeBlend escape_blend(const CompositionOperator& op, const GridFunction& seed,
                         const GridFunction& target, double k0, double margin,
                         int max_n = 10000);

struct TransitivityOptions {
  double blend_margin = 1.0;
  int max_n = 10000;
  int verify_terms = 20;
  GridSpec verify_grid = default_ducc_grid();
  /// Re-fit g~ as a one-hidden-layer network.
  std::optional<ShallowFitConfig> fitter;
  /// Quadrature nodes for L1 verification.
  int quad_nodes = 20000;
  double max_radius = 64.0;
};

struct TransitivityCertificate {
  int n = 0;
  GridFunction g_tilde = GridFunction::zero(1, 1);
  double d_seed = 0.0;
  double d_target = 0.0;
  int k0 = 0;
  double blend_margin = 1.0;
  /// "d_ucc" or "l1".
  std::string metric = "d_ucc";
  /// Cube radius whose image was escaped (k0, or R for the L1 variant).
  double radius = 0.0;
  std::optional<Box> box;
  std::optional<double> fit_residual;
  /// Upper bound on the seed distance from the blend support (L1 only).
  std::optional<double> d_seed_bound;
  std::string activation;
  Vector b;
};

nlohmann::json to_json(const TransitivityCertificate& c);

/// Smallest k >= 1 with 2^-k < min(eps, delta) / 2.
int tail_cutoff(double eps, double delta);

TransitivityCertificate construct_transitive_approximant(
    const CompositionOperator& op, const GridFunction& g, const GridFunction& f,
    double eps, double delta, const TransitivityOptions& options = {});

TransitivityCertificate l1_transitive_approximant(
    const CompositionOperator& op, const GridFunction& g, const GridFunction& f,
    const Measure1D& mu, double eps, double delta,
    const TransitivityOptions& options = {});

}  // namespace uaplab
