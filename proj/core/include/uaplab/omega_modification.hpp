#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uaplab/activations.hpp"
#include "uaplab/function_space.hpp"
#include "uaplab/network.hpp"

namespace uaplab {

struct OmegaTransformParams {
  double a = 0.5;
  double b = 1.0;
  Weight omega = Weight::unit();

  void validate() const;
};

/// (g e^{-b/(b-|x|^2)} + a) on |x|^2 < b and a e^{-|g|(|x| - sqrt b)}
/// (componentwise |.|) outside; continuous, equal to a on the sphere.
/// A non-unit omega additionally scales the result by omega(|x|) + 1.
GridFunction bump_transform(const GridFunction& g, const OmegaTransformParams& params);

/// (omega(|x|) + 1) f
GridFunction phi_omega(const GridFunction& f, const Weight& omega);
/// f / (omega(|x|) + 1)
GridFunction psi_omega(const GridFunction& f, const Weight& omega);

struct VanishingOptions {
  ShallowFitConfig fit{128, 1.0, 0, 1e-10, 801};
  /// Width is doubled up to this bound while the error check fails.
  int max_width = 4096;
  /// The tail search stops once the shell sup drops below this fraction of eps.
  double tail_fraction = 0.25;
  /// Fit radius as a fraction of the ball radius sqrt(b).
  double rho = 0.9;
  double initial_radius = 1.0;
  double radius_growth = 1.25;
  double max_radius = 1e3;
  /// Error is measured on [-factor sqrt(b), factor sqrt(b)]^m.
  double measure_factor = 3.0;
  int measure_points = 6001;
  /// Radius on which to sample the growth guard.
  double guard_max_radius = 4096.0;
};

nlohmann::json to_json(const VanishingOptions& o);
VanishingOptions vanishing_options_from_json(const nlohmann::json& j);

struct VanishingReport {
  double a = 0.0;
  double b = 0.0;
  double tail_radius = 0.0;
  double tail_sup = 0.0;
  double fit_radius = 0.0;
  int width = 0;
  double fit_residual = 0.0;
  double sup_error = 0.0;
  double measure_radius = 0.0;
  /// sup |g_eps(x)| e^{-|x|} stabilized on expanding balls.
  bool growth_guard = false;
  int attempts = 0;
};

nlohmann::json to_json(const VanishingReport& r);

struct VanishingResult {
  GridFunction f_eps;
  GridFunction g_eps;
  VanishingReport report;
};

VanishingResult approximate_vanishing(const GridFunction& f, double eps,
                                      const ActivationSpec& activation,
                                      const VanishingOptions& options = {});

struct WeightCandidate {
  std::string label;
  double weighted_norm = 0.0;
  bool stabilized = false;
  /// Outcome when tried: "selected", "tail_search_failed", ... or "".
  std::string outcome;
};

struct GrowthResult {
  GridFunction approximant;
  std::string selected;
  std::vector<WeightCandidate> candidates;
  VanishingReport vanishing;
  /// sup |f - approximant| / (omega + 1) on [-R, R]^m.
  double weighted_error = 0.0;
  double measure_radius = 0.0;
};

nlohmann::json to_json(const GrowthResult& r);

/// Uniform approximation on all of R^m in the weighted norm of the first
/// controlling weight (smallest weighted norm first) for which the divided
/// function passes the vanishing pipeline.
GrowthResult approximate_growth(const GridFunction& f, const WeightFamily& omega, double eps,
                                const ActivationSpec& activation,
                                const VanishingOptions& options = {},
                                double measure_radius = 30.0);

struct LimitationSample {
  std::string label;
  bool unbounded = false;
  /// inf for unbounded samples.
  double sup_error = 0.0;
};

struct LimitationReport {
  double best_c = 0.0;
  double best_error = 0.0;
  double radius = 0.0;
  int c_points = 0;
  std::vector<LimitationSample> samples;
};

nlohmann::json to_json(const LimitationReport& r);

/// Best constant in sup norm against e^{-|x|} (replicated over dim_out) by
/// grid search over c in [c_lo, c_hi]; also scores the supplied samples.
LimitationReport demonstrate_limitation(const std::vector<std::pair<std::string, GridFunction>>& samples,
                                        int dim_in = 1, int dim_out = 1, double radius = 50.0,
                                        int points = 20001, double c_lo = -2.0, double c_hi = 2.0,
                                        int c_points = 4001);

}  // namespace uaplab
