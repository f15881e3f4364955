#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "uaplab/activations.hpp"
#include "uaplab/depth_dynamics.hpp"
#include "uaplab/function_space.hpp"

namespace uaplab {

struct PushforwardReport {
  /// sup of the density of (s(. + b))_# mu w.r.t. Lebesgue; inf when not
  /// well defined.
  double norm_value = 0.0;
  bool well_defined = false;
  /// norm_value > 1
  bool kappa_check = false;
  /// Point x (before the shift) where the grid maximum is attained.
  double argmax = 0.0;
  /// inf of sigma' over R (grid and asymptotic estimate).
  double min_derivative = 0.0;
  /// Interval of sigma's input where sigma' <= 0, when not well defined.
  std::optional<std::pair<double, double>> witness_interval;
};

nlohmann::json to_json(const PushforwardReport& r);

/// Grid maximum of rho(x) / |sigma'(x + b)| over a grid centred on the
/// bulk of mu, plus both one-sided derivatives at every breakpoint.
/// `grid.radius` is in units of the measure's spread.
PushforwardReport pushforward_density_norm(const ActivationSpec& sigma, double b,
                                           const Measure1D& mu,
                                           const GridSpec& grid = GridSpec{1, 1, 20001, 12.0});

struct KappaRow {
  int n = 0;
  double value = 0.0;
};

struct KappaTable {
  double norm_value = 0.0;
  std::vector<KappaRow> rows;
  bool strictly_increasing = false;
};

/// norm_value^N for each N. Throws kVerificationFailed when norm_value <= 1.
KappaTable kappa_growth_check(const ActivationSpec& sigma, double b, const Measure1D& mu,
                              const std::vector<int>& n_values);

struct SimplexFit {
  Vector coefficients;
  std::vector<int> basis_ids;
  /// L1_mu residual at the returned coefficients.
  double residual = 0.0;
  int iterations = 0;
  /// Residual after each accepted iterate, starting with the initial vertex.
  std::vector<double> history;
};

nlohmann::json to_json(const SimplexFit& f);

/// Frank-Wolfe on the unit simplex for the L1_mu residual of
/// sum_i alpha_i f_i against `target`, with equal-mass quadrature nodes.
SimplexFit simplex_fit(const std::vector<GridFunction>& basis, const GridFunction& target,
                       const Measure1D& mu, int max_iter, int quad_nodes = 4000);

/// Draws the i-th basis function of a family; must depend only on (seed, i)
/// so that smaller draws are prefixes of larger ones.
using BasisSampler = std::function<GridFunction(std::uint64_t seed, int index)>;

/// Indicators I_{(b, c)} with b < c drawn uniformly from [lo, hi].
BasisSampler tree_basis(double lo = -0.5, double hi = 1.5);
/// Ramps clamp(w x + c, 0, 1), each a two-neuron ReLU network.
BasisSampler ramp_basis(double lo = -0.5, double hi = 1.5);

struct RateRow {
  int n = 0;
  int depth = 0;
  double residual = 0.0;
  /// (1 + sqrt(2 mu(R))) * norm^N / sqrt(n)
  double bound_reference = 0.0;
  /// (1 + sqrt(2 mu(R))) * norm^(N/2) / sqrt(n)
  double bound_displayed = 0.0;
  /// (1 + sqrt(2 mu(R))) / sqrt(n)
  double bound_proof_final = 0.0;
};

struct RateSweepResult {
  std::vector<RateRow> rows;
  double slope_estimate = 0.0;
  double norm_value = 0.0;
  bool all_below_reference = false;
};

struct RateSweepOptions {
  std::uint64_t seed = 0;
  int max_iter = 2000;
  int quad_nodes = 4000;
  /// 0 means: UAPLAB_THREADS if set, else hardware concurrency.
  int threads = 0;
};

RateSweepResult rate_sweep(const BasisSampler& basis, const GridFunction& target,
                           const Measure1D& mu, const std::vector<int>& n_values, int depth,
                           const CompositionOperator& op, const RateSweepOptions& options = {});

/// CSV with columns n,N,residual,bound_reference,slope_estimate,
/// bound_displayed,bound_proof_final; 17 significant digits.
std::string rate_sweep_csv(const RateSweepResult& r);
nlohmann::json to_json(const RateSweepResult& r);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Worker count from UAPLAB_THREADS, defaulting to hardware concurrency.
int worker_threads(int requested = 0);

}  // namespace uaplab
