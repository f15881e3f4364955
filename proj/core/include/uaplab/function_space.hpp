#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace uaplab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A total map R^m -> R^n, carried as an evaluation closure plus its shape.
///
/// Copies share the closure. Functions known to grow without bound can be
/// flagged so that sup-type diagnostics report divergence instead of a value.
class GridFunction {
 public:
  using Eval = std::function<Vector(const Vector&)>;

  GridFunction(int dim_in, int dim_out, Eval eval, bool unbounded = false);

  Vector operator()(const Vector& x) const;
  /// Convenience for m = n = 1.
  double scalar(double x) const;

  int dim_in() const { return dim_in_; }
  int dim_out() const { return dim_out_; }
  bool flagged_unbounded() const { return unbounded_; }

  static GridFunction constant(int dim_in, Vector value);
  static GridFunction zero(int dim_in, int dim_out);
  static GridFunction from_scalar(std::function<double(double)> f,
                                  bool unbounded = false);
  /// x -> profile(||x||), replicated over `dim_out` outputs.
  static GridFunction radial(int dim_in, int dim_out,
                             std::function<double(double)> profile);

 private:
  int dim_in_;
  int dim_out_;
  std::shared_ptr<const Eval> eval_;
  bool unbounded_;
};

GridFunction operator+(const GridFunction& f, const GridFunction& g);
GridFunction operator-(const GridFunction& f, const GridFunction& g);
GridFunction operator*(double c, const GridFunction& f);

/// Uniform tensor grid over [-radius, radius]^dim_in.
struct GridSpec {
  int dim_in = 1;
  int dim_out = 1;
  int points_per_axis = 401;
  double radius = 1.0;

  void validate() const;
  double spacing() const;
  std::size_t size() const;
  /// Lattice density used by the cube-nested d_ucc sampler: grid points per
  /// unit length, rounded, at least 1.
  int points_per_unit() const;

  /// Calls `visit(x)` for every grid point, in lexicographic order.
  void for_each_point(const std::function<void(const Vector&)>& visit) const;

  static GridSpec cube(int dim_in, int dim_out, double radius,
                       int points_per_axis);
};

void to_json(nlohmann::json& j, const GridSpec& g);
void from_json(const nlohmann::json& j, GridSpec& g);

/// A finite measure on the real line given by a Lebesgue density.
class Measure1D {
 public:
  enum class Kind { kGaussian, kUniformWindow, kCustomTable };

  static Measure1D gaussian(double mean = 0.0, double stddev = 1.0,
                            double mass = 1.0);
  /// Constant density `height` on [lo, hi], zero elsewhere.
  static Measure1D uniform_window(double lo, double hi, double height = 1.0);
  /// Piecewise-linear density through (xs[i], densities[i]), zero outside.
  static Measure1D custom_table(std::vector<double> xs,
                                std::vector<double> densities);

  Kind kind() const { return kind_; }
  double density(double x) const;
  double total_mass() const { return mass_; }
  /// Inverse of the normalized CDF, u in (0, 1).
  double quantile(double u) const;
  /// Measure of (-inf, x].
  double cdf(double x) const;
  /// True when the density is positive on all of R.
  bool lebesgue_equivalent() const { return kind_ == Kind::kGaussian; }

  const std::vector<double>& params() const { return params_; }

 private:
  Measure1D(Kind kind, std::vector<double> params);

  Kind kind_;
  std::vector<double> params_;
  std::vector<double> table_xs_;
  std::vector<double> table_ds_;
  std::vector<double> table_cdf_;
  double mass_ = 1.0;
};

void to_json(nlohmann::json& j, const Measure1D& m);
Measure1D measure_from_json(const nlohmann::json& j);

/// A growth weight omega: [0, inf) -> [0, inf).
struct Weight {
  enum class Kind { kUnit, kPower, kMaxTPower, kExpDecay, kCustom };

  Kind kind = Kind::kUnit;
  double param = 0.0;
  std::string label;
  std::function<double(double)> custom;

  double operator()(double t) const;
  bool is_unit() const { return kind == Kind::kUnit; }

  static Weight unit();
  static Weight power(double i);
  static Weight max_t_power(double i);
  static Weight exp_decay(double k);
  static Weight custom_weight(std::string label, std::function<double(double)> f);
};

struct WeightFamily {
  std::vector<Weight> weights;

  bool contains_unit() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const Weight& w);
Weight weight_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const WeightFamily& w);
WeightFamily weight_family_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Metrics and norms. All sups are grid sups and therefore lower bounds.

struct DuccResult {
  double value = 0.0;
  /// Bound on the omitted series tail, 2^-K.
  double truncation_bound = 0.0;
  /// s_k = sup over [-k, k]^m of ||f - g||, k = 1..K.
  std::vector<double> cube_sups;

  double upper_bound() const { return value + truncation_bound; }
};

/// Truncated metric of uniform convergence on compacts,
/// sum_{k=1}^{K} 2^-k s_k / (1 + s_k).
DuccResult d_ucc(const GridFunction& f, const GridFunction& g, int terms,
                 const GridSpec& grid);

/// Default sampling grid for d_ucc: 200 lattice points per unit length.
GridSpec default_ducc_grid(int dim_in = 1, int dim_out = 1);

/// (integral ||f||^p d mu)^{1/p} for the product of the per-axis measures,
/// midpoint rule in quantile space (equal-mass nodes). Supports m <= 2.
double lp_norm(const GridFunction& f, const std::vector<Measure1D>& mu,
               double p, int quad_nodes);

struct SupResult {
  double value = 0.0;
  Vector argmax;
};

/// Grid sup of ||f(x)|| over the closed Euclidean ball of `radius`.
SupResult sup_norm_on_ball(const GridFunction& f, double radius,
                           const GridSpec& grid);

struct WeightedSupOptions {
  double initial_radius = 1.0;
  double growth = 2.0;
  double max_radius = 4096.0;
  double rel_tolerance = 1e-3;
  /// Consecutive small increments required to declare stabilization.
  int patience = 2;
};

struct WeightedSupResult {
  double value = 0.0;
  double radius_reached = 0.0;
  bool stabilized = false;
  bool diverged() const { return !stabilized; }
};

/// sup ||f(x)|| / (omega(||x||) + 1) over an expanding family of balls.
WeightedSupResult weighted_sup_norm(const GridFunction& f,
                                    const std::function<double(double)>& omega,
                                    const GridSpec& grid,
                                    const WeightedSupOptions& opts = {});

}  // namespace uaplab
