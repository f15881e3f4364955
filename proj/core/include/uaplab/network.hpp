#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "uaplab/activations.hpp"
#include "uaplab/function_space.hpp"

namespace uaplab {

struct AffineLayer {
  Matrix matrix;
  Vector bias;

  int in_dim() const { return static_cast<int>(matrix.cols()); }
  int out_dim() const { return static_cast<int>(matrix.rows()); }
  Vector apply(const Vector& x) const { return matrix * x + bias; }
  void validate() const;

  /// x -> x + b
  static AffineLayer shift(const Vector& b);
};

struct Sparsity {
  long nnz_matrix = 0;
  long nnz_bias = 0;
};

Sparsity sparsity(const AffineLayer& layer);

/// W_L o s o W_{L-1} o ... o s o W_1, where s is applied after layer i iff
/// activation_after[i]. The final layer never carries an activation.
class FeedForwardNet {
 public:
  FeedForwardNet(std::vector<AffineLayer> layers, ActivationSpec activation,
                 std::vector<bool> activation_after);
  /// Activation after every layer but the last.
  FeedForwardNet(std::vector<AffineLayer> layers, ActivationSpec activation);

  Vector eval(const Vector& x) const;
  Vector operator()(const Vector& x) const { return eval(x); }

  const std::vector<AffineLayer>& layers() const { return layers_; }
  const ActivationSpec& activation() const { return activation_; }
  const std::vector<bool>& activation_after() const { return activation_after_; }
  int dim_in() const { return layers_.front().in_dim(); }
  int dim_out() const { return layers_.back().out_dim(); }
  /// d_0, d_1, ..., d_L.
  std::vector<int> widths() const;

  GridFunction as_function() const;

 private:
  std::vector<AffineLayer> layers_;
  ActivationSpec activation_;
  std::vector<bool> activation_after_;
};

struct FrontLayer {
  AffineLayer layer;
  bool activation_after = true;
};

/// Prepends `front` (listed in evaluation order) to `net`:
/// the result evaluates net(L_k(...L_1(x))) with L_i = s o (A_i . + b_i).
FeedForwardNet stack(const FeedForwardNet& net, const std::vector<FrontLayer>& front);

nlohmann::json to_json(const FeedForwardNet& net);
FeedForwardNet net_from_json(const nlohmann::json& j);

struct TreeTerm {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

/// sum_j a_j I_{(b_j, c_j)}
struct TreeFunction {
  std::vector<TreeTerm> terms;

  void validate() const;
  double eval(double x) const;
  GridFunction as_function() const;
};

double tree_eval(const TreeFunction& t, double x);

struct ShallowFitConfig {
  int width = 32;
  double fit_radius = 1.0;
  std::uint64_t seed = 0;
  double ridge = 1e-10;
  /// Training grid density; raised to keep >= 4 * width + 1 points.
  int points_per_axis = 201;
};

void to_json(nlohmann::json& j, const ShallowFitConfig& c);
ShallowFitConfig shallow_fit_from_json(const nlohmann::json& j);

struct ShallowFit {
  FeedForwardNet net;
  /// Max ||net(x) - target(x)|| over the training points.
  double sup_residual = 0.0;
  int training_points = 0;
};

/// One-hidden-layer random-feature fit: inner weights uniform on
/// [-3/R, 3/R], biases uniform on [-3, 3], drawn per neuron so narrower fits
/// use a prefix of the features of wider ones; outer layer by ridge least
/// squares on a uniform grid over [-R, R]^m.
ShallowFit fit_shallow(const GridFunction& target, const ActivationSpec& activation,
                       const ShallowFitConfig& config);

/// Same model, fitted on explicit samples (rows of `x`, `y`) with nonnegative
/// per-sample weights. Empty `weights` means uniform.
ShallowFit fit_shallow_on_samples(const Matrix& x, const Matrix& y,
                                  const Vector& weights,
                                  const ActivationSpec& activation,
                                  const ShallowFitConfig& config);

}  // namespace uaplab
