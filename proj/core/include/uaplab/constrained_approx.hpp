#pragma once

#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uaplab/depth_dynamics.hpp"
#include "uaplab/function_space.hpp"
#include "uaplab/network.hpp"

namespace uaplab {

/// F: C(R^m, R^n) -> [0, inf) with an open constraint F(g) < threshold.
struct ConstraintFunctional {
  std::string label;
  double threshold = 1.0;
  std::function<double(const GridFunction&)> eval;
  /// Source description for serialization.
  nlohmann::json spec = nlohmann::json::object();
};

/// sup_{|x| <= radius} ||g(x)|| on a grid.
ConstraintFunctional sup_on_ball_constraint(double radius, double threshold,
                                            int points_per_axis = 401);
/// ||g(point)||
ConstraintFunctional abs_at_point_constraint(Vector point, double threshold);
/// {"kind": "sup_on_ball", "radius", "C"} or {"kind": "abs_at_point", "point", "C"}.
ConstraintFunctional constraint_from_json(const nlohmann::json& j);

struct ConstrainedFitOptions {
  ShallowFitConfig fit{128, 1.0, 0, 1e-10, 801};
  int max_width = 4096;
  double blend_margin = 1.0;
  int verify_terms = 20;
  GridSpec verify_grid = default_ducc_grid();
  /// Fraction of the distance budget left after the tail the fit may use.
  double budget_fraction = 0.9;
  int max_n = 10000;
  /// Extra tightening rounds when a constraint fails after fitting.
  int max_retries = 3;
  /// Post-fit constraint check uses F < (1 - guard_band) C.
  double guard_band = 0.01;
  /// Least-squares weight of training points outside the k0 cube and the
  /// escaped box.
  double shell_weight = 1e-3;
};

nlohmann::json to_json(const ConstrainedFitOptions& o);
ConstrainedFitOptions constrained_options_from_json(const nlohmann::json& j);

struct ConstraintValue {
  std::string label;
  double value = 0.0;
  double threshold = 0.0;
  bool satisfied = false;
};

struct ConstrainedNetReport {
  FeedForwardNet full_net;
  FeedForwardNet final_segment;
  /// Index of the first layer of the final segment (= number of frozen layers).
  int split_index = 0;
  int n_frozen = 0;
  int k0 = 0;
  double d_prescribed = 0.0;
  double d_target = 0.0;
  double fit_residual = 0.0;
  std::vector<long> sparsity_per_frozen_layer;
  std::vector<int> widths;
  /// m + n + 2, reported, not enforced.
  int width_bound = 0;
  bool width_bound_met = false;
  std::vector<ConstraintValue> constraints;
};

nlohmann::json to_json(const ConstrainedNetReport& r);

/// Deep net whose final segment stays within delta of f_hat while the whole
/// net is within eps of f; the first N layers are frozen copies of
/// s.(I x + b).
ConstrainedNetReport assemble_prescribed(const GridFunction& f_hat, const GridFunction& f,
                                         double eps, double delta,
                                         const CompositionOperator& op,
                                         const ConstrainedFitOptions& options = {});

/// As above with the final segment seeded at the witness f0 and required to
/// satisfy every constraint F_i(segment) < C_i.
ConstrainedNetReport assemble_constrained(const std::vector<ConstraintFunctional>& constraints,
                                          const GridFunction& f0, const GridFunction& f,
                                          double eps, const CompositionOperator& op,
                                          const ConstrainedFitOptions& options = {});

}  // namespace uaplab
