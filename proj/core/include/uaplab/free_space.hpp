#pragma once

#include <utility>
#include <vector>

#include "uaplab/function_space.hpp"

namespace uaplab {

/// Signed indicator: I_[0,r) for r > 0, -I_[r,0) for r < 0, zero for r = 0.
GridFunction eta(double r);

/// ||eta(r) - eta(s)||_1, computed from the step structure.
double eta_l1_distance(double r, double s);

/// L1 distance of two scalar functions on [lo, hi] by the midpoint rule with
/// `intervals` cells, refined so every entry of `breakpoints` is a cell edge.
double l1_distance_piecewise(const GridFunction& f, const GridFunction& g, double lo, double hi,
                             int intervals, std::vector<double> breakpoints = {});

/// Finite formal sum sum_i alpha_i delta_{f_i}.
struct FormalCombination {
  int dim_in = 1;
  int dim_out = 1;
  std::vector<std::pair<double, GridFunction>> atoms;

  void validate() const;
  void add(double alpha, GridFunction f);
  FormalCombination scaled(double c) const;
  static FormalCombination single(GridFunction f);
};

FormalCombination operator+(const FormalCombination& a, const FormalCombination& b);

/// Barycenter: the pointwise sum sum_i alpha_i f_i.
GridFunction rho(const FormalCombination& c);

}  // namespace uaplab
