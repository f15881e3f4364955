#include "uaplab/free_space.hpp"

#include <algorithm>
#include <cmath>

#include "uaplab/error.hpp"

namespace uaplab {

GridFunction eta(double r) {
  if (!std::isfinite(r)) {
    throw Error(ErrorCode::kNonFinite, "eta needs a finite argument", {{"r", r}});
  }
  return GridFunction::from_scalar([r](double x) {
    if (r > 0.0) return (x >= 0.0 && x < r) ? 1.0 : 0.0;
    if (r < 0.0) return (x >= r && x < 0.0) ? -1.0 : 0.0;
    return 0.0;
  });
}

double eta_l1_distance(double r, double s) {
  // eta(r) - eta(s) is +-1 exactly on the half-open interval between r and s.
  const double lo = std::min(r, s);
  const double hi = std::max(r, s);
  return hi - lo;
}

double l1_distance_piecewise(const GridFunction& f, const GridFunction& g, double lo, double hi,
                             int intervals, std::vector<double> breakpoints) {
  if (f.dim_in() != 1 || g.dim_in() != 1 || f.dim_out() != g.dim_out()) {
    throw Error(ErrorCode::kDimensionMismatch, "piecewise L1 distance needs matching m = 1 functions");
  }
  if (!(hi > lo) || intervals < 1) {
    throw Error(ErrorCode::kPrecondition, "bad integration window",
                {{"lo", lo}, {"hi", hi}, {"intervals", intervals}});
  }
  std::vector<double> edges;
  edges.reserve(static_cast<std::size_t>(intervals) + breakpoints.size() + 1);
  const double h = (hi - lo) / intervals;
  for (int i = 0; i <= intervals; ++i) edges.push_back(i == intervals ? hi : lo + i * h);
  for (double b : breakpoints) {
    if (b > lo && b < hi) edges.push_back(b);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  double total = 0.0;
  Vector x(1);
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const double w = edges[i + 1] - edges[i];
    x(0) = 0.5 * (edges[i] + edges[i + 1]);
    total += w * (f(x) - g(x)).lpNorm<1>();
  }
  return total;
}

void FormalCombination::validate() const {
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const auto& [alpha, f] = atoms[i];
    if (!std::isfinite(alpha)) {
      throw Error(ErrorCode::kNonFinite, "formal combination weight is not finite",
                  {{"index", i}, {"alpha", alpha}});
    }
    if (f.dim_in() != dim_in || f.dim_out() != dim_out) {
      throw Error(ErrorCode::kDimensionMismatch, "atom shape differs from the combination",
                  {{"index", i}});
    }
  }
}

void FormalCombination::add(double alpha, GridFunction f) {
  if (atoms.empty()) {
    dim_in = f.dim_in();
    dim_out = f.dim_out();
  }
  atoms.emplace_back(alpha, std::move(f));
  validate();
}

FormalCombination FormalCombination::scaled(double c) const {
  FormalCombination out = *this;
  for (auto& atom : out.atoms) atom.first *= c;
  return out;
}

FormalCombination FormalCombination::single(GridFunction f) {
  FormalCombination c;
  c.add(1.0, std::move(f));
  return c;
}

FormalCombination operator+(const FormalCombination& a, const FormalCombination& b) {
  if (a.atoms.empty()) return b;
  if (b.atoms.empty()) return a;
  FormalCombination out = a;
  for (const auto& atom : b.atoms) out.add(atom.first, atom.second);
  return out;
}

GridFunction rho(const FormalCombination& c) {
  c.validate();
  const auto atoms = c.atoms;
  const int n = c.dim_out;
  return GridFunction(c.dim_in, n, [atoms, n](const Vector& x) {
    Vector out = Vector::Zero(n);
    for (const auto& [alpha, f] : atoms) out += alpha * f(x);
    return out;
  });
}

}  // namespace uaplab
