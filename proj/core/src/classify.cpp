#include <algorithm>
#include <cmath>
#include <functional>

#include "uaplab/activations.hpp"
#include "uaplab/error.hpp"

namespace uaplab {

namespace {

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

// Below this |h| at a tangential minimum we cannot tell a double root from a
// near miss.
constexpr double kTangentTolerance = 1e-9;

std::vector<double> branch_samples(double lo, double hi, int n) {
  std::vector<double> xs;
  xs.reserve(static_cast<std::size_t>(n) + 256);
  for (int i = 0; i < n; ++i) xs.push_back(lo + (hi - lo) * i / (n - 1));
  for (double t = 1e-6; t < std::max(std::abs(lo), std::abs(hi)); t *= 1.2) {
    if (t > lo && t < hi) xs.push_back(t);
    if (-t > lo && -t < hi) xs.push_back(-t);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  return xs;
}

double bisect_root(const std::function<double(double)>& h, double a, double b) {
  double ha = h(a);
  for (int it = 0; it < 2000; ++it) {
    const double m = 0.5 * (a + b);
    if (m <= a || m >= b) break;
    const double hm = h(m);
    if (hm == 0.0) return m;
    if (sign_of(hm) == sign_of(ha)) {
      a = m;
      ha = hm;
    } else {
      b = m;
    }
  }
  return std::abs(h(a)) <= std::abs(h(b)) ? a : b;
}

// Minimizes s*h on [a, b] by golden-section search; returns the argmin.
double golden_min(const std::function<double(double)>& g, double a, double b) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - r * (b - a);
  double d = a + r * (b - a);
  double gc = g(c), gd = g(d);
  for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++it) {
    if (gc < gd) {
      b = d;
      d = c;
      gd = gc;
      c = b - r * (b - a);
      gc = g(c);
    } else {
      a = c;
      c = d;
      gc = gd;
      d = a + r * (b - a);
      gd = g(d);
    }
  }
  return gc < gd ? c : d;
}

// Finite sampling window for a branch: the whole branch when bounded, else
// clipped at the search radius.
std::pair<double, double> window(const Branch& b, double radius) {
  const double lo = std::isfinite(b.lo) ? b.lo : std::min(-radius, b.hi - 1.0);
  const double hi = std::isfinite(b.hi) ? b.hi : std::max(radius, b.lo + 1.0);
  return {lo, hi};
}

double interval_representative(double lo, double hi) {
  if (std::isfinite(lo)) return std::isfinite(hi) && hi - lo < 2.0 ? 0.5 * (lo + hi) : lo + 1.0;
  if (std::isfinite(hi)) return hi - 1.0;
  return 0.0;
}

// Given f(m) strictly beyond both f(a) and f(c) on the same side, returns a
// pair of distinct points with (numerically) equal values.
std::pair<double, double> pair_around_extremum(const std::function<double(double)>& f,
                                               double a, double m, double c) {
  const double ya = f(a), ym = f(m), yc = f(c);
  if (std::abs(ya - ym) <= std::abs(yc - ym)) {
    auto g = [&](double x) { return f(x) - ya; };
    return {a, bisect_root(g, m, c)};
  }
  auto g = [&](double x) { return f(x) - yc; };
  return {bisect_root(g, a, m), c};
}

std::pair<double, double> injectivity_pair(const ActivationSpec& sigma,
                                           const std::vector<std::optional<int>>& dirs,
                                           double radius) {
  const auto& br = sigma.branches();
  auto f = [&](double x) { return sigma(x); };
  for (std::size_t i = 0; i < br.size(); ++i) {
    if (dirs[i] && *dirs[i] == 0) {
      const auto& b = br[i];
      if (std::isfinite(b.lo)) return {b.lo, b.lo + std::min(1.0, 0.5 * (b.hi - b.lo))};
      if (std::isfinite(b.hi)) return {b.hi - 2.0, b.hi - 1.0};
      return {0.0, 1.0};
    }
    if (!dirs[i]) {
      const auto [lo, hi] = window(br[i], radius);
      const auto xs = branch_samples(lo, hi, 4001);
      for (std::size_t k = 1; k + 1 < xs.size(); ++k) {
        const double d1 = br[i].value(xs[k]) - br[i].value(xs[k - 1]);
        const double d2 = br[i].value(xs[k + 1]) - br[i].value(xs[k]);
        if (sign_of(d1) * sign_of(d2) < 0) {
          return pair_around_extremum(f, xs[k - 1], xs[k], xs[k + 1]);
        }
        if (d1 == 0.0) return {xs[k - 1], xs[k]};
      }
    }
  }
  for (std::size_t i = 1; i < br.size(); ++i) {
    if (dirs[i - 1] && dirs[i] && *dirs[i - 1] != *dirs[i]) {
      const double p = br[i].lo;
      const double hl = std::isfinite(br[i - 1].lo) ? std::min(1.0, 0.5 * (p - br[i - 1].lo)) : 1.0;
      const double hr = std::isfinite(br[i].hi) ? std::min(1.0, 0.5 * (br[i].hi - p)) : 1.0;
      return pair_around_extremum(f, p - hl, p, p + hr);
    }
  }
  throw Error(ErrorCode::kInconclusive, "could not locate an injectivity violation",
              {{"activation", sigma.name()}});
}

struct FixedPointScan {
  std::vector<double> roots;
  std::optional<std::pair<double, double>> interval;
  bool positive = false;
  bool negative = false;

  void record(int s) {
    positive |= s > 0;
    negative |= s < 0;
  }
};

void scan_affine_branch(const Branch& b, FixedPointScan& scan) {
  const AffineTerm a = b.as_affine();
  const double s = a.slope - 1.0;
  const double c = a.intercept;
  if (s == 0.0) {
    if (c == 0.0) {
      if (!scan.interval) scan.interval = std::make_pair(b.lo, b.hi);
    } else {
      scan.record(sign_of(c));
    }
    return;
  }
  const double root = -c / s;
  // h(x) = s (x - root)
  if (b.contains(root)) scan.roots.push_back(root);
  if (root > b.lo) scan.record(-sign_of(s));
  if (root < b.hi) scan.record(sign_of(s));
}

void scan_sampled_branch(const Branch& b, double radius, int n, FixedPointScan& scan) {
  auto h = [&](double x) { return b.value(x) - x; };
  const auto [lo, hi] = window(b, radius);
  const auto xs = branch_samples(lo, hi, n);
  std::vector<double> hs(xs.size());
  bool all_zero = true;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    hs[i] = h(xs[i]);
    if (!std::isfinite(hs[i])) {
      throw Error(ErrorCode::kNonFinite, "activation is non-finite at a sample",
                  {{"x", xs[i]}});
    }
    all_zero &= hs[i] == 0.0;
  }
  if (all_zero) {
    if (!scan.interval) scan.interval = std::make_pair(b.lo, b.hi);
    return;
  }
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const bool inside = b.contains(xs[i]);
    if (hs[i] == 0.0) {
      if (inside) scan.roots.push_back(xs[i]);
      continue;
    }
    if (inside) scan.record(sign_of(hs[i]));
    if (i + 1 < xs.size() && hs[i + 1] != 0.0 && sign_of(hs[i]) != sign_of(hs[i + 1])) {
      const double r = bisect_root(h, xs[i], xs[i + 1]);
      if (b.contains(r)) scan.roots.push_back(r);
    }
    if (i > 0 && i + 1 < xs.size() && sign_of(hs[i - 1]) == sign_of(hs[i]) &&
        sign_of(hs[i + 1]) == sign_of(hs[i]) && std::abs(hs[i]) < std::abs(hs[i - 1]) &&
        std::abs(hs[i]) <= std::abs(hs[i + 1])) {
      const int s = sign_of(hs[i]);
      auto g = [&](double x) { return s * h(x); };
      const double xm = golden_min(g, xs[i - 1], xs[i + 1]);
      const double gm = g(xm);
      const double tol = kTangentTolerance * std::max(1.0, std::abs(xm));
      if (gm < 0.0) {
        scan.record(-s);
        for (auto [p, q] : {std::pair{xs[i - 1], xm}, std::pair{xm, xs[i + 1]}}) {
          const double r = bisect_root(h, p, q);
          if (b.contains(r)) scan.roots.push_back(r);
        }
      } else if (gm == 0.0) {
        if (b.contains(xm)) scan.roots.push_back(xm);
      } else if (gm < tol) {
        throw Error(ErrorCode::kInconclusive,
                    "sign of sigma(x) - x unresolved near a tangential minimum",
                    {{"interval", {xs[i - 1], xs[i + 1]}}, {"min_abs", gm}});
      }
    }
  }

  // Tails beyond the window.
  for (bool positive : {false, true}) {
    const double edge = positive ? b.hi : b.lo;
    if (std::isfinite(edge)) continue;
    const double x_end = positive ? xs.back() : xs.front();
    const int end_sign = sign_of(h(x_end));
    int asym = 0;
    if (auto exp = asymptotic_expansion(b, positive)) {
      auto terms = *exp;
      bool merged = false;
      for (auto& [e, c] : terms) {
        if (e == 1.0) {
          c += positive ? -1.0 : 1.0;
          merged = true;
        }
      }
      if (!merged) terms.emplace_back(1.0, positive ? -1.0 : 1.0);
      std::sort(terms.begin(), terms.end(), std::greater<>());
      for (const auto& [e, c] : terms) {
        if (c != 0.0) {
          asym = sign_of(c);
          break;
        }
      }
    } else {
      asym = end_sign;
    }
    scan.record(asym);
    if (asym == 0 || end_sign == 0 || asym == end_sign) continue;
    double a = x_end;
    double step = std::max(1.0, std::abs(x_end));
    double far = a;
    while (true) {
      far = a + (positive ? step : -step);
      if (!std::isfinite(far) || sign_of(h(far)) != end_sign) break;
      a = far;
      step *= 2.0;
    }
    if (std::isfinite(far)) scan.roots.push_back(bisect_root(h, std::min(a, far), std::max(a, far)));
  }
}

}  // namespace

std::string_view to_string(TransitivityVerdict::Kind k) {
  switch (k) {
    case TransitivityVerdict::Kind::kTransitive: return "Transitive";
    case TransitivityVerdict::Kind::kLpTransitiveOnly: return "LpTransitiveOnly";
    case TransitivityVerdict::Kind::kNotTransitive: return "NotTransitive";
  }
  return "?";
}

std::string_view to_string(Dominance d) {
  switch (d) {
    case Dominance::kAbove: return "above";
    case Dominance::kBelow: return "below";
    case Dominance::kMixed: return "mixed";
  }
  return "?";
}

nlohmann::json to_json(const TransitivityVerdict& v) {
  nlohmann::json j = {{"kind", to_string(v.kind)},
                      {"dominance", to_string(v.dominance)},
                      {"injective", v.injective},
                      {"fixed_points", v.fixed_points},
                      {"numeric_only", v.numeric_only}};
  j["witness"] = v.witness ? nlohmann::json(*v.witness) : nlohmann::json(nullptr);
  if (v.witness_pair) j["witness_pair"] = {v.witness_pair->first, v.witness_pair->second};
  if (v.fixed_interval) {
    auto bound = [](double x) {
      return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
    };
    j["fixed_interval"] = {bound(v.fixed_interval->first), bound(v.fixed_interval->second)};
  }
  return j;
}

TransitivityVerdict classify(const ActivationSpec& sigma, double search_radius,
                             const GridSpec& grid) {
  if (!(search_radius > 0.0)) {
    throw Error(ErrorCode::kPrecondition, "search_radius must be positive",
                {{"search_radius", search_radius}});
  }
  TransitivityVerdict v;
  v.numeric_only = sigma.numeric_only();
  const auto& br = sigma.branches();

  std::vector<std::optional<int>> dirs;
  for (const auto& b : br) dirs.push_back(branch_direction(b, search_radius));
  v.injective = std::all_of(dirs.begin(), dirs.end(), [&](const auto& d) {
    return d && *d != 0 && *d == *dirs.front();
  });
  if (!v.injective) v.witness_pair = injectivity_pair(sigma, dirs, search_radius);

  FixedPointScan scan;
  const int n = std::max(grid.points_per_axis, 16);
  for (const auto& b : br) {
    if (b.all_affine()) {
      scan_affine_branch(b, scan);
    } else {
      scan_sampled_branch(b, search_radius, n, scan);
    }
  }
  std::sort(scan.roots.begin(), scan.roots.end());
  scan.roots.erase(std::unique(scan.roots.begin(), scan.roots.end(),
                               [](double a, double b) {
                                 return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a));
                               }),
                   scan.roots.end());
  for (double& r : scan.roots) r += 0.0;  // -0 -> +0
  v.fixed_points = scan.roots;
  v.fixed_interval = scan.interval;

  if (scan.positive && !scan.negative) {
    v.dominance = Dominance::kAbove;
  } else if (scan.negative && !scan.positive) {
    v.dominance = Dominance::kBelow;
  }

  using Kind = TransitivityVerdict::Kind;
  const bool no_fixed = scan.roots.empty() && !scan.interval;
  if (v.injective && no_fixed && v.dominance != Dominance::kMixed) {
    v.kind = Kind::kTransitive;
    return v;
  }
  // Finitely many fixed points, sigma above the diagonal elsewhere.
  if (v.injective && !scan.interval && v.dominance == Dominance::kAbove) {
    v.kind = Kind::kLpTransitiveOnly;
    v.witness = scan.roots.front();
    return v;
  }
  v.kind = Kind::kNotTransitive;
  if (scan.interval) {
    v.witness = interval_representative(scan.interval->first, scan.interval->second);
  } else if (!scan.roots.empty()) {
    v.witness = scan.roots.front();
  } else if (v.witness_pair) {
    v.witness = v.witness_pair->first;
  } else {
    throw Error(ErrorCode::kInconclusive,
                "sign of sigma(x) - x is mixed but no fixed point was located",
                {{"interval", {-search_radius, search_radius}}});
  }
  return v;
}

}  // namespace uaplab
