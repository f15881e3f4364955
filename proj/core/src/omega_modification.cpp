#include "uaplab/omega_modification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "uaplab/error.hpp"

namespace uaplab {

void OmegaTransformParams::validate() const {
  nlohmann::json bad = nlohmann::json::array();
  if (!(a > 0.0) || !std::isfinite(a)) bad.push_back("a");
  if (!(b > 0.0) || !std::isfinite(b)) bad.push_back("b");
  if (!bad.empty()) {
    throw Error(ErrorCode::kPrecondition, "transform parameters must be positive",
                {{"fields", bad}, {"a", a}, {"b", b}});
  }
}

GridFunction bump_transform(const GridFunction& g, const OmegaTransformParams& p) {
  p.validate();
  const double a = p.a;
  const double b = p.b;
  const double root_b = std::sqrt(b);
  const Weight omega = p.omega;
  return GridFunction(g.dim_in(), g.dim_out(), [g, a, b, root_b, omega](const Vector& x) {
    const double r2 = x.squaredNorm();
    Vector out;
    if (r2 < b) {
      out = g(x) * std::exp(-b / (b - r2)) + Vector::Constant(g.dim_out(), a);
    } else {
      const double dist = std::sqrt(r2) - root_b;
      out = a * (-(g(x).cwiseAbs() * dist)).array().exp().matrix();
    }
    if (!omega.is_unit()) out *= omega(std::sqrt(r2)) + 1.0;
    return out;
  });
}

GridFunction phi_omega(const GridFunction& f, const Weight& omega) {
  return GridFunction(
      f.dim_in(), f.dim_out(),
      [f, omega](const Vector& x) -> Vector { return (omega(x.norm()) + 1.0) * f(x); },
      f.flagged_unbounded());
}

GridFunction psi_omega(const GridFunction& f, const Weight& omega) {
  return GridFunction(
      f.dim_in(), f.dim_out(),
      [f, omega](const Vector& x) -> Vector { return f(x) / (omega(x.norm()) + 1.0); },
      f.flagged_unbounded());
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const VanishingOptions& o) {
  return {{"fit", o.fit},
          {"max_width", o.max_width},
          {"tail_fraction", o.tail_fraction},
          {"rho", o.rho},
          {"initial_radius", o.initial_radius},
          {"radius_growth", o.radius_growth},
          {"max_radius", o.max_radius},
          {"measure_factor", o.measure_factor},
          {"measure_points", o.measure_points}};
}

VanishingOptions vanishing_options_from_json(const nlohmann::json& j) {
  VanishingOptions o;
  if (j.contains("fit")) o.fit = shallow_fit_from_json(j.at("fit"));
  o.max_width = j.value("max_width", o.max_width);
  o.tail_fraction = j.value("tail_fraction", o.tail_fraction);
  o.rho = j.value("rho", o.rho);
  o.initial_radius = j.value("initial_radius", o.initial_radius);
  o.radius_growth = j.value("radius_growth", o.radius_growth);
  o.max_radius = j.value("max_radius", o.max_radius);
  o.measure_factor = j.value("measure_factor", o.measure_factor);
  o.measure_points = j.value("measure_points", o.measure_points);
  nlohmann::json bad = nlohmann::json::array();
  if (o.max_width < o.fit.width) bad.push_back("max_width");
  if (!(o.tail_fraction > 0.0 && o.tail_fraction <= 0.5)) bad.push_back("tail_fraction");
  if (!(o.rho > 0.0 && o.rho < 1.0)) bad.push_back("rho");
  if (!(o.initial_radius > 0.0)) bad.push_back("initial_radius");
  if (!(o.radius_growth > 1.0)) bad.push_back("radius_growth");
  if (!(o.max_radius >= o.initial_radius)) bad.push_back("max_radius");
  if (!(o.measure_factor >= 1.0)) bad.push_back("measure_factor");
  if (o.measure_points < 3) bad.push_back("measure_points");
  if (!bad.empty()) throw Error(ErrorCode::kConfig, "invalid vanishing options", {{"fields", bad}});
  return o;
}

nlohmann::json to_json(const VanishingReport& r) {
  return {{"a", r.a},
          {"b", r.b},
          {"tail_radius", r.tail_radius},
          {"tail_sup", r.tail_sup},
          {"fit_radius", r.fit_radius},
          {"width", r.width},
          {"fit_residual", r.fit_residual},
          {"sup_error", r.sup_error},
          {"measure_radius", r.measure_radius},
          {"growth_guard", r.growth_guard},
          {"attempts", r.attempts}};
}

namespace {

int axis_points(int total, int m) {
  if (m == 1) return total;
  return std::max(51, static_cast<int>(std::lround(std::pow(total, 1.0 / m))));
}

// sup of ||f|| over lo <= ||x|| <= hi.
double shell_sup(const GridFunction& f, double lo, double hi, int points) {
  const GridSpec grid{f.dim_in(), f.dim_out(), axis_points(points, f.dim_in()), hi};
  double s = 0.0;
  grid.for_each_point([&](const Vector& x) {
    const double r = x.norm();
    if (r < lo || r > hi * (1.0 + 1e-12)) return;
    const double v = f(x).norm();
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kNonFinite, "non-finite sample during tail search",
                  {{"radius", r}});
    }
    s = std::max(s, v);
  });
  return s;
}

double sup_distance(const GridFunction& f, const GridFunction& g, double radius, int points) {
  const GridSpec grid{f.dim_in(), f.dim_out(), axis_points(points, f.dim_in()), radius};
  double s = 0.0;
  grid.for_each_point([&](const Vector& x) {
    const double v = (f(x) - g(x)).norm();
    s = std::max(s, std::isfinite(v) ? v : std::numeric_limits<double>::infinity());
  });
  return s;
}

}  // namespace

VanishingResult approximate_vanishing(const GridFunction& f, double eps,
                                      const ActivationSpec& activation,
                                      const VanishingOptions& opt) {
  if (!(eps > 0.0)) {
    throw Error(ErrorCode::kPrecondition, "eps must be positive", {{"eps", eps}});
  }
  const int m = f.dim_in();
  const int n = f.dim_out();
  VanishingReport rep;
  rep.a = 0.5 * eps;

  // Radius beyond which f stays below tail_fraction * eps.
  double radius = opt.initial_radius;
  while (true) {
    rep.tail_sup = shell_sup(f, radius, 2.0 * radius, 2001);
    if (rep.tail_sup < opt.tail_fraction * eps) break;
    radius *= opt.radius_growth;
    if (radius > opt.max_radius) {
      throw Error(ErrorCode::kTailSearchFailed, "function does not vanish within max radius",
                  {{"max_radius", opt.max_radius}, {"last_shell_sup", rep.tail_sup},
                   {"threshold", opt.tail_fraction * eps}});
    }
  }
  rep.tail_radius = radius;
  const double root_b = radius / opt.rho;
  rep.b = root_b * root_b;
  rep.fit_radius = opt.rho * root_b;
  rep.measure_radius = opt.measure_factor * root_b;
  const double b = rep.b;
  const double a = rep.a;

  // Training set: grid points in the fit ball, target (f - a) e^{b/(b-|x|^2)},
  // squared-error weights e^{-2b/(b-|x|^2)} so residuals are measured after
  // the bump factor.
  double last_residual = 0.0;
  double last_error = 0.0;
  for (int width = opt.fit.width; width <= opt.max_width; width *= 2) {
    ++rep.attempts;
    ShallowFitConfig cfg = opt.fit;
    cfg.width = width;
    cfg.fit_radius = rep.fit_radius;
    int ppa = std::max(cfg.points_per_axis, 2);
    while (std::pow(static_cast<double>(ppa), m) < 4.0 * width + 1.0) ++ppa;
    if (m == 1) ppa = std::max(ppa, 4 * width + 1);
    const GridSpec grid{m, n, ppa, rep.fit_radius};
    std::vector<Vector> xs;
    grid.for_each_point([&](const Vector& x) {
      if (x.norm() <= rep.fit_radius * (1.0 + 1e-12)) xs.push_back(x);
    });
    Matrix x(static_cast<Eigen::Index>(xs.size()), m);
    Matrix y(x.rows(), n);
    Vector w(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const Vector& p = xs[static_cast<std::size_t>(i)];
      const double expo = b / (b - p.squaredNorm());
      x.row(i) = p.transpose();
      y.row(i) = ((f(p).array() - a) * std::exp(expo)).matrix().transpose();
      w[i] = std::exp(-2.0 * expo);
    }
    const ShallowFit fit = fit_shallow_on_samples(x, y, w, activation, cfg);
    const GridFunction g_eps = fit.net.as_function();
    const GridFunction f_eps = bump_transform(g_eps, {a, b, Weight::unit()});
    last_residual = fit.sup_residual;
    last_error = sup_distance(f, f_eps, rep.measure_radius, opt.measure_points);
    if (last_error < eps) {
      rep.width = width;
      rep.fit_residual = fit.sup_residual;
      rep.sup_error = last_error;
      WeightedSupOptions wopt;
      wopt.max_radius = opt.guard_max_radius;
      const auto guard = weighted_sup_norm(
          g_eps, [](double t) { return std::expm1(t); },
          GridSpec{m, n, axis_points(2001, m), 1.0}, wopt);
      rep.growth_guard = guard.stabilized;
      return {f_eps, g_eps, rep};
    }
  }
  throw Error(ErrorCode::kFitBudgetExceeded, "vanishing approximation missed eps",
              {{"eps", eps}, {"sup_error", last_error}, {"fit_residual", last_residual},
               {"max_width", opt.max_width}, {"report", to_json(rep)}});
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const GrowthResult& r) {
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& c : r.candidates) {
    cands.push_back({{"omega", c.label},
                     {"weighted_norm", std::isfinite(c.weighted_norm) ? nlohmann::json(c.weighted_norm)
                                                                      : nlohmann::json("inf")},
                     {"stabilized", c.stabilized},
                     {"outcome", c.outcome}});
  }
  return {{"selected", r.selected},
          {"candidates", cands},
          {"vanishing", to_json(r.vanishing)},
          {"weighted_error", r.weighted_error},
          {"measure_radius", r.measure_radius}};
}

GrowthResult approximate_growth(const GridFunction& f, const WeightFamily& family, double eps,
                                const ActivationSpec& activation,
                                const VanishingOptions& options, double measure_radius) {
  family.validate();
  const int m = f.dim_in();
  const int n = f.dim_out();
  GrowthResult out{GridFunction::zero(m, n), "", {}, {}, 0.0, measure_radius};
  const GridSpec grid{m, n, axis_points(2001, m), 1.0};
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < family.weights.size(); ++i) {
    const Weight& w = family.weights[i];
    const auto res = weighted_sup_norm(f, [&w](double t) { return w(t); }, grid);
    out.candidates.push_back({w.label, res.value, res.stabilized, ""});
    if (res.stabilized) order.push_back(i);
  }
  if (order.empty()) {
    nlohmann::json flags = nlohmann::json::array();
    for (const auto& c : out.candidates) {
      flags.push_back({{"omega", c.label}, {"diverged", !c.stabilized}});
    }
    throw Error(ErrorCode::kNoControllingWeight, "no weight in the family controls f",
                {{"weights", flags}});
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return out.candidates[i].weighted_norm < out.candidates[j].weighted_norm;
  });

  const GridSpec measure{m, n, axis_points(6001, m), measure_radius};
  auto weighted_error = [&](const GridFunction& approx, const Weight& w) {
    double s = 0.0;
    measure.for_each_point([&](const Vector& x) {
      s = std::max(s, (f(x) - approx(x)).norm() / (w(x.norm()) + 1.0));
    });
    return s;
  };

  nlohmann::json failures = nlohmann::json::array();
  for (std::size_t idx : order) {
    const Weight& w = family.weights[idx];
    auto& cand = out.candidates[idx];
    if (cand.weighted_norm == 0.0) {
      cand.outcome = "selected";
      out.selected = w.label;
      out.approximant = GridFunction::zero(m, n);
      out.weighted_error = weighted_error(out.approximant, w);
      return out;
    }
    try {
      const VanishingResult v = approximate_vanishing(psi_omega(f, w), eps, activation, options);
      cand.outcome = "selected";
      out.selected = w.label;
      out.approximant = phi_omega(v.f_eps, w);
      out.vanishing = v.report;
      out.weighted_error = weighted_error(out.approximant, w);
      return out;
    } catch (const Error& e) {
      cand.outcome = std::string(to_string(e.code()));
      failures.push_back({{"omega", w.label}, {"error", e.to_json()}});
    }
  }
  throw Error(ErrorCode::kNoControllingWeight,
              "no controlling weight yields a vanishing approximation",
              {{"failures", failures}});
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const LimitationReport& r) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : r.samples) {
    samples.push_back({{"label", s.label},
                       {"unbounded", s.unbounded},
                       {"sup_error", std::isfinite(s.sup_error) ? nlohmann::json(s.sup_error)
                                                                : nlohmann::json("inf")}});
  }
  return {{"best_c", r.best_c},
          {"best_error", r.best_error},
          {"radius", r.radius},
          {"c_points", r.c_points},
          {"samples", samples}};
}

LimitationReport demonstrate_limitation(
    const std::vector<std::pair<std::string, GridFunction>>& samples, int dim_in, int dim_out,
    double radius, int points, double c_lo, double c_hi, int c_points) {
  if (c_points < 2 || !(c_hi > c_lo)) {
    throw Error(ErrorCode::kPrecondition, "need c_points >= 2 and c_lo < c_hi");
  }
  const GridFunction target = GridFunction::radial(dim_in, dim_out, [](double t) { return std::exp(-t); });
  const GridSpec grid{dim_in, dim_out, axis_points(points, dim_in), radius};
  std::vector<Vector> values;
  std::vector<Vector> xs;
  grid.for_each_point([&](const Vector& x) {
    xs.push_back(x);
    values.push_back(target(x));
  });

  LimitationReport rep;
  rep.radius = radius;
  rep.c_points = c_points;
  rep.best_error = std::numeric_limits<double>::infinity();
  for (int k = 0; k < c_points; ++k) {
    const double c = c_lo + (c_hi - c_lo) * k / (c_points - 1);
    double err = 0.0;
    for (const auto& v : values) err = std::max(err, (v.array() - c).matrix().norm());
    if (err < rep.best_error) {
      rep.best_error = err;
      rep.best_c = c;
    }
  }
  for (const auto& [label, g] : samples) {
    LimitationSample s{label, g.flagged_unbounded(), std::numeric_limits<double>::infinity()};
    if (!s.unbounded) {
      double err = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        err = std::max(err, (values[i] - g(xs[i])).norm());
      }
      s.sup_error = err;
    }
    rep.samples.push_back(s);
  }
  return rep;
}

}  // namespace uaplab
