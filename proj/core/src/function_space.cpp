#include "uaplab/function_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "uaplab/error.hpp"

namespace uaplab {

namespace {

nlohmann::json point_json(const Vector& x) {
  return std::vector<double>(x.data(), x.data() + x.size());
}

void check_same_shape(const GridFunction& f, const GridFunction& g) {
  if (f.dim_in() != g.dim_in() || f.dim_out() != g.dim_out()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "functions have different shapes",
                {{"f", {f.dim_in(), f.dim_out()}},
                 {"g", {g.dim_in(), g.dim_out()}}});
  }
}

// Odometer over the integer cube [-n, n]^m.
template <typename Visit>
void for_each_lattice_point(int m, long n, Visit&& visit) {
  std::vector<long> idx(static_cast<std::size_t>(m), -n);
  while (true) {
    visit(idx);
    int d = m - 1;
    while (d >= 0 && idx[d] == n) {
      idx[d] = -n;
      --d;
    }
    if (d < 0) return;
    ++idx[d];
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// GridFunction

GridFunction::GridFunction(int dim_in, int dim_out, Eval eval, bool unbounded)
    : dim_in_(dim_in),
      dim_out_(dim_out),
      eval_(std::make_shared<const Eval>(std::move(eval))),
      unbounded_(unbounded) {
  if (dim_in < 1 || dim_out < 1) {
    throw Error(ErrorCode::kDimensionMismatch, "dimensions must be positive",
                {{"dim_in", dim_in}, {"dim_out", dim_out}});
  }
}

Vector GridFunction::operator()(const Vector& x) const {
  if (x.size() != dim_in_) {
    throw Error(ErrorCode::kDimensionMismatch, "input has wrong dimension",
                {{"expected", dim_in_}, {"got", x.size()}});
  }
  return (*eval_)(x);
}

double GridFunction::scalar(double x) const {
  Vector v(1);
  v[0] = x;
  return (*this)(v)[0];
}

GridFunction GridFunction::constant(int dim_in, Vector value) {
  const int n = static_cast<int>(value.size());
  return GridFunction(dim_in, n, [value = std::move(value)](const Vector&) {
    return value;
  });
}

GridFunction GridFunction::zero(int dim_in, int dim_out) {
  return constant(dim_in, Vector::Zero(dim_out));
}

GridFunction GridFunction::from_scalar(std::function<double(double)> f,
                                       bool unbounded) {
  return GridFunction(
      1, 1,
      [f = std::move(f)](const Vector& x) {
        Vector y(1);
        y[0] = f(x[0]);
        return y;
      },
      unbounded);
}

GridFunction GridFunction::radial(int dim_in, int dim_out,
                                  std::function<double(double)> profile) {
  return GridFunction(dim_in, dim_out,
                      [dim_out, profile = std::move(profile)](const Vector& x) {
                        return Vector::Constant(dim_out, profile(x.norm()));
                      });
}

GridFunction operator+(const GridFunction& f, const GridFunction& g) {
  check_same_shape(f, g);
  return GridFunction(
      f.dim_in(), f.dim_out(),
      [f, g](const Vector& x) -> Vector { return f(x) + g(x); },
      f.flagged_unbounded() || g.flagged_unbounded());
}

GridFunction operator-(const GridFunction& f, const GridFunction& g) {
  check_same_shape(f, g);
  return GridFunction(
      f.dim_in(), f.dim_out(),
      [f, g](const Vector& x) -> Vector { return f(x) - g(x); },
      f.flagged_unbounded() || g.flagged_unbounded());
}

GridFunction operator*(double c, const GridFunction& f) {
  return GridFunction(
      f.dim_in(), f.dim_out(),
      [c, f](const Vector& x) -> Vector { return c * f(x); },
      f.flagged_unbounded() && c != 0.0);
}

// ---------------------------------------------------------------------------
// GridSpec

void GridSpec::validate() const {
  nlohmann::json bad = nlohmann::json::array();
  if (dim_in < 1) bad.push_back("dim_in");
  if (dim_out < 1) bad.push_back("dim_out");
  if (points_per_axis < 2) bad.push_back("points_per_axis");
  if (!(radius > 0.0) || !std::isfinite(radius)) bad.push_back("radius");
  if (!bad.empty()) {
    throw Error(ErrorCode::kConfig, "invalid grid specification",
                {{"fields", bad}});
  }
}

double GridSpec::spacing() const {
  return 2.0 * radius / static_cast<double>(points_per_axis - 1);
}

std::size_t GridSpec::size() const {
  std::size_t n = 1;
  for (int i = 0; i < dim_in; ++i) n *= static_cast<std::size_t>(points_per_axis);
  return n;
}

int GridSpec::points_per_unit() const {
  return std::max(1, static_cast<int>(std::lround(1.0 / spacing())));
}

void GridSpec::for_each_point(
    const std::function<void(const Vector&)>& visit) const {
  validate();
  const double h = spacing();
  const int n = points_per_axis;
  std::vector<int> idx(static_cast<std::size_t>(dim_in), 0);
  Vector x(dim_in);
  // Symmetric construction keeps the origin exact for odd point counts.
  auto coord = [&](int i) {
    const int mid2 = 2 * i - (n - 1);  // twice the offset from the centre
    return 0.5 * mid2 * h;
  };
  while (true) {
    for (int d = 0; d < dim_in; ++d) x[d] = coord(idx[d]);
    visit(x);
    int d = dim_in - 1;
    while (d >= 0 && idx[d] == n - 1) {
      idx[d] = 0;
      --d;
    }
    if (d < 0) return;
    ++idx[d];
  }
}

GridSpec GridSpec::cube(int dim_in, int dim_out, double radius,
                        int points_per_axis) {
  GridSpec g{dim_in, dim_out, points_per_axis, radius};
  g.validate();
  return g;
}

void to_json(nlohmann::json& j, const GridSpec& g) {
  j = {{"dim_in", g.dim_in},
       {"dim_out", g.dim_out},
       {"points_per_axis", g.points_per_axis},
       {"radius", g.radius}};
}

void from_json(const nlohmann::json& j, GridSpec& g) {
  g.dim_in = j.value("dim_in", 1);
  g.dim_out = j.value("dim_out", 1);
  g.points_per_axis = j.value("points_per_axis", 401);
  g.radius = j.value("radius", 1.0);
  g.validate();
}

// ---------------------------------------------------------------------------
// Measure1D

Measure1D::Measure1D(Kind kind, std::vector<double> params)
    : kind_(kind), params_(std::move(params)) {}

Measure1D Measure1D::gaussian(double mean, double stddev, double mass) {
  if (!(stddev > 0.0) || !(mass > 0.0)) {
    throw Error(ErrorCode::kPrecondition,
                "gaussian measure needs positive stddev and mass",
                {{"stddev", stddev}, {"mass", mass}});
  }
  Measure1D m(Kind::kGaussian, {mean, stddev, mass});
  m.mass_ = mass;
  return m;
}

Measure1D Measure1D::uniform_window(double lo, double hi, double height) {
  if (!(hi > lo) || !(height > 0.0)) {
    throw Error(ErrorCode::kPrecondition,
                "uniform window needs lo < hi and positive height",
                {{"lo", lo}, {"hi", hi}, {"height", height}});
  }
  Measure1D m(Kind::kUniformWindow, {lo, hi, height});
  m.mass_ = (hi - lo) * height;
  return m;
}

Measure1D Measure1D::custom_table(std::vector<double> xs,
                                  std::vector<double> densities) {
  if (xs.size() < 2 || xs.size() != densities.size()) {
    throw Error(ErrorCode::kPrecondition,
                "density table needs >= 2 matching nodes");
  }
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (densities[i] < 0.0 || !std::isfinite(densities[i]) ||
        (i > 0 && !(xs[i] > xs[i - 1]))) {
      throw Error(ErrorCode::kPrecondition,
                  "density table must be increasing in x and nonnegative",
                  {{"index", i}});
    }
  }
  Measure1D m(Kind::kCustomTable, {});
  m.table_cdf_.assign(xs.size(), 0.0);
  for (std::size_t i = 1; i < xs.size(); ++i) {
    m.table_cdf_[i] = m.table_cdf_[i - 1] +
                      0.5 * (densities[i] + densities[i - 1]) * (xs[i] - xs[i - 1]);
  }
  m.mass_ = m.table_cdf_.back();
  if (!(m.mass_ > 0.0)) {
    throw Error(ErrorCode::kPrecondition, "density table has zero mass");
  }
  m.table_xs_ = std::move(xs);
  m.table_ds_ = std::move(densities);
  return m;
}

double Measure1D::density(double x) const {
  switch (kind_) {
    case Kind::kGaussian: {
      const double z = (x - params_[0]) / params_[1];
      return params_[2] * std::exp(-0.5 * z * z) /
             (params_[1] * std::sqrt(2.0 * std::numbers::pi));
    }
    case Kind::kUniformWindow:
      return (x >= params_[0] && x <= params_[1]) ? params_[2] : 0.0;
    case Kind::kCustomTable: {
      if (x < table_xs_.front() || x > table_xs_.back()) return 0.0;
      auto it = std::upper_bound(table_xs_.begin(), table_xs_.end(), x);
      std::size_t i = std::min<std::size_t>(
          static_cast<std::size_t>(it - table_xs_.begin()), table_xs_.size() - 1);
      if (i == 0) i = 1;
      const double t = (x - table_xs_[i - 1]) / (table_xs_[i] - table_xs_[i - 1]);
      return (1.0 - t) * table_ds_[i - 1] + t * table_ds_[i];
    }
  }
  return 0.0;
}

double Measure1D::cdf(double x) const {
  switch (kind_) {
    case Kind::kGaussian: {
      const double z = (x - params_[0]) / params_[1];
      return params_[2] * 0.5 * std::erfc(-z / std::numbers::sqrt2);
    }
    case Kind::kUniformWindow:
      return params_[2] * std::clamp(x - params_[0], 0.0, params_[1] - params_[0]);
    case Kind::kCustomTable: {
      if (x <= table_xs_.front()) return 0.0;
      if (x >= table_xs_.back()) return mass_;
      auto it = std::upper_bound(table_xs_.begin(), table_xs_.end(), x);
      const std::size_t i = static_cast<std::size_t>(it - table_xs_.begin());
      const double x0 = table_xs_[i - 1];
      return table_cdf_[i - 1] + 0.5 * (table_ds_[i - 1] + density(x)) * (x - x0);
    }
  }
  return 0.0;
}

double Measure1D::quantile(double u) const {
  if (!(u > 0.0 && u < 1.0)) {
    throw Error(ErrorCode::kOutOfRange, "quantile level must lie in (0, 1)",
                {{"u", u}});
  }
  switch (kind_) {
    case Kind::kGaussian: {
      const boost::math::normal_distribution<double> nd(params_[0], params_[1]);
      return boost::math::quantile(nd, u);
    }
    case Kind::kUniformWindow:
      return params_[0] + u * (params_[1] - params_[0]);
    case Kind::kCustomTable: {
      const double target = u * mass_;
      double lo = table_xs_.front();
      double hi = table_xs_.back();
      for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (cdf(mid) < target ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    }
  }
  return 0.0;
}

void to_json(nlohmann::json& j, const Measure1D& m) {
  switch (m.kind()) {
    case Measure1D::Kind::kGaussian:
      j = {{"density_kind", "gaussian"},
           {"params",
            {{"mean", m.params()[0]}, {"stddev", m.params()[1]}, {"mass", m.params()[2]}}}};
      return;
    case Measure1D::Kind::kUniformWindow:
      j = {{"density_kind", "uniform_window"},
           {"params",
            {{"lo", m.params()[0]}, {"hi", m.params()[1]}, {"height", m.params()[2]}}}};
      return;
    case Measure1D::Kind::kCustomTable: {
      // Reconstruct the table by sampling the knots.
      throw Error(ErrorCode::kConfig, "custom_table measures are input-only");
    }
  }
}

Measure1D measure_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("density_kind")) {
    throw Error(ErrorCode::kConfig, "measure needs a density_kind",
                {{"fields", {"density_kind"}}});
  }
  const std::string kind = j.at("density_kind").get<std::string>();
  const nlohmann::json p = j.value("params", nlohmann::json::object());
  if (kind == "gaussian") {
    return Measure1D::gaussian(p.value("mean", 0.0), p.value("stddev", 1.0),
                               p.value("mass", 1.0));
  }
  if (kind == "uniform_window") {
    return Measure1D::uniform_window(p.value("lo", -1.0), p.value("hi", 1.0),
                                     p.value("height", 1.0));
  }
  if (kind == "custom_table") {
    return Measure1D::custom_table(p.at("xs").get<std::vector<double>>(),
                                   p.at("density").get<std::vector<double>>());
  }
  throw Error(ErrorCode::kConfig, "unknown density_kind",
              {{"fields", {"density_kind"}}, {"value", kind}});
}

// ---------------------------------------------------------------------------
// Weights

double Weight::operator()(double t) const {
  switch (kind) {
    case Kind::kUnit: return 1.0;
    case Kind::kPower: return std::pow(t, param);
    case Kind::kMaxTPower: return std::max(t, std::pow(t, param));
    case Kind::kExpDecay: return std::exp(-param * t);
    case Kind::kCustom: return custom(t);
  }
  return 1.0;
}

Weight Weight::unit() { return {Kind::kUnit, 0.0, "1", {}}; }

Weight Weight::power(double i) {
  std::ostringstream os;
  os << "t^" << i;
  return {Kind::kPower, i, os.str(), {}};
}

Weight Weight::max_t_power(double i) {
  std::ostringstream os;
  os << "max(t,t^" << i << ")";
  return {Kind::kMaxTPower, i, os.str(), {}};
}

Weight Weight::exp_decay(double k) {
  std::ostringstream os;
  os << "exp(-" << k << "t)";
  return {Kind::kExpDecay, k, os.str(), {}};
}

Weight Weight::custom_weight(std::string label, std::function<double(double)> f) {
  return {Kind::kCustom, 0.0, std::move(label), std::move(f)};
}

bool WeightFamily::contains_unit() const {
  return std::any_of(weights.begin(), weights.end(), [](const Weight& w) {
    return w.is_unit() || (w.kind == Weight::Kind::kExpDecay && w.param == 0.0) ||
           (w.kind == Weight::Kind::kPower && w.param == 0.0);
  });
}

void WeightFamily::validate() const {
  if (weights.empty()) {
    throw Error(ErrorCode::kConfig, "weight family must be nonempty",
                {{"fields", {"weights"}}});
  }
}

void to_json(nlohmann::json& j, const Weight& w) {
  switch (w.kind) {
    case Weight::Kind::kUnit: j = {{"kind", "unit"}}; return;
    case Weight::Kind::kPower: j = {{"kind", "power"}, {"i", w.param}}; return;
    case Weight::Kind::kMaxTPower: j = {{"kind", "max_t_power"}, {"i", w.param}}; return;
    case Weight::Kind::kExpDecay: j = {{"kind", "exp_decay"}, {"k", w.param}}; return;
    case Weight::Kind::kCustom: j = {{"kind", "custom"}, {"label", w.label}}; return;
  }
}

Weight weight_from_json(const nlohmann::json& j) {
  // Accepts {"kind": "power", "i": 2}, {"power": {"i": 2}} and "unit".
  if (j.is_string()) {
    if (j.get<std::string>() == "unit") return Weight::unit();
    throw Error(ErrorCode::kConfig, "unknown weight", {{"value", j}});
  }
  std::string kind;
  nlohmann::json p = j;
  if (j.contains("kind")) {
    kind = j.at("kind").get<std::string>();
  } else if (j.is_object() && j.size() == 1) {
    kind = j.begin().key();
    p = j.begin().value();
  }
  if (kind == "unit") return Weight::unit();
  if (kind == "power") return Weight::power(p.at("i").get<double>());
  if (kind == "max_t_power") return Weight::max_t_power(p.at("i").get<double>());
  if (kind == "exp_decay") return Weight::exp_decay(p.at("k").get<double>());
  throw Error(ErrorCode::kConfig, "unknown weight kind", {{"value", j}});
}

void to_json(nlohmann::json& j, const WeightFamily& w) {
  j = nlohmann::json::array();
  for (const auto& x : w.weights) j.push_back(x);
}

WeightFamily weight_family_from_json(const nlohmann::json& j) {
  WeightFamily fam;
  if (!j.is_array()) {
    throw Error(ErrorCode::kConfig, "weight family must be a JSON array");
  }
  for (const auto& e : j) fam.weights.push_back(weight_from_json(e));
  fam.validate();
  return fam;
}

// ---------------------------------------------------------------------------
// Metrics

DuccResult d_ucc(const GridFunction& f, const GridFunction& g, int terms,
                 const GridSpec& grid) {
  check_same_shape(f, g);
  if (terms < 1) {
    throw Error(ErrorCode::kPrecondition, "d_ucc needs at least one term",
                {{"terms", terms}});
  }
  grid.validate();
  const int m = f.dim_in();
  const long ppu = grid.points_per_unit();
  const long n = static_cast<long>(terms) * ppu;

  std::vector<double> shell_sup(static_cast<std::size_t>(terms) + 1, 0.0);
  Vector x(m);
  for_each_lattice_point(m, n, [&](const std::vector<long>& idx) {
    long max_abs = 0;
    for (int d = 0; d < m; ++d) {
      max_abs = std::max(max_abs, std::labs(idx[d]));
      x[d] = static_cast<double>(idx[d]) / static_cast<double>(ppu);
    }
    const long k = std::max<long>(1, (max_abs + ppu - 1) / ppu);
    const double dist = (f(x) - g(x)).norm();
    if (!std::isfinite(dist)) {
      throw Error(ErrorCode::kNonFinite, "non-finite sample in d_ucc",
                  {{"point", point_json(x)}});
    }
    auto& s = shell_sup[static_cast<std::size_t>(k)];
    s = std::max(s, dist);
  });

  DuccResult r;
  r.cube_sups.reserve(static_cast<std::size_t>(terms));
  double running = 0.0;
  double scale = 0.5;
  for (int k = 1; k <= terms; ++k) {
    running = std::max(running, shell_sup[static_cast<std::size_t>(k)]);
    r.cube_sups.push_back(running);
    r.value += scale * running / (1.0 + running);
    scale *= 0.5;
  }
  r.truncation_bound = std::ldexp(1.0, -terms);
  return r;
}

GridSpec default_ducc_grid(int dim_in, int dim_out) {
  // 401 points over [-1, 1] is 200 points per unit length.
  return GridSpec{dim_in, dim_out, 401, 1.0};
}

double lp_norm(const GridFunction& f, const std::vector<Measure1D>& mu,
               double p, int quad_nodes) {
  if (!(p >= 1.0)) {
    throw Error(ErrorCode::kPrecondition, "lp_norm needs p >= 1", {{"p", p}});
  }
  if (quad_nodes < 1) {
    throw Error(ErrorCode::kPrecondition, "need at least one quadrature node");
  }
  const int m = f.dim_in();
  if (static_cast<int>(mu.size()) != m) {
    throw Error(ErrorCode::kDimensionMismatch,
                "one measure per input axis is required",
                {{"dim_in", m}, {"measures", mu.size()}});
  }
  if (m > 2) {
    throw Error(ErrorCode::kPrecondition,
                "product-measure quadrature supports m <= 2", {{"dim_in", m}});
  }

  std::vector<std::vector<double>> nodes(static_cast<std::size_t>(m));
  double weight = 1.0;
  for (int d = 0; d < m; ++d) {
    auto& axis = nodes[static_cast<std::size_t>(d)];
    axis.resize(static_cast<std::size_t>(quad_nodes));
    for (int i = 0; i < quad_nodes; ++i) {
      axis[static_cast<std::size_t>(i)] =
          mu[static_cast<std::size_t>(d)].quantile((i + 0.5) / quad_nodes);
    }
    weight *= mu[static_cast<std::size_t>(d)].total_mass() / quad_nodes;
  }

  double sum = 0.0;
  Vector x(m);
  auto accumulate = [&]() {
    const double v = f(x).norm();
    const double term = (p == 1.0) ? v : std::pow(v, p);
    if (!std::isfinite(term)) {
      throw Error(ErrorCode::kNonFinite, "non-integrable sample in lp_norm",
                  {{"point", point_json(x)}});
    }
    sum += term;
  };
  if (m == 1) {
    for (double a : nodes[0]) {
      x[0] = a;
      accumulate();
    }
  } else {
    for (double a : nodes[0]) {
      for (double b : nodes[1]) {
        x[0] = a;
        x[1] = b;
        accumulate();
      }
    }
  }
  sum *= weight;
  if (!std::isfinite(sum)) {
    throw Error(ErrorCode::kNonFinite, "lp_norm quadrature sum overflowed");
  }
  return (p == 1.0) ? sum : std::pow(sum, 1.0 / p);
}

SupResult sup_norm_on_ball(const GridFunction& f, double radius,
                           const GridSpec& grid) {
  if (!(radius > 0.0)) {
    throw Error(ErrorCode::kPrecondition, "radius must be positive",
                {{"radius", radius}});
  }
  GridSpec g = grid;
  g.dim_in = f.dim_in();
  g.dim_out = f.dim_out();
  g.radius = radius;
  SupResult r;
  r.argmax = Vector::Zero(f.dim_in());
  const double limit = radius * (1.0 + 1e-12);
  g.for_each_point([&](const Vector& x) {
    if (x.norm() > limit) return;
    const double v = f(x).norm();
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kNonFinite, "non-finite sample in sup norm",
                  {{"point", point_json(x)}});
    }
    if (v > r.value) {
      r.value = v;
      r.argmax = x;
    }
  });
  return r;
}

WeightedSupResult weighted_sup_norm(const GridFunction& f,
                                    const std::function<double(double)>& omega,
                                    const GridSpec& grid,
                                    const WeightedSupOptions& opts) {
  WeightedSupResult r;
  GridSpec g = grid;
  g.dim_in = f.dim_in();
  g.dim_out = f.dim_out();
  int calm_steps = 0;
  double radius = opts.initial_radius;
  bool first = true;
  while (radius <= opts.max_radius * (1.0 + 1e-12)) {
    g.radius = radius;
    double current = 0.0;
    bool overflow = false;
    g.for_each_point([&](const Vector& x) {
      const double t = x.norm();
      if (t > radius * (1.0 + 1e-12)) return;
      const double v = f(x).norm() / (omega(t) + 1.0);
      if (!std::isfinite(v)) {
        overflow = true;
        return;
      }
      current = std::max(current, v);
    });
    r.radius_reached = radius;
    if (overflow) {
      r.value = std::numeric_limits<double>::infinity();
      r.stabilized = false;
      return r;
    }
    const double previous = r.value;
    r.value = std::max(r.value, current);
    if (!first) {
      const double increment = r.value - previous;
      const double scale = std::max(previous, 1e-300);
      if (increment <= opts.rel_tolerance * scale) {
        ++calm_steps;
      } else {
        calm_steps = 0;
      }
      if (calm_steps >= opts.patience) {
        r.stabilized = true;
        return r;
      }
    }
    first = false;
    radius *= opts.growth;
  }
  r.stabilized = false;
  return r;
}

}  // namespace uaplab
