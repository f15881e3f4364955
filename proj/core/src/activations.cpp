#include "uaplab/activations.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "uaplab/error.hpp"

namespace uaplab {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double sgn(double x) { return (x > 0.0) - (x < 0.0); }

double numeric_derivative(const std::function<double(double)>& f, double x,
                          bool left) {
  const double h = 1e-6 * std::max(1.0, std::abs(x));
  return left ? (f(x) - f(x - h)) / h : (f(x + h) - f(x)) / h;
}

// Index k of the table segment [xs[k], xs[k+1]] used at x; -1 and n-1 denote
// the left and right extrapolation rays.
long table_segment(const TableTerm& t, double x, bool left) {
  const auto& xs = t.xs;
  auto it = left ? std::lower_bound(xs.begin(), xs.end(), x)
                 : std::upper_bound(xs.begin(), xs.end(), x);
  return static_cast<long>(it - xs.begin()) - 1;
}

double table_slope(const TableTerm& t, long k) {
  const long n = static_cast<long>(t.xs.size());
  k = std::clamp<long>(k, 0, n - 2);
  return (t.ys[k + 1] - t.ys[k]) / (t.xs[k + 1] - t.xs[k]);
}

void validate_term(const Term& t) {
  std::visit(
      Overloaded{
          [](const AffineTerm& a) {
            if (!std::isfinite(a.slope) || !std::isfinite(a.intercept)) {
              throw Error(ErrorCode::kPrecondition, "affine term must be finite");
            }
          },
          [](const PowerTerm& p) {
            if (!(p.exponent > 0.0) || !std::isfinite(p.scale)) {
              throw Error(ErrorCode::kPrecondition,
                          "power term needs exponent > 0 and finite scale",
                          {{"exponent", p.exponent}, {"scale", p.scale}});
            }
          },
          [](const TableTerm& t) {
            if (t.xs.size() < 2 || t.xs.size() != t.ys.size()) {
              throw Error(ErrorCode::kPrecondition,
                          "table term needs >= 2 matching nodes");
            }
            for (std::size_t i = 1; i < t.xs.size(); ++i) {
              if (!(t.xs[i] > t.xs[i - 1])) {
                throw Error(ErrorCode::kPrecondition,
                            "table nodes must be strictly increasing",
                            {{"index", i}});
              }
            }
          },
          [](const CustomTerm& c) {
            if (!c.value) {
              throw Error(ErrorCode::kPrecondition, "custom term without a value map");
            }
          }},
      t);
}

}  // namespace

double term_value(const Term& t, double x) {
  return std::visit(
      Overloaded{
          [x](const AffineTerm& a) { return a.slope * x + a.intercept; },
          [x](const PowerTerm& p) {
            return p.scale * sgn(x) * std::pow(std::abs(x), p.exponent);
          },
          [x](const TableTerm& tb) {
            const long k = std::clamp<long>(table_segment(tb, x, false), 0,
                                            static_cast<long>(tb.xs.size()) - 2);
            return tb.ys[k] + table_slope(tb, k) * (x - tb.xs[k]);
          },
          [x](const CustomTerm& c) { return c.value(x); }},
      t);
}

double term_derivative(const Term& t, double x, bool left) {
  return std::visit(
      Overloaded{
          [](const AffineTerm& a) { return a.slope; },
          [x](const PowerTerm& p) {
            if (x == 0.0) {
              if (p.exponent > 1.0) return 0.0;
              if (p.exponent == 1.0) return p.scale;
              return p.scale * kInf;
            }
            return p.scale * p.exponent * std::pow(std::abs(x), p.exponent - 1.0);
          },
          [x, left](const TableTerm& tb) {
            return table_slope(tb, table_segment(tb, x, left));
          },
          [x, left](const CustomTerm& c) {
            return c.derivative ? c.derivative(x)
                                : numeric_derivative(c.value, x, left);
          }},
      t);
}

double Branch::value(double x) const {
  double s = 0.0;
  for (const auto& t : terms) s += term_value(t, x);
  return s;
}

double Branch::derivative(double x, bool left) const {
  double s = 0.0;
  for (const auto& t : terms) s += term_derivative(t, x, left);
  return s;
}

bool Branch::all_affine() const {
  return std::all_of(terms.begin(), terms.end(), [](const Term& t) {
    return std::holds_alternative<AffineTerm>(t);
  });
}

bool Branch::has_custom() const {
  return std::any_of(terms.begin(), terms.end(), [](const Term& t) {
    return std::holds_alternative<CustomTerm>(t);
  });
}

AffineTerm Branch::as_affine() const {
  AffineTerm out;
  for (const auto& t : terms) {
    const auto& a = std::get<AffineTerm>(t);
    out.slope += a.slope;
    out.intercept += a.intercept;
  }
  return out;
}

std::optional<std::vector<std::pair<double, double>>> asymptotic_expansion(
    const Branch& b, bool positive) {
  if (b.has_custom()) return std::nullopt;
  std::map<double, double, std::greater<>> coef;
  const double s = positive ? 1.0 : -1.0;
  for (const auto& t : b.terms) {
    std::visit(Overloaded{
                   [&](const AffineTerm& a) {
                     coef[1.0] += s * a.slope;
                     coef[0.0] += a.intercept;
                   },
                   [&](const PowerTerm& p) { coef[p.exponent] += s * p.scale; },
                   [&](const TableTerm& tb) {
                     const long n = static_cast<long>(tb.xs.size());
                     const long k = positive ? n - 2 : 0;
                     const long end = positive ? n - 1 : 0;
                     const double slope = table_slope(tb, k);
                     coef[1.0] += s * slope;
                     coef[0.0] += tb.ys[end] - slope * tb.xs[end];
                   },
                   [](const CustomTerm&) {}},
               t);
  }
  std::vector<std::pair<double, double>> out;
  for (const auto& [e, c] : coef) {
    if (c != 0.0) out.emplace_back(e, c);
  }
  return out;
}

std::optional<int> branch_direction(const Branch& b, double probe_radius) {
  // Analytic pass: classify each term as nondecreasing / nonincreasing.
  bool all_inc = true, all_dec = true, strict_inc = false, strict_dec = false;
  bool analytic = true;
  for (const auto& t : b.terms) {
    std::visit(Overloaded{
                   [&](const AffineTerm& a) {
                     if (a.slope > 0) { all_dec = false; strict_inc = true; }
                     if (a.slope < 0) { all_inc = false; strict_dec = true; }
                   },
                   [&](const PowerTerm& p) {
                     if (p.scale > 0) { all_dec = false; strict_inc = true; }
                     if (p.scale < 0) { all_inc = false; strict_dec = true; }
                   },
                   [&](const TableTerm& tb) {
                     bool any_pos = false, any_neg = false, any_flat = false;
                     for (std::size_t i = 1; i < tb.ys.size(); ++i) {
                       const double d = tb.ys[i] - tb.ys[i - 1];
                       any_pos |= d > 0;
                       any_neg |= d < 0;
                       any_flat |= d == 0;
                     }
                     if (any_pos) all_dec = false;
                     if (any_neg) all_inc = false;
                     if (any_pos && !any_neg && !any_flat) strict_inc = true;
                     if (any_neg && !any_pos && !any_flat) strict_dec = true;
                     if ((any_pos || any_neg) && any_flat) analytic = false;
                   },
                   [&](const CustomTerm&) { analytic = false; }},
               t);
  }
  if (analytic) {
    if (all_inc && all_dec) return 0;
    if (all_inc && strict_inc) return 1;
    if (all_dec && strict_dec) return -1;
  }

  // Sampled pass over the branch clipped to the probe window.
  const double lo = std::max(b.lo, -probe_radius);
  const double hi = std::min(b.hi, probe_radius);
  std::vector<double> xs;
  const int n = 4001;
  for (int i = 0; i < n; ++i) xs.push_back(lo + (hi - lo) * i / (n - 1));
  for (double t = 1e-6; t < probe_radius; t *= 1.2) {
    if (t > lo && t < hi) xs.push_back(t);
    if (-t > lo && -t < hi) xs.push_back(-t);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  bool inc = true, dec = true, flat = true;
  double prev = b.value(xs.front());
  for (std::size_t i = 1; i < xs.size(); ++i) {
    const double v = b.value(xs[i]);
    if (!(v > prev)) inc = false;
    if (!(v < prev)) dec = false;
    if (v != prev) flat = false;
    prev = v;
  }
  if (flat) return 0;
  if (inc) return 1;
  if (dec) return -1;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

struct ActivationSpec::Impl {
  std::string name;
  std::vector<Branch> branches;
  std::vector<double> breakpoints;
  bool numeric_only = false;
  int direction = 0;
  double lim_neg = 0.0;
  double lim_pos = 0.0;
};

namespace {

double branch_limit(const Branch& b, bool positive) {
  auto exp = asymptotic_expansion(b, positive);
  if (!exp) return b.value(positive ? 1e15 : -1e15);
  if (exp->empty()) return 0.0;
  const auto [e, c] = exp->front();
  if (e > 0.0) return c > 0 ? kInf : -kInf;
  return e == 0.0 ? c : 0.0;
}

}  // namespace

ActivationSpec::ActivationSpec(std::string name, std::vector<Branch> branches) {
  if (branches.empty()) {
    throw Error(ErrorCode::kPrecondition, "activation needs at least one branch");
  }
  if (branches.front().lo != -kInf || branches.back().hi != kInf) {
    throw Error(ErrorCode::kPrecondition, "branches must cover the real line");
  }
  auto impl = std::make_shared<Impl>();
  for (std::size_t i = 0; i < branches.size(); ++i) {
    const auto& b = branches[i];
    if (b.terms.empty()) {
      throw Error(ErrorCode::kPrecondition, "branch without terms", {{"branch", i}});
    }
    for (const auto& t : b.terms) validate_term(t);
    if (!(b.lo < b.hi)) {
      throw Error(ErrorCode::kPrecondition, "branch interval is empty",
                  {{"branch", i}});
    }
    impl->numeric_only |= b.has_custom();
    if (i == 0) continue;
    const auto& prev = branches[i - 1];
    if (prev.hi != b.lo) {
      throw Error(ErrorCode::kPrecondition, "branches must be contiguous",
                  {{"branch", i}, {"prev_hi", prev.hi}, {"lo", b.lo}});
    }
    const double left = prev.value(b.lo);
    const double right = b.value(b.lo);
    if (!(std::abs(left - right) <= 1e-9 * std::max(1.0, std::abs(right)))) {
      throw Error(ErrorCode::kPrecondition, "activation is discontinuous",
                  {{"breakpoint", b.lo}, {"left", left}, {"right", right}});
    }
    impl->breakpoints.push_back(b.lo);
  }
  impl->name = std::move(name);
  impl->branches = std::move(branches);

  int dir = 2;
  for (const auto& b : impl->branches) {
    const auto d = branch_direction(b);
    if (!d || *d == 0 || (dir != 2 && *d != dir)) {
      dir = 0;
      break;
    }
    dir = *d;
  }
  impl->direction = dir == 2 ? 0 : dir;
  impl->lim_neg = branch_limit(impl->branches.front(), false);
  impl->lim_pos = branch_limit(impl->branches.back(), true);
  impl_ = std::move(impl);
}

std::size_t ActivationSpec::branch_index(double x) const {
  const auto& bp = impl_->breakpoints;
  return static_cast<std::size_t>(std::upper_bound(bp.begin(), bp.end(), x) -
                                  bp.begin());
}

double ActivationSpec::operator()(double x) const {
  return impl_->branches[branch_index(x)].value(x);
}

Vector ActivationSpec::apply(const Vector& x) const {
  Vector y(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = (*this)(x[i]);
  return y;
}

double ActivationSpec::left_derivative(double x) const {
  std::size_t i = branch_index(x);
  if (i > 0 && x == impl_->branches[i].lo) --i;
  return impl_->branches[i].derivative(x, true);
}

double ActivationSpec::right_derivative(double x) const {
  return impl_->branches[branch_index(x)].derivative(x, false);
}

const std::string& ActivationSpec::name() const { return impl_->name; }
const std::vector<Branch>& ActivationSpec::branches() const {
  return impl_->branches;
}
std::vector<double> ActivationSpec::breakpoints() const {
  return impl_->breakpoints;
}
bool ActivationSpec::numeric_only() const { return impl_->numeric_only; }
int ActivationSpec::monotone_direction() const { return impl_->direction; }
double ActivationSpec::limit_at_neg_inf() const { return impl_->lim_neg; }
double ActivationSpec::limit_at_pos_inf() const { return impl_->lim_pos; }

// ---------------------------------------------------------------------------
// Inversion

namespace {

double bisect_branch(const Branch& b, double y, double lo, double hi, int dir) {
  // Expand infinite ends until the bracket holds y.
  auto below = [&](double x) { return dir * (b.value(x) - y) < 0.0; };
  if (!std::isfinite(lo)) {
    double step = 1.0;
    lo = std::isfinite(hi) ? hi - step : -step;
    while (!below(lo)) {
      step *= 2.0;
      lo = (std::isfinite(hi) ? hi : 0.0) - step;
      if (!std::isfinite(lo)) break;
    }
  }
  if (!std::isfinite(hi)) {
    double step = 1.0;
    hi = lo + step;
    while (below(hi)) {
      step *= 2.0;
      hi = lo + step;
      if (!std::isfinite(hi)) break;
    }
  }
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (below(mid) ? lo : hi) = mid;
  }
  return std::abs(b.value(lo) - y) <= std::abs(b.value(hi) - y) ? lo : hi;
}

}  // namespace

double invert(const ActivationSpec& sigma, double y) {
  const int dir = sigma.monotone_direction();
  if (dir == 0) {
    throw Error(ErrorCode::kPrecondition,
                "activation is not injective; inversion undefined",
                {{"activation", sigma.name()}});
  }
  if (!std::isfinite(y)) {
    throw Error(ErrorCode::kNonFinite, "cannot invert a non-finite value");
  }
  const double r_lo = std::min(sigma.limit_at_neg_inf(), sigma.limit_at_pos_inf());
  const double r_hi = std::max(sigma.limit_at_neg_inf(), sigma.limit_at_pos_inf());
  if (!(y > r_lo && y < r_hi)) {
    throw Error(ErrorCode::kOutOfRange, "value outside the range of the activation",
                {{"y", y}, {"range", {r_lo, r_hi}}, {"activation", sigma.name()}});
  }
  const auto& branches = sigma.branches();
  for (const auto& b : branches) {
    const double v_lo = std::isfinite(b.lo) ? b.value(b.lo)
                        : (dir > 0 ? r_lo : r_hi);
    const double v_hi = std::isfinite(b.hi) ? b.value(b.hi)
                        : (dir > 0 ? r_hi : r_lo);
    const double lo_v = std::min(v_lo, v_hi);
    const double hi_v = std::max(v_lo, v_hi);
    if (y < lo_v || y > hi_v) continue;
    if (b.all_affine()) {
      const AffineTerm a = b.as_affine();
      const double x = (y - a.intercept) / a.slope;
      return std::clamp(x, b.lo, b.hi);
    }
    return bisect_branch(b, y, b.lo, b.hi, dir);
  }
  // Only reachable through rounding at a breakpoint.
  throw Error(ErrorCode::kOutOfRange, "no branch attains the value", {{"y", y}});
}

// ---------------------------------------------------------------------------
// Constructions

namespace {

std::vector<Branch> restrict_to_nonneg(const ActivationSpec& s, const Term& extra) {
  std::vector<Branch> out;
  for (const auto& b : s.branches()) {
    if (b.hi <= 0.0) continue;
    Branch r{std::max(b.lo, 0.0), b.hi, b.terms};
    r.terms.push_back(extra);
    out.push_back(std::move(r));
  }
  return out;
}

void require_increasing_on_nonneg(const ActivationSpec& s) {
  for (const auto& b : s.branches()) {
    if (b.hi <= 0.0) continue;
    Branch r{std::max(b.lo, 0.0), b.hi, b.terms};
    const auto d = branch_direction(r);
    if (!d || *d != 1) {
      throw Error(ErrorCode::kPrecondition,
                  "sigma_tilde must be strictly increasing",
                  {{"sigma_tilde", s.name()}, {"branch_lo", r.lo}});
    }
  }
  if (std::abs(s(0.0)) > 1e-12) {
    throw Error(ErrorCode::kPrecondition, "sigma_tilde(0) must vanish",
                {{"sigma_tilde(0)", s(0.0)}});
  }
}

}  // namespace

ActivationSpec construct_transitive(const ActivationSpec& sigma_tilde,
                                    double alpha1, double alpha2) {
  if (!(alpha1 > 0.0 && alpha1 < 1.0)) {
    throw Error(ErrorCode::kPrecondition, "alpha1 must lie in (0, 1)",
                {{"alpha1", alpha1}});
  }
  if (!(alpha2 > 0.0) || !std::isfinite(alpha2)) {
    throw Error(ErrorCode::kPrecondition, "alpha2 must be positive",
                {{"alpha2", alpha2}});
  }
  require_increasing_on_nonneg(sigma_tilde);
  const double dl = sigma_tilde.left_derivative(0.0);
  const double dr = sigma_tilde.right_derivative(0.0);
  if (!std::isfinite(dl) || !std::isfinite(dr) ||
      std::abs(dl - dr) > 1e-9 * std::max(1.0, std::abs(dr))) {
    throw Error(ErrorCode::kPrecondition,
                "sigma_tilde must be differentiable at 0",
                {{"left_derivative", dl}, {"right_derivative", dr}});
  }
  if (std::abs(alpha2 - (dr - 1.0)) <= 1e-12 * std::max(1.0, std::abs(alpha2))) {
    throw Error(ErrorCode::kPrecondition,
                "alpha2 equals sigma_tilde'(0) - 1",
                {{"alpha2", alpha2}, {"sigma_tilde'(0)", dr}});
  }
  std::vector<Branch> branches;
  branches.push_back({-kInf, 0.0, {AffineTerm{alpha1, alpha2}}});
  for (auto& b : restrict_to_nonneg(sigma_tilde, AffineTerm{1.0, alpha2})) {
    branches.push_back(std::move(b));
  }
  return ActivationSpec("transitive(" + sigma_tilde.name() + ")", std::move(branches));
}

ActivationSpec construct_lp_transitive(const ActivationSpec& sigma_tilde,
                                       double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::kPrecondition, "alpha must lie in (0, 1)",
                {{"alpha", alpha}});
  }
  require_increasing_on_nonneg(sigma_tilde);
  if (sigma_tilde.limit_at_pos_inf() != kInf) {
    throw Error(ErrorCode::kPrecondition,
                "sigma_tilde must map [0, inf) onto [0, inf)",
                {{"limit", sigma_tilde.limit_at_pos_inf()}});
  }
  std::vector<Branch> branches;
  branches.push_back({-kInf, 0.0, {AffineTerm{alpha, 0.0}}});
  for (auto& b : restrict_to_nonneg(sigma_tilde, AffineTerm{1.0, 0.0})) {
    branches.push_back(std::move(b));
  }
  return ActivationSpec("lp_transitive(" + sigma_tilde.name() + ")",
                        std::move(branches));
}

// ---------------------------------------------------------------------------
// Built-ins and JSON

ActivationSpec builtin_activation(const std::string& name) {
  auto two_piece = [&](AffineTerm left, AffineTerm right) {
    return ActivationSpec(name, {{-kInf, 0.0, {left}}, {0.0, kInf, {right}}});
  };
  if (name == "relu") return two_piece({0.0, 0.0}, {1.0, 0.0});
  if (name == "leaky_shifted_paper") return two_piece({0.1, 0.1}, {1.1, 0.1});
  if (name == "leaky_rescaled_paper") return two_piece({0.1, 0.0}, {1.1, 0.0});
  if (name == "identity") return ActivationSpec(name, {{-kInf, kInf, {AffineTerm{1.0, 0.0}}}});
  if (name == "cube") return ActivationSpec(name, {{-kInf, kInf, {PowerTerm{1.0, 3.0}}}});
  throw Error(ErrorCode::kConfig, "unknown activation name",
              {{"fields", {"name"}}, {"value", name}, {"known", builtin_activation_names()}});
}

std::vector<std::string> builtin_activation_names() {
  return {"relu", "leaky_shifted_paper", "leaky_rescaled_paper", "identity", "cube"};
}

namespace {

nlohmann::json bound_json(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

nlohmann::json term_json(const Term& t) {
  return std::visit(
      Overloaded{
          [](const AffineTerm& a) -> nlohmann::json {
            return {{"affine", {{"a", a.slope}, {"b", a.intercept}}}};
          },
          [](const PowerTerm& p) -> nlohmann::json {
            return {{"power", {{"p", p.exponent}, {"scale", p.scale}}}};
          },
          [](const TableTerm& tb) -> nlohmann::json {
            return {{"table", {{"xs", tb.xs}, {"ys", tb.ys}}}};
          },
          [](const CustomTerm& c) -> nlohmann::json {
            throw Error(ErrorCode::kConfig, "custom terms are not serializable",
                        {{"label", c.label}});
          }},
      t);
}

Term term_from_json(const nlohmann::json& j) {
  if (j.contains("affine")) {
    const auto& a = j.at("affine");
    return AffineTerm{a.value("a", 0.0), a.value("b", 0.0)};
  }
  if (j.contains("power")) {
    const auto& p = j.at("power");
    return PowerTerm{p.value("scale", 1.0), p.value("p", 1.0)};
  }
  if (j.contains("table")) {
    const auto& t = j.at("table");
    return TableTerm{t.at("xs").get<std::vector<double>>(),
                     t.at("ys").get<std::vector<double>>()};
  }
  throw Error(ErrorCode::kConfig, "unknown branch kind",
              {{"fields", {"kind"}}, {"value", j}});
}

double bound_from_json(const nlohmann::json& j, const char* key, double dflt) {
  if (!j.contains(key) || j.at(key).is_null()) return dflt;
  return j.at(key).get<double>();
}

}  // namespace

nlohmann::json to_json(const ActivationSpec& s) {
  nlohmann::json branches = nlohmann::json::array();
  for (const auto& b : s.branches()) {
    nlohmann::json jb = {{"lo", bound_json(b.lo)}, {"hi", bound_json(b.hi)}};
    if (b.terms.size() == 1) {
      jb["kind"] = term_json(b.terms.front());
    } else {
      nlohmann::json terms = nlohmann::json::array();
      for (const auto& t : b.terms) terms.push_back(term_json(t));
      jb["terms"] = terms;
    }
    branches.push_back(jb);
  }
  return {{"name", s.name()}, {"branches", branches}};
}

ActivationSpec activation_from_json(const nlohmann::json& j) {
  if (j.is_string()) return builtin_activation(j.get<std::string>());
  if (!j.is_object()) {
    throw Error(ErrorCode::kConfig, "activation must be a name or an object");
  }
  if (!j.contains("branches")) {
    if (!j.contains("name")) {
      throw Error(ErrorCode::kConfig, "activation needs a name or branches",
                  {{"fields", {"name", "branches"}}});
    }
    return builtin_activation(j.at("name").get<std::string>());
  }
  std::vector<Branch> branches;
  for (const auto& jb : j.at("branches")) {
    Branch b{bound_from_json(jb, "lo", -kInf), bound_from_json(jb, "hi", kInf), {}};
    if (jb.contains("kind")) b.terms.push_back(term_from_json(jb.at("kind")));
    if (jb.contains("terms")) {
      for (const auto& jt : jb.at("terms")) b.terms.push_back(term_from_json(jt));
    }
    branches.push_back(std::move(b));
  }
  return ActivationSpec(j.value("name", std::string("custom")), std::move(branches));
}

}  // namespace uaplab
