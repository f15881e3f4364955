#include "uaplab/constrained_approx.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "uaplab/error.hpp"

namespace uaplab {

ConstraintFunctional sup_on_ball_constraint(double radius, double threshold, int points) {
  if (!(radius > 0.0) || !(threshold > 0.0)) {
    throw Error(ErrorCode::kPrecondition, "constraint needs positive radius and threshold",
                {{"radius", radius}, {"C", threshold}});
  }
  ConstraintFunctional c;
  c.label = "sup_on_ball(" + std::to_string(radius) + ")";
  c.threshold = threshold;
  c.eval = [radius, points](const GridFunction& g) {
    return sup_norm_on_ball(g, radius, GridSpec{g.dim_in(), g.dim_out(), points, radius}).value;
  };
  c.spec = {{"kind", "sup_on_ball"}, {"radius", radius}, {"C", threshold}};
  return c;
}

ConstraintFunctional abs_at_point_constraint(Vector point, double threshold) {
  if (!(threshold > 0.0)) {
    throw Error(ErrorCode::kPrecondition, "constraint threshold must be positive",
                {{"C", threshold}});
  }
  ConstraintFunctional c;
  c.label = "abs_at_point";
  c.threshold = threshold;
  c.spec = {{"kind", "abs_at_point"},
            {"point", std::vector<double>(point.data(), point.data() + point.size())},
            {"C", threshold}};
  c.eval = [point = std::move(point)](const GridFunction& g) { return g(point).norm(); };
  return c;
}

ConstraintFunctional constraint_from_json(const nlohmann::json& j) {
  const std::string kind = j.value("kind", std::string());
  if (!j.contains("C")) {
    throw Error(ErrorCode::kConfig, "constraint needs a threshold C", {{"fields", {"C"}}});
  }
  const double c = j.at("C").get<double>();
  if (kind == "sup_on_ball") return sup_on_ball_constraint(j.value("radius", 1.0), c);
  if (kind == "abs_at_point") {
    const auto p = j.at("point").get<std::vector<double>>();
    return abs_at_point_constraint(Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size())), c);
  }
  throw Error(ErrorCode::kConfig, "unknown constraint kind", {{"fields", {"kind"}}, {"value", kind}});
}

nlohmann::json to_json(const ConstrainedFitOptions& o) {
  return {{"fit", o.fit},
          {"max_width", o.max_width},
          {"blend_margin", o.blend_margin},
          {"verify_terms", o.verify_terms},
          {"verify_grid", o.verify_grid},
          {"budget_fraction", o.budget_fraction},
          {"max_N", o.max_n},
          {"max_retries", o.max_retries},
          {"guard_band", o.guard_band},
          {"shell_weight", o.shell_weight}};
}

ConstrainedFitOptions constrained_options_from_json(const nlohmann::json& j) {
  ConstrainedFitOptions o;
  if (j.contains("fit")) o.fit = shallow_fit_from_json(j.at("fit"));
  o.max_width = j.value("max_width", o.max_width);
  o.blend_margin = j.value("blend_margin", o.blend_margin);
  o.verify_terms = j.value("verify_terms", o.verify_terms);
  if (j.contains("verify_grid")) o.verify_grid = j.at("verify_grid").get<GridSpec>();
  o.budget_fraction = j.value("budget_fraction", o.budget_fraction);
  o.max_n = j.value("max_N", o.max_n);
  o.max_retries = j.value("max_retries", o.max_retries);
  o.guard_band = j.value("guard_band", o.guard_band);
  o.shell_weight = j.value("shell_weight", o.shell_weight);
  nlohmann::json bad = nlohmann::json::array();
  if (o.max_width < o.fit.width) bad.push_back("max_width");
  if (!(o.blend_margin > 0.0)) bad.push_back("blend_margin");
  if (o.verify_terms < 1) bad.push_back("verify_terms");
  if (!(o.budget_fraction > 0.0 && o.budget_fraction <= 1.0)) bad.push_back("budget_fraction");
  if (o.max_n < 1) bad.push_back("max_N");
  if (o.max_retries < 0) bad.push_back("max_retries");
  if (!(o.guard_band >= 0.0 && o.guard_band < 1.0)) bad.push_back("guard_band");
  if (!(o.shell_weight > 0.0 && o.shell_weight <= 1.0)) bad.push_back("shell_weight");
  if (!bad.empty()) throw Error(ErrorCode::kConfig, "invalid assembly options", {{"fields", bad}});
  return o;
}

nlohmann::json to_json(const ConstrainedNetReport& r) {
  nlohmann::json cons = nlohmann::json::array();
  for (const auto& c : r.constraints) {
    cons.push_back({{"label", c.label},
                    {"value", c.value},
                    {"C", c.threshold},
                    {"satisfied", c.satisfied}});
  }
  return {{"full_net", to_json(r.full_net)},
          {"split_index", r.split_index},
          {"N_frozen", r.n_frozen},
          {"k0", r.k0},
          {"d_prescribed", r.d_prescribed},
          {"d_target", r.d_target},
          {"fit_residual", r.fit_residual},
          {"sparsity_per_frozen_layer", r.sparsity_per_frozen_layer},
          {"widths", r.widths},
          {"width_bound", r.width_bound},
          {"width_bound_met", r.width_bound_met},
          {"constraints", cons}};
}

namespace {

void check_inputs(const GridFunction& f_hat, const GridFunction& f, double eps, double delta,
                  const CompositionOperator& op) {
  if (f_hat.dim_in() != f.dim_in() || f_hat.dim_out() != f.dim_out() ||
      f.dim_in() != op.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "functions and operator disagree in shape",
                {{"f_hat", {f_hat.dim_in(), f_hat.dim_out()}},
                 {"f", {f.dim_in(), f.dim_out()}},
                 {"operator_dim", op.dim()}});
  }
  if (!(eps > 0.0) || !(delta > 0.0)) {
    throw Error(ErrorCode::kPrecondition, "eps and delta must be positive",
                {{"eps", eps}, {"delta", delta}});
  }
  if (!op.identity_matrix()) {
    throw Error(ErrorCode::kPrecondition, "frozen layers require A = I");
  }
  if (op.verdict().kind != TransitivityVerdict::Kind::kTransitive) {
    throw Error(ErrorCode::kPrecondition, "activation is not transitive",
                {{"activation", op.activation().name()}, {"verdict", to_json(op.verdict())}});
  }
}

ConstrainedNetReport build_report(const ShallowFit& fit, const CompositionOperator& op, int n,
                                  int k0, const GridFunction& f_hat, const GridFunction& f,
                                  const ConstrainedFitOptions& opt) {
  std::vector<FrontLayer> frozen(static_cast<std::size_t>(n), op.as_layer());
  FeedForwardNet full = stack(fit.net, frozen);
  GridSpec grid = opt.verify_grid;
  grid.dim_in = f.dim_in();
  grid.dim_out = f.dim_out();
  ConstrainedNetReport r{full, fit.net, n, n, k0, 0.0, 0.0, fit.sup_residual, {}, {}, 0, false, {}};
  r.d_prescribed = d_ucc(f_hat, fit.net.as_function(), opt.verify_terms, grid).value;
  r.d_target = d_ucc(f, full.as_function(), opt.verify_terms, grid).value;
  for (int i = 0; i < n; ++i) {
    r.sparsity_per_frozen_layer.push_back(sparsity(full.layers()[static_cast<std::size_t>(i)]).nnz_matrix);
  }
  r.widths = full.widths();
  r.width_bound = f.dim_in() + f.dim_out() + 2;
  r.width_bound_met = true;
  for (std::size_t i = static_cast<std::size_t>(n) + 1; i + 1 < r.widths.size(); ++i) {
    if (r.widths[i] > r.width_bound) r.width_bound_met = false;
  }
  return r;
}

bool in_box(const Vector& x, const Box& box) {
  return (x.array() >= box.lo.array()).all() && (x.array() <= box.hi.array()).all();
}

// Fits the final segment to `h` over the cube of `fit_radius`. Only the k0
// cube and the escaped box enter the distances before the tail, so points
// elsewhere get `shell_weight` in the least-squares problem and are left out
// of the residual checked against `budget`. Doubles the width until both
// distances pass.
ConstrainedNetReport fit_segment(const GridFunction& h, double fit_radius,
                                 const std::optional<Box>& box, double budget, int n, int k0,
                                 const GridFunction& f_hat, const GridFunction& f, double eps,
                                 double delta, const CompositionOperator& op,
                                 const ConstrainedFitOptions& opt) {
  const int m = h.dim_in();
  int ppa = opt.fit.points_per_axis;
  if (m == 1) {
    // Keep the training grid at least as fine as the verification lattice.
    const int per_unit = std::max(opt.verify_grid.points_per_unit(), 1);
    ppa = std::max(ppa, static_cast<int>(std::ceil(2.0 * fit_radius * per_unit)) + 1);
  }
  const GridSpec grid{m, h.dim_out(), ppa, fit_radius};
  const Eigen::Index p = static_cast<Eigen::Index>(grid.size());
  Matrix xs(p, m);
  Matrix ys(p, h.dim_out());
  Vector weights(p);
  std::vector<Eigen::Index> core;
  Eigen::Index row = 0;
  grid.for_each_point([&](const Vector& x) {
    xs.row(row) = x.transpose();
    ys.row(row) = h(x).transpose();
    const bool inside = x.cwiseAbs().maxCoeff() <= k0 || (box && in_box(x, *box));
    weights(row) = inside ? 1.0 : opt.shell_weight;
    if (inside) core.push_back(row);
    ++row;
  });

  nlohmann::json attempts = nlohmann::json::array();
  for (int width = opt.fit.width; width <= opt.max_width; width *= 2) {
    ShallowFitConfig cfg = opt.fit;
    cfg.width = width;
    cfg.fit_radius = fit_radius;
    cfg.points_per_axis = ppa;
    ShallowFit fit = fit_shallow_on_samples(xs, ys, weights, op.activation(), cfg);
    double residual = 0.0;
    for (Eigen::Index i : core) {
      residual = std::max(residual, (fit.net.eval(xs.row(i).transpose()) - ys.row(i).transpose()).norm());
    }
    fit.sup_residual = residual;
    attempts.push_back({{"width", width}, {"fit_residual", residual}});
    if (!(residual < budget)) continue;
    ConstrainedNetReport r = build_report(fit, op, n, k0, f_hat, f, opt);
    attempts.back()["d_prescribed"] = r.d_prescribed;
    attempts.back()["d_target"] = r.d_target;
    if (r.d_prescribed < delta && r.d_target < eps) return r;
  }
  throw Error(ErrorCode::kFitBudgetExceeded, "final segment fit exceeded its budget",
              {{"budget", budget}, {"attempts", attempts}, {"eps", eps}, {"delta", delta}});
}

}  // namespace

ConstrainedNetReport assemble_prescribed(const GridFunction& f_hat, const GridFunction& f,
                                         double eps, double delta,
                                         const CompositionOperator& op,
                                         const ConstrainedFitOptions& opt) {
  check_inputs(f_hat, f, eps, delta, op);
  const int k0 = tail_cutoff(eps, delta);
  const double tail = std::ldexp(1.0, -k0);
  GridSpec grid = opt.verify_grid;
  grid.dim_in = f.dim_in();
  grid.dim_out = f.dim_out();

  // Degenerate case: f_hat already approximates f, no frozen layers needed.
  const DuccResult direct = d_ucc(f_hat, f, opt.verify_terms, grid);
  if (direct.upper_bound() < 0.5 * eps) {
    const double budget = opt.budget_fraction * (std::min(delta, 0.5 * eps) - tail);
    if (budget > 0.0) {
      try {
        return fit_segment(f_hat, k0 + opt.blend_margin, std::nullopt, budget, 0, k0, f_hat, f,
                           eps, delta, op, opt);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kFitBudgetExceeded) throw;
      }
    }
  }

  const EscapeBlend blend = escape_blend(op, f_hat, f, k0, opt.blend_margin, opt.max_n);
  const double extent = std::max(blend.box.hi.cwiseAbs().maxCoeff(), blend.box.lo.cwiseAbs().maxCoeff());
  const double fit_radius = std::max(static_cast<double>(k0), extent) + opt.blend_margin;
  const double budget = opt.budget_fraction * (std::min(eps, delta) - tail);
  return fit_segment(blend.g_tilde, fit_radius, blend.box, budget, blend.n, k0, f_hat, f, eps,
                     delta, op, opt);
}

ConstrainedNetReport assemble_constrained(const std::vector<ConstraintFunctional>& constraints,
                                          const GridFunction& f0, const GridFunction& f,
                                          double eps, const CompositionOperator& op,
                                          const ConstrainedFitOptions& opt) {
  for (const auto& c : constraints) {
    if (!c.eval) throw Error(ErrorCode::kPrecondition, "constraint without evaluator", {{"label", c.label}});
    const double v = c.eval(f0);
    if (!(v < c.threshold)) {
      throw Error(ErrorCode::kPrecondition, "witness violates constraint " + c.label,
                  {{"constraint", c.label}, {"value", v}, {"C", c.threshold}});
    }
  }
  double delta = eps;
  ConstrainedFitOptions round = opt;
  nlohmann::json rounds = nlohmann::json::array();
  for (int attempt = 0; attempt <= opt.max_retries; ++attempt) {
    ConstrainedNetReport r = assemble_prescribed(f0, f, eps, delta, op, round);
    const GridFunction segment = r.final_segment.as_function();
    bool ok = true;
    nlohmann::json values = nlohmann::json::array();
    for (const auto& c : constraints) {
      const double v = c.eval(segment);
      const bool sat = v < (1.0 - opt.guard_band) * c.threshold;
      ok &= sat;
      r.constraints.push_back({c.label, v, c.threshold, sat});
      values.push_back({{"label", c.label}, {"value", v}, {"C", c.threshold}});
    }
    rounds.push_back({{"delta", delta}, {"width", r.widths.size() > 1 ? r.widths[r.widths.size() - 2] : 0},
                      {"constraints", values}});
    if (ok) return r;
    // Tighter seed distance (one more tail level) and a wider segment.
    delta *= 0.5;
    round.fit.width = std::min(round.max_width, round.fit.width * 2);
  }
  throw Error(ErrorCode::kConstraintViolated, "final segment violates a constraint after refitting",
              {{"rounds", rounds}});
}

}  // namespace uaplab
