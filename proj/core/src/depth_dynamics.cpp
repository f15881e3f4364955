#include "uaplab/depth_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include <Eigen/LU>

#include "uaplab/error.hpp"
#include "uaplab/rate_bounds.hpp"

namespace uaplab {

namespace {

nlohmann::json vec_json(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

struct CompositionOperator::VerdictCache {
  std::once_flag once;
  std::optional<TransitivityVerdict> verdict;
};

CompositionOperator::CompositionOperator(ActivationSpec activation, Vector b)
    : activation_(std::move(activation)),
      a_(Matrix::Identity(b.size(), b.size())),
      b_(std::move(b)),
      identity_(true),
      cache_(std::make_shared<VerdictCache>()) {
  if (b_.size() < 1) {
    throw Error(ErrorCode::kDimensionMismatch, "shift must be nonempty");
  }
  for (Eigen::Index i = 0; i < b_.size(); ++i) {
    if (!(b_[i] > 0.0) || !std::isfinite(b_[i])) {
      throw Error(ErrorCode::kPrecondition,
                  "shift entries must be strictly positive when A is the identity",
                  {{"b", vec_json(b_)}, {"index", i}});
    }
  }
}

CompositionOperator::CompositionOperator(ActivationSpec activation, Matrix a, Vector b)
    : activation_(std::move(activation)),
      a_(std::move(a)),
      b_(std::move(b)),
      cache_(std::make_shared<VerdictCache>()) {
  if (a_.rows() != a_.cols() || a_.rows() != b_.size() || b_.size() < 1) {
    throw Error(ErrorCode::kDimensionMismatch, "A must be square and match b",
                {{"rows", a_.rows()}, {"cols", a_.cols()}, {"b", b_.size()}});
  }
  if (!a_.allFinite() || !b_.allFinite()) {
    throw Error(ErrorCode::kNonFinite, "operator has non-finite entries");
  }
  identity_ = a_.isIdentity(0.0);
  if (identity_) {
    for (Eigen::Index i = 0; i < b_.size(); ++i) {
      if (!(b_[i] > 0.0)) {
        throw Error(ErrorCode::kPrecondition,
                    "shift entries must be strictly positive when A is the identity",
                    {{"b", vec_json(b_)}, {"index", i}});
      }
    }
  }
}

Vector CompositionOperator::step(const Vector& x) const {
  return activation_.apply(identity_ ? Vector(x + b_) : Vector(a_ * x + b_));
}

Vector CompositionOperator::iterate(const Vector& x, int n) const {
  Vector y = x;
  for (int i = 0; i < n; ++i) y = step(y);
  return y;
}

Vector CompositionOperator::inverse_step(const Vector& y) const {
  Vector z(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) z[i] = invert(activation_, y[i]);
  z -= b_;
  if (identity_) return z;
  return a_.fullPivLu().solve(z);
}

Vector CompositionOperator::inverse_iterate(const Vector& y, int n) const {
  Vector x = y;
  for (int i = 0; i < n; ++i) x = inverse_step(x);
  return x;
}

GridFunction CompositionOperator::apply(const GridFunction& f, int n) const {
  if (n < 0) {
    throw Error(ErrorCode::kPrecondition, "iteration count must be nonnegative", {{"n", n}});
  }
  if (f.dim_in() != dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "function input does not match operator",
                {{"dim_in", f.dim_in()}, {"operator_dim", dim()}});
  }
  if (n == 0) return f;
  return GridFunction(f.dim_in(), f.dim_out(),
                      [op = *this, f, n](const Vector& x) { return f(op.iterate(x, n)); },
                      f.flagged_unbounded());
}

const TransitivityVerdict& CompositionOperator::verdict() const {
  std::call_once(cache_->once, [&] { cache_->verdict = classify(activation_); });
  return *cache_->verdict;
}

GridFunction apply(const CompositionOperator& op, const GridFunction& f, int n) {
  return op.apply(f, n);
}

// ---------------------------------------------------------------------------
// Escape

namespace {

// Image of a box under S: exact for A = I, an enclosing box otherwise.
Box step_box(const CompositionOperator& op, const Box& box) {
  Vector pre_lo, pre_hi;
  if (op.identity_matrix()) {
    pre_lo = box.lo + op.shift();
    pre_hi = box.hi + op.shift();
  } else {
    const Vector c = op.matrix() * (0.5 * (box.lo + box.hi)) + op.shift();
    const Vector r = op.matrix().cwiseAbs() * (0.5 * (box.hi - box.lo));
    pre_lo = c - r;
    pre_hi = c + r;
  }
  Box next{op.activation().apply(pre_lo), op.activation().apply(pre_hi)};
  if (op.activation().monotone_direction() < 0) std::swap(next.lo, next.hi);
  return next;
}

}  // namespace

Box iterate_box(const CompositionOperator& op, double radius, int n) {
  if (op.activation().monotone_direction() == 0) {
    throw Error(ErrorCode::kPrecondition, "box iteration needs a monotone activation",
                {{"activation", op.activation().name()}});
  }
  Box box{Vector::Constant(op.dim(), -radius), Vector::Constant(op.dim(), radius)};
  for (int it = 0; it < n; ++it) box = step_box(op, box);
  return box;
}

namespace {

bool box_escapes(const Box& box, double guard) {
  for (Eigen::Index i = 0; i < box.lo.size(); ++i) {
    if (box.lo[i] > guard || box.hi[i] < -guard) return true;
  }
  return false;
}

void require_escape_preconditions(const CompositionOperator& op) {
  if (op.identity_matrix()) {
    const auto& v = op.verdict();
    if (v.kind == TransitivityVerdict::Kind::kNotTransitive) {
      throw Error(ErrorCode::kPrecondition,
                  "activation is not transitive; escape is not guaranteed",
                  {{"activation", op.activation().name()}, {"verdict", to_json(v)}});
    }
  } else if (op.matrix().fullPivLu().rank() < op.dim()) {
    throw Error(ErrorCode::kPrecondition, "A must have full rank");
  }
  if (op.activation().monotone_direction() == 0) {
    throw Error(ErrorCode::kPrecondition, "activation is not injective",
                {{"activation", op.activation().name()}});
  }
}

}  // namespace

int escape_time(const CompositionOperator& op, double k_radius, double guard_radius,
                int max_n) {
  if (!(k_radius > 0.0) || !(guard_radius >= k_radius)) {
    throw Error(ErrorCode::kPrecondition, "need 0 < K_radius <= guard_radius",
                {{"K_radius", k_radius}, {"guard_radius", guard_radius}});
  }
  require_escape_preconditions(op);
  Box box{Vector::Constant(op.dim(), -k_radius), Vector::Constant(op.dim(), k_radius)};
  for (int n = 1; n <= max_n; ++n) {
    box = step_box(op, box);
    if (box.lo.hasNaN() || box.hi.hasNaN()) break;
    if (box_escapes(box, guard_radius)) return n;
  }
  throw Error(ErrorCode::kNoEscape, "no escape within max_N iterations",
              {{"max_N", max_n}, {"K_radius", k_radius}, {"guard_radius", guard_radius}});
}

EscapeBlend escape_blend(const CompositionOperator& op, const GridFunction& seed,
                         const GridFunction& target, double k0, double margin, int max_n) {
  if (seed.dim_in() != op.dim() || target.dim_in() != op.dim() ||
      seed.dim_out() != target.dim_out()) {
    throw Error(ErrorCode::kDimensionMismatch, "seed, target and operator disagree",
                {{"seed", {seed.dim_in(), seed.dim_out()}},
                 {"target", {target.dim_in(), target.dim_out()}},
                 {"operator_dim", op.dim()}});
  }
  if (!(margin > 0.0)) {
    throw Error(ErrorCode::kPrecondition, "blend margin must be positive", {{"margin", margin}});
  }
  const int n = escape_time(op, k0, k0 + margin, max_n);
  const Box box = iterate_box(op, k0, n);
  auto eval = [op, seed, target, box, margin, n](const Vector& x) -> Vector {
    double dist = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      dist = std::max({dist, box.lo[i] - x[i], x[i] - box.hi[i]});
    }
    if (dist >= margin) return seed(x);
    const Vector clamped = x.cwiseMax(box.lo).cwiseMin(box.hi);
    const Vector inner = target(op.inverse_iterate(clamped, n));
    if (dist <= 0.0) return inner;
    const double t = dist / margin;
    return (1.0 - t) * inner + t * seed(x);
  };
  return {GridFunction(seed.dim_in(), seed.dim_out(), eval,
                       seed.flagged_unbounded() || target.flagged_unbounded()),
          n, box};
}

// ---------------------------------------------------------------------------
// Certificates

int tail_cutoff(double eps, double delta) {
  const double tol = 0.5 * std::min(eps, delta);
  int k = 1;
  while (!(std::ldexp(1.0, -k) < tol)) ++k;
  return k;
}

nlohmann::json to_json(const TransitivityCertificate& c) {
  nlohmann::json j = {{"N", c.n},
                      {"k0", c.k0},
                      {"d_seed", c.d_seed},
                      {"d_target", c.d_target},
                      {"blend_margin", c.blend_margin},
                      {"metric", c.metric},
                      {"radius", c.radius},
                      {"activation", c.activation},
                      {"b", vec_json(c.b)}};
  if (c.box) j["box"] = {{"lo", vec_json(c.box->lo)}, {"hi", vec_json(c.box->hi)}};
  if (c.fit_residual) j["fit_residual"] = *c.fit_residual;
  if (c.d_seed_bound) j["d_seed_bound"] = *c.d_seed_bound;
  return j;
}

namespace {

void require_same_shape(const CompositionOperator& op, const GridFunction& g,
                        const GridFunction& f) {
  if (g.dim_in() != f.dim_in() || g.dim_out() != f.dim_out() || g.dim_in() != op.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "g, f and the operator disagree in shape",
                {{"g", {g.dim_in(), g.dim_out()}},
                 {"f", {f.dim_in(), f.dim_out()}},
                 {"operator_dim", op.dim()}});
  }
}

void require_tolerances(double eps, double delta) {
  if (!(eps > 0.0) || !(delta > 0.0)) {
    throw Error(ErrorCode::kPrecondition, "eps and delta must be positive",
                {{"eps", eps}, {"delta", delta}});
  }
}

TransitivityCertificate base_certificate(const CompositionOperator& op, double margin) {
  TransitivityCertificate c;
  c.blend_margin = margin;
  c.activation = op.activation().name();
  c.b = op.shift();
  return c;
}

}  // namespace

TransitivityCertificate construct_transitive_approximant(const CompositionOperator& op,
                                                         const GridFunction& g,
                                                         const GridFunction& f, double eps,
                                                         double delta,
                                                         const TransitivityOptions& opt) {
  require_same_shape(op, g, f);
  require_tolerances(eps, delta);
  if (!op.identity_matrix()) {
    throw Error(ErrorCode::kPrecondition, "transitivity construction requires A = I");
  }
  const auto& v = op.verdict();
  if (v.kind != TransitivityVerdict::Kind::kTransitive) {
    throw Error(ErrorCode::kPrecondition, "activation is not transitive",
                {{"activation", op.activation().name()}, {"verdict", to_json(v)}});
  }
  GridSpec grid = opt.verify_grid;
  grid.dim_in = g.dim_in();
  grid.dim_out = g.dim_out();

  TransitivityCertificate cert = base_certificate(op, opt.blend_margin);
  cert.k0 = tail_cutoff(eps, delta);
  cert.radius = cert.k0;

  const DuccResult direct = d_ucc(f, g, opt.verify_terms, grid);
  if (direct.upper_bound() < eps) {
    cert.n = 0;
    cert.g_tilde = g;
    cert.d_seed = 0.0;
    cert.d_target = direct.value;
    return cert;
  }

  EscapeBlend blend = escape_blend(op, g, f, cert.k0, opt.blend_margin, opt.max_n);
  cert.n = blend.n;
  cert.box = blend.box;
  cert.g_tilde = blend.g_tilde;
  if (opt.fitter) {
    ShallowFitConfig fc = *opt.fitter;
    fc.fit_radius = std::max(fc.fit_radius,
                             std::max(blend.box.hi.cwiseAbs().maxCoeff(),
                                      blend.box.lo.cwiseAbs().maxCoeff()) +
                                 opt.blend_margin);
    const ShallowFit fit = fit_shallow(blend.g_tilde, op.activation(), fc);
    cert.g_tilde = fit.net.as_function();
    cert.fit_residual = fit.sup_residual;
  }
  cert.d_seed = d_ucc(g, cert.g_tilde, opt.verify_terms, grid).value;
  cert.d_target = d_ucc(f, op.apply(cert.g_tilde, cert.n), opt.verify_terms, grid).value;
  if (!(cert.d_seed < delta) || !(cert.d_target < eps)) {
    throw Error(ErrorCode::kVerificationFailed, "certificate distances exceed tolerances",
                {{"d_seed", cert.d_seed},
                 {"d_target", cert.d_target},
                 {"eps", eps},
                 {"delta", delta},
                 {"N", cert.n}});
  }
  return cert;
}

TransitivityCertificate l1_transitive_approximant(const CompositionOperator& op,
                                                  const GridFunction& g,
                                                  const GridFunction& f, const Measure1D& mu,
                                                  double eps, double delta,
                                                  const TransitivityOptions& opt) {
  require_same_shape(op, g, f);
  require_tolerances(eps, delta);
  if (op.dim() != 1) {
    throw Error(ErrorCode::kPrecondition, "the L1 variant is implemented for m = 1",
                {{"m", op.dim()}});
  }
  const auto& v = op.verdict();
  if (v.kind == TransitivityVerdict::Kind::kNotTransitive) {
    throw Error(ErrorCode::kPrecondition, "activation is neither transitive nor Lp-transitive",
                {{"activation", op.activation().name()}, {"verdict", to_json(v)}});
  }
  if (!mu.lebesgue_equivalent()) {
    throw Error(ErrorCode::kPrecondition, "measure must be equivalent to Lebesgue measure");
  }
  const PushforwardReport push = pushforward_density_norm(op.activation(), op.shift()[0], mu);
  if (!push.well_defined) {
    throw Error(ErrorCode::kPrecondition, "composition operator is not well defined on L1",
                {{"pushforward", to_json(push)}});
  }

  TransitivityCertificate cert = base_certificate(op, opt.blend_margin);
  cert.metric = "l1";
  const std::vector<Measure1D> mus{mu};
  const double direct = lp_norm(f - g, mus, 1.0, opt.quad_nodes);
  if (direct < eps) {
    cert.n = 0;
    cert.g_tilde = g;
    cert.d_target = direct;
    cert.d_seed = 0.0;
    cert.d_seed_bound = 0.0;
    return cert;
  }

  // Start where the mass outside [-R, R] is a small fraction of the budget.
  const double budget = std::min(eps, delta);
  const double tail = std::min(0.25, budget / (4.0 * mu.total_mass()));
  double radius = std::max(1.0, std::max(std::abs(mu.quantile(0.5 * tail)),
                                         std::abs(mu.quantile(1.0 - 0.5 * tail))));
  nlohmann::json attempts = nlohmann::json::array();
  while (radius <= opt.max_radius) {
    EscapeBlend blend = escape_blend(op, g, f, radius, opt.blend_margin, opt.max_n);
    const GridFunction diff_seed = g - blend.g_tilde;
    const GridFunction diff_target = f - op.apply(blend.g_tilde, blend.n);
    const double d_seed = lp_norm(diff_seed, mus, 1.0, opt.quad_nodes);
    const double d_target = lp_norm(diff_target, mus, 1.0, opt.quad_nodes);

    // g~ differs from g only on the box plus its margin shell.
    const double lo = blend.box.lo[0] - opt.blend_margin;
    const double hi = blend.box.hi[0] + opt.blend_margin;
    double sup_diff = 0.0;
    const int samples = 4001;
    for (int i = 0; i < samples; ++i) {
      Vector x(1);
      x[0] = lo + (hi - lo) * i / (samples - 1);
      sup_diff = std::max(sup_diff, diff_seed(x).norm());
    }
    const double bound = (mu.cdf(hi) - mu.cdf(lo)) * sup_diff;
    attempts.push_back({{"radius", radius}, {"N", blend.n}, {"d_seed", d_seed},
                        {"d_seed_bound", bound}, {"d_target", d_target}});
    if (d_seed < delta && bound < delta && d_target < eps) {
      cert.n = blend.n;
      cert.g_tilde = blend.g_tilde;
      cert.box = blend.box;
      cert.radius = radius;
      cert.k0 = static_cast<int>(std::ceil(radius));
      cert.d_seed = d_seed;
      cert.d_seed_bound = bound;
      cert.d_target = d_target;
      return cert;
    }
    radius *= 1.5;
  }
  throw Error(ErrorCode::kVerificationFailed,
              "measure tail too heavy for the requested tolerance",
              {{"eps", eps}, {"delta", delta}, {"attempts", attempts}});
}

}  // namespace uaplab
