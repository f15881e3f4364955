#include "uaplab/rate_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

#include "uaplab/error.hpp"
#include "uaplab/random.hpp"

namespace uaplab {

nlohmann::json to_json(const PushforwardReport& r) {
  nlohmann::json j = {{"norm_value", std::isfinite(r.norm_value) ? nlohmann::json(r.norm_value)
                                                                 : nlohmann::json("inf")},
                      {"well_defined", r.well_defined},
                      {"kappa_check", r.kappa_check},
                      {"argmax", r.argmax},
                      {"min_derivative", r.min_derivative}};
  if (r.witness_interval) {
    auto bound = [](double x) {
      return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
    };
    j["witness_interval"] = {bound(r.witness_interval->first), bound(r.witness_interval->second)};
  }
  return j;
}

namespace {

// inf of the derivative over one branch: analytic for affine branches,
// sampled plus asymptotic otherwise.
double branch_min_derivative(const Branch& b) {
  if (b.all_affine()) return b.as_affine().slope;
  const double lo = std::isfinite(b.lo) ? b.lo : std::min(-1e3, b.hi - 1.0);
  const double hi = std::isfinite(b.hi) ? b.hi : std::max(1e3, b.lo + 1.0);
  double m = kInf;
  const int n = 20001;
  for (int i = 0; i < n; ++i) {
    const double x = lo + (hi - lo) * i / (n - 1);
    if (x >= b.hi) break;
    m = std::min(m, b.derivative(x));
    if (i > 0) m = std::min(m, b.derivative(x, true));
  }
  for (bool positive : {false, true}) {
    if (std::isfinite(positive ? b.hi : b.lo)) continue;
    const auto exp = asymptotic_expansion(b, positive);
    if (!exp || exp->empty()) continue;
    // Derivative in x of c * t^e behaves like e * c * t^(e-1) in magnitude.
    const auto [e, c] = exp->front();
    const double sign_x = positive ? 1.0 : -1.0;
    const double slope_sign = c * sign_x;
    if (e < 1.0 || slope_sign <= 0.0) m = std::min(m, 0.0);
    if (e == 1.0) m = std::min(m, std::abs(c));
  }
  return m;
}

}  // namespace

PushforwardReport pushforward_density_norm(const ActivationSpec& sigma, double b,
                                           const Measure1D& mu, const GridSpec& grid) {
  if (!std::isfinite(b)) {
    throw Error(ErrorCode::kNonFinite, "shift must be finite", {{"b", b}});
  }
  PushforwardReport r;
  r.min_derivative = kInf;
  for (const auto& br : sigma.branches()) {
    const double d = branch_min_derivative(br);
    if (d < r.min_derivative) r.min_derivative = d;
    if (!(d > 0.0) && !r.witness_interval) r.witness_interval = std::make_pair(br.lo, br.hi);
  }
  r.well_defined = r.min_derivative > 0.0;
  if (!r.well_defined) {
    r.norm_value = kInf;
    r.kappa_check = true;
    return r;
  }
  r.witness_interval.reset();

  // Grid over the bulk of mu in units of its spread.
  double centre = 0.0, spread = 1.0;
  switch (mu.kind()) {
    case Measure1D::Kind::kGaussian:
      centre = mu.params()[0];
      spread = mu.params()[1];
      break;
    default: {
      const double lo = mu.quantile(1e-9), hi = mu.quantile(1.0 - 1e-9);
      centre = 0.5 * (lo + hi);
      spread = std::max(0.5 * (hi - lo), 1e-12) / grid.radius;
    }
  }
  auto consider = [&](double x, double deriv) {
    const double v = mu.density(x) / std::abs(deriv);
    if (v > r.norm_value) {
      r.norm_value = v;
      r.argmax = x;
    }
  };
  const int n = std::max(grid.points_per_axis, 2);
  for (int i = 0; i < n; ++i) {
    const double x = centre + spread * grid.radius * (2.0 * i / (n - 1) - 1.0);
    consider(x, sigma.right_derivative(x + b));
    consider(x, sigma.left_derivative(x + b));
  }
  // Breakpoints: the density ratio can peak at a kink.
  for (double p : sigma.breakpoints()) {
    consider(p - b, sigma.left_derivative(p));
    consider(p - b, sigma.right_derivative(p));
  }
  r.kappa_check = r.norm_value > 1.0;
  return r;
}

KappaTable kappa_growth_check(const ActivationSpec& sigma, double b, const Measure1D& mu,
                              const std::vector<int>& n_values) {
  const PushforwardReport p = pushforward_density_norm(sigma, b, mu);
  if (!p.well_defined) {
    throw Error(ErrorCode::kPrecondition, "pushforward density is unbounded",
                {{"pushforward", to_json(p)}});
  }
  if (!(p.norm_value > 1.0)) {
    throw Error(ErrorCode::kVerificationFailed,
                "operator norm bound <= 1 contradicts the growth hypothesis",
                {{"norm_value", p.norm_value}});
  }
  KappaTable t;
  t.norm_value = p.norm_value;
  for (int n : n_values) {
    if (n < 0) throw Error(ErrorCode::kPrecondition, "N must be nonnegative", {{"N", n}});
    t.rows.push_back({n, std::pow(p.norm_value, n)});
  }
  t.strictly_increasing = true;
  for (std::size_t i = 1; i < t.rows.size(); ++i) {
    if (t.rows[i].n > t.rows[i - 1].n && !(t.rows[i].value > t.rows[i - 1].value)) {
      t.strictly_increasing = false;
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Frank-Wolfe

nlohmann::json to_json(const SimplexFit& f) {
  return {{"coefficients", std::vector<double>(f.coefficients.data(),
                                               f.coefficients.data() + f.coefficients.size())},
          {"basis_ids", f.basis_ids},
          {"residual", f.residual},
          {"iterations", f.iterations}};
}

namespace {

// Minimizer over [0, 1] of sum_q w_q |r_q + g d_q|: a weighted median of the
// kinks -r_q / d_q.
double l1_line_search(const Vector& r, const Vector& d, const Vector& w) {
  std::vector<std::pair<double, double>> kinks;
  double slope = 0.0;  // derivative at g = 0+
  for (Eigen::Index q = 0; q < r.size(); ++q) {
    if (d[q] == 0.0) continue;
    const double wd = w[q] * std::abs(d[q]);
    const double g = -r[q] / d[q];
    if (g > 0.0 && g < 1.0) kinks.emplace_back(g, 2.0 * wd);
    // Sign of r + g d just right of 0.
    const double s = r[q] != 0.0 ? (r[q] > 0 ? 1.0 : -1.0) : (d[q] > 0 ? 1.0 : -1.0);
    slope += s * w[q] * d[q];
  }
  if (slope >= 0.0) return 0.0;
  std::sort(kinks.begin(), kinks.end());
  for (const auto& [g, jump] : kinks) {
    slope += jump;
    if (slope >= 0.0) return g;
  }
  return 1.0;
}

double weighted_l1(const Vector& r, const Vector& w) { return (r.cwiseAbs().array() * w.array()).sum(); }

}  // namespace

SimplexFit simplex_fit(const std::vector<GridFunction>& basis, const GridFunction& target,
                       const Measure1D& mu, int max_iter, int quad_nodes) {
  if (basis.empty()) {
    throw Error(ErrorCode::kPrecondition, "basis must be nonempty");
  }
  if (target.dim_in() != 1 || target.dim_out() != 1) {
    throw Error(ErrorCode::kPrecondition, "simplex_fit works with scalar functions on R",
                {{"dim_in", target.dim_in()}, {"dim_out", target.dim_out()}});
  }
  for (std::size_t i = 0; i < basis.size(); ++i) {
    if (basis[i].dim_in() != 1 || basis[i].dim_out() != 1) {
      throw Error(ErrorCode::kDimensionMismatch, "basis function has the wrong shape",
                  {{"index", i}});
    }
  }
  const int k = static_cast<int>(basis.size());
  const int q = std::max(quad_nodes, 1);
  Vector w = Vector::Constant(q, mu.total_mass() / q);
  Matrix f(q, k);
  Vector t(q);
  for (int i = 0; i < q; ++i) {
    const double x = mu.quantile((i + 0.5) / q);
    t[i] = target.scalar(x);
    for (int j = 0; j < k; ++j) f(i, j) = basis[static_cast<std::size_t>(j)].scalar(x);
  }
  if (!f.allFinite() || !t.allFinite()) {
    throw Error(ErrorCode::kNonFinite, "non-finite sample in simplex_fit");
  }

  SimplexFit out;
  out.basis_ids.resize(static_cast<std::size_t>(k));
  std::iota(out.basis_ids.begin(), out.basis_ids.end(), 0);

  // Best single vertex.
  int best = 0;
  double best_val = kInf;
  for (int j = 0; j < k; ++j) {
    const double v = weighted_l1(f.col(j) - t, w);
    if (v < best_val) {
      best_val = v;
      best = j;
    }
  }
  Vector alpha = Vector::Zero(k);
  alpha[best] = 1.0;
  Vector current = f.col(best);
  double value = best_val;
  out.history.push_back(value);

  for (int it = 0; it < max_iter; ++it) {
    const Vector r = current - t;
    Vector u(q);
    for (int i = 0; i < q; ++i) u[i] = w[i] * (r[i] > 0 ? 1.0 : (r[i] < 0 ? -1.0 : 0.0));
    const Vector grad = f.transpose() * u;
    Eigen::Index vtx = 0;
    grad.minCoeff(&vtx);

    auto try_vertex = [&](Eigen::Index j, double& g_out) {
      const Vector d = f.col(j) - current;
      const double g = l1_line_search(r, d, w);
      g_out = g;
      return g > 0.0 ? weighted_l1(r + g * d, w) : value;
    };
    double gamma = 0.0;
    double cand = try_vertex(vtx, gamma);
    // Subgradient stalls at kinks; fall back to every vertex direction.
    if (!(cand < value)) {
      for (Eigen::Index j = 0; j < k; ++j) {
        double g = 0.0;
        const double v = try_vertex(j, g);
        if (v < cand) {
          cand = v;
          gamma = g;
          vtx = j;
        }
      }
    }
    if (!(cand < value * (1.0 - 1e-15)) || gamma <= 0.0) break;
    alpha *= (1.0 - gamma);
    alpha[vtx] += gamma;
    current = (1.0 - gamma) * current + gamma * f.col(vtx);
    value = cand;
    out.history.push_back(value);
    out.iterations = it + 1;
  }
  // Renormalize against accumulated rounding.
  alpha = alpha.cwiseMax(0.0);
  alpha /= alpha.sum();
  out.coefficients = alpha;
  out.residual = weighted_l1(f * alpha - t, w);
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps

BasisSampler tree_basis(double lo, double hi) {
  return [lo, hi](std::uint64_t seed, int index) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(index)));
    double b = rng.uniform(lo, hi);
    double c = rng.uniform(lo, hi);
    if (c < b) std::swap(b, c);
    return GridFunction::from_scalar([b, c](double x) { return (b < x && x < c) ? 1.0 : 0.0; });
  };
}

BasisSampler ramp_basis(double lo, double hi) {
  return [lo, hi](std::uint64_t seed, int index) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(index)));
    const double start = rng.uniform(lo, hi);
    const double width = rng.uniform(0.05, 0.5 * (hi - lo));
    const double w = 1.0 / width;
    const double c = -start * w;
    return GridFunction::from_scalar([w, c](double x) {
      const double z = w * x + c;
      return std::max(0.0, z) - std::max(0.0, z - 1.0);
    });
  };
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 2) return 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(std::max(y[i], 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double dn = static_cast<double>(n);
  const double den = dn * sxx - sx * sx;
  return den == 0.0 ? 0.0 : (dn * sxy - sx * sy) / den;
}

int worker_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("UAPLAB_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

RateSweepResult rate_sweep(const BasisSampler& basis, const GridFunction& target,
                           const Measure1D& mu, const std::vector<int>& n_values, int depth,
                           const CompositionOperator& op, const RateSweepOptions& options) {
  if (n_values.empty()) {
    throw Error(ErrorCode::kPrecondition, "n_values must be nonempty");
  }
  if (depth < 0) throw Error(ErrorCode::kPrecondition, "depth must be nonnegative", {{"N", depth}});
  for (int n : n_values) {
    if (n < 1) throw Error(ErrorCode::kPrecondition, "every n must be >= 1", {{"n", n}});
  }
  const PushforwardReport push = pushforward_density_norm(op.activation(), op.shift()[0], mu);
  if (!push.well_defined) {
    throw Error(ErrorCode::kPrecondition, "pushforward density is unbounded",
                {{"pushforward", to_json(push)}});
  }
  RateSweepResult out;
  out.norm_value = push.norm_value;
  out.rows.resize(n_values.size());

  const double c = 1.0 + std::sqrt(2.0 * mu.total_mass());
  auto work = [&](std::size_t idx) {
    const int n = n_values[idx];
    std::vector<GridFunction> fs;
    fs.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) fs.push_back(op.apply(basis(options.seed, i), depth));
    const SimplexFit fit = simplex_fit(fs, target, mu, options.max_iter, options.quad_nodes);
    const double sn = std::sqrt(static_cast<double>(n));
    out.rows[idx] = {n,
                     depth,
                     fit.residual,
                     c * std::pow(push.norm_value, depth) / sn,
                     c * std::pow(push.norm_value, 0.5 * depth) / sn,
                     c / sn};
  };

  const int threads = std::min<int>(worker_threads(options.threads),
                                    static_cast<int>(n_values.size()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n_values.size(); ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = static_cast<std::size_t>(t); i < n_values.size();
               i += static_cast<std::size_t>(threads)) {
            work(i);
          }
        } catch (...) {
          errors[static_cast<std::size_t>(t)] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::vector<double> xs, ys;
  out.all_below_reference = true;
  for (const auto& row : out.rows) {
    xs.push_back(row.n);
    ys.push_back(row.residual);
    if (!(row.residual <= row.bound_reference)) out.all_below_reference = false;
  }
  out.slope_estimate = loglog_slope(xs, ys);
  return out;
}

std::string rate_sweep_csv(const RateSweepResult& r) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "n,N,residual,bound_reference,slope_estimate,bound_displayed,bound_proof_final\n";
  for (const auto& row : r.rows) {
    os << row.n << ',' << row.depth << ',' << row.residual << ',' << row.bound_reference << ','
       << r.slope_estimate << ',' << row.bound_displayed << ',' << row.bound_proof_final << '\n';
  }
  return os.str();
}

nlohmann::json to_json(const RateSweepResult& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"n", row.n},
                    {"N", row.depth},
                    {"residual", row.residual},
                    {"bound_reference", row.bound_reference},
                    {"bound_displayed", row.bound_displayed},
                    {"bound_proof_final", row.bound_proof_final}});
  }
  return {{"rows", rows},
          {"slope_estimate", r.slope_estimate},
          {"norm_value", r.norm_value},
          {"all_below_reference", r.all_below_reference}};
}

}  // namespace uaplab
