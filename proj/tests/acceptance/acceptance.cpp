// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
// usage: uaplab_acceptance [--cli <path to uaplab>] [--configs <dir>] [--only AC4]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "uaplab/activations.hpp"
#include "uaplab/constrained_approx.hpp"
#include "uaplab/depth_dynamics.hpp"
#include "uaplab/error.hpp"
#include "uaplab/free_space.hpp"
#include "uaplab/function_library.hpp"
#include "uaplab/function_space.hpp"
#include "uaplab/omega_modification.hpp"
#include "uaplab/random.hpp"
#include "uaplab/rate_bounds.hpp"

namespace fs = std::filesystem;
using namespace uaplab;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string id;
  double limit_s;
  std::function<Outcome()> run;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

GridFunction identity_fn() { return function_from_json("identity"); }

Outcome ac1() {
  const auto relu = classify(builtin_activation("relu"));
  const auto shifted = classify(builtin_activation("leaky_shifted_paper"));
  const auto rescaled = classify(builtin_activation("leaky_rescaled_paper"));
  const bool relu_ok = relu.kind == TransitivityVerdict::Kind::kNotTransitive && relu.witness &&
                       std::abs(builtin_activation("relu")(*relu.witness) - *relu.witness) == 0.0;
  const bool shifted_ok = shifted.kind == TransitivityVerdict::Kind::kTransitive &&
                          shifted.dominance == Dominance::kAbove;
  const bool rescaled_ok = rescaled.kind == TransitivityVerdict::Kind::kLpTransitiveOnly &&
                           rescaled.witness && *rescaled.witness == 0.0;
  return {relu_ok && shifted_ok && rescaled_ok,
          "relu=" + std::string(to_string(relu.kind)) + " witness=" +
              (relu.witness ? fmt(*relu.witness) : "none") +
              " shifted=" + std::string(to_string(shifted.kind)) + "/" +
              std::string(to_string(shifted.dominance)) +
              " rescaled=" + std::string(to_string(rescaled.kind)) + " fixed=" +
              (rescaled.witness ? fmt(*rescaled.witness) : "none")};
}

// Strictly increasing sigma_tilde with sigma_tilde(0) = 0 and equal one-sided
// derivatives at 0.
ActivationSpec random_sigma_tilde(Rng& rng, int i) {
  const double a = rng.uniform(0.05, 3.0);
  std::vector<Term> terms{AffineTerm{a, 0.0}};
  switch (i % 3) {
    case 0:
      terms.push_back(PowerTerm{rng.uniform(0.0, 2.0), rng.uniform(1.5, 3.5)});
      break;
    case 1: {
      // symmetric table: same slope on both sides of 0
      const double s1 = rng.uniform(0.1, 2.0);
      const double s2 = rng.uniform(0.1, 2.0);
      terms.push_back(TableTerm{{-2.0, -1.0, 0.0, 1.0, 2.0},
                                {-s1 - s2, -s1, 0.0, s1, s1 + s2}});
      break;
    }
    default:
      break;
  }
  return ActivationSpec("sigma_tilde_" + std::to_string(i), {Branch{-kInf, kInf, terms}});
}

Outcome ac2() {
  Rng rng(derive_seed(2, 0));
  int transitive = 0;
  int lp_ok = 0;
  long bad_points = 0;
  for (int i = 0; i < 50; ++i) {
    const ActivationSpec st = random_sigma_tilde(rng, i);
    const double slope0 = st.right_derivative(0.0);
    const double alpha1 = rng.uniform(0.01, 0.99);
    double alpha2 = rng.uniform(0.05, 2.0);
    if (std::abs(alpha2 - (slope0 - 1.0)) < 1e-3) alpha2 += 0.1;
    const ActivationSpec s = construct_transitive(st, alpha1, alpha2);
    const auto v = classify(s);
    if (v.kind == TransitivityVerdict::Kind::kTransitive && v.dominance == Dominance::kAbove) {
      ++transitive;
    }
    const ActivationSpec lp = construct_lp_transitive(st, rng.uniform(0.01, 0.99));
    const auto vl = classify(lp);
    if (vl.kind != TransitivityVerdict::Kind::kNotTransitive) ++lp_ok;
    for (int k = 0; k < 100000 / 50; ++k) {
      const double x = rng.uniform(-1e3, 1e3);
      if (!(s(x) - x > 0.0)) ++bad_points;
      if (x != 0.0 && !(lp(x) > x)) ++bad_points;
    }
  }
  return {transitive == 50 && lp_ok == 50 && bad_points == 0,
          "transitive=" + std::to_string(transitive) + "/50 lp=" + std::to_string(lp_ok) +
              "/50 sample_violations=" + std::to_string(bad_points)};
}

// Lower corner of S^n([-k, k]) for S(x) = s(x + 1), s(y) = 1.1 y + 0.1 (y >= 0),
// 0.1 y + 0.1 (y < 0); the box leaves [-k, k] once it exceeds k.
std::vector<double> corner_chain(double k) {
  std::vector<double> chain{-k};
  while (chain.back() <= k) {
    const double y = chain.back() + 1.0;
    chain.push_back(y >= 0.0 ? 1.1 * y + 0.1 : 0.1 * y + 0.1);
  }
  return chain;
}

Outcome ac3() {
  const CompositionOperator op(builtin_activation("leaky_shifted_paper"), Vector::Ones(1));
  const int n2 = escape_time(op, 2.0, 2.0);
  const int n5 = escape_time(op, 5.0, 5.0);
  const auto c2 = corner_chain(2.0);
  const auto c5 = corner_chain(5.0);
  const int corner2 = static_cast<int>(c2.size()) - 1;
  const int corner5 = static_cast<int>(c5.size()) - 1;
  std::string chain;
  for (double v : c2) chain += (chain.empty() ? "" : ">") + fmt(v);
  return {n2 == 4 && n5 == 5 && corner2 == n2 && corner5 == n5,
          "N(K=2)=" + std::to_string(n2) + " (expected 4, corner arithmetic " +
              std::to_string(corner2) + ": " + chain + ") N(K=5)=" + std::to_string(n5) +
              " (expected 5, corner arithmetic " + std::to_string(corner5) + ")"};
}

GridSpec finer_grid(int factor) {
  GridSpec g = default_ducc_grid();
  g.points_per_axis = (g.points_per_axis - 1) * factor + 1;
  return g;
}

Outcome ac4() {
  const CompositionOperator op(builtin_activation("leaky_shifted_paper"), Vector::Ones(1));
  const GridFunction g = identity_fn();
  const GridFunction f = function_from_json("sin");
  const auto cert = construct_transitive_approximant(op, g, f, 0.1, 0.1);
  const GridSpec fresh = finer_grid(2);
  const double d_seed = d_ucc(g, cert.g_tilde, 20, fresh).value;
  const double d_target = d_ucc(f, op.apply(cert.g_tilde, cert.n), 20, fresh).value;
  return {d_seed < 0.1 && d_target < 0.1,
          "k0=" + std::to_string(cert.k0) + " N=" + std::to_string(cert.n) + " d_seed=" +
              fmt(d_seed) + " d_target=" + fmt(d_target)};
}

Outcome ac5() {
  const CompositionOperator op(builtin_activation("leaky_shifted_paper"), Vector::Ones(1));
  const GridFunction f_hat = identity_fn();
  const GridFunction f = function_from_json("cos");
  const auto r = assemble_prescribed(f_hat, f, 0.1, 0.1, op);
  bool frozen_ok = r.n_frozen > 0;
  for (int i = 0; i < r.n_frozen; ++i) {
    const auto& layer = r.full_net.layers()[static_cast<std::size_t>(i)];
    frozen_ok &= layer.matrix.rows() == 1 && layer.matrix.cols() == 1 &&
                 layer.matrix(0, 0) == 1.0 && sparsity(layer).nnz_matrix == 1;
  }
  const GridSpec fresh = finer_grid(2);
  const double d_prescribed = d_ucc(f_hat, r.final_segment.as_function(), 20, fresh).value;
  const double d_target = d_ucc(f, r.full_net.as_function(), 20, fresh).value;
  Rng rng(derive_seed(5, 0));
  double worst = 0.0;
  Vector x(1);
  for (int i = 0; i < 1000; ++i) {
    x(0) = rng.uniform(-20.0, 20.0);
    const Vector full = r.full_net.eval(x);
    const Vector split = r.final_segment.eval(op.iterate(x, r.n_frozen));
    worst = std::max(worst, (full - split).cwiseAbs().maxCoeff());
  }
  return {frozen_ok && d_prescribed < 0.1 && d_target < 0.1 && worst <= 1e-12,
          "N=" + std::to_string(r.n_frozen) + " frozen_identity=" + (frozen_ok ? "yes" : "no") +
              " d_prescribed=" + fmt(d_prescribed) + " d_target=" + fmt(d_target) +
              " decomposition_err=" + fmt(worst)};
}

Outcome ac6() {
  const GridFunction f = function_from_json("x_exp_neg_sq_plus_x");
  const WeightFamily omega{{Weight::unit(), Weight::power(1), Weight::max_t_power(2)}};
  const auto r = approximate_growth(f, omega, 0.1, builtin_activation("relu"));
  return {r.weighted_error < 0.1 && r.measure_radius >= 30.0,
          "selected=" + r.selected + " weighted_error=" + fmt(r.weighted_error) + " on [-" +
              fmt(r.measure_radius) + "," + fmt(r.measure_radius) + "]"};
}

Outcome ac7() {
  std::vector<std::pair<std::string, GridFunction>> samples{
      {"constant_0.5", GridFunction::constant(1, Vector::Constant(1, 0.5))},
      {"identity", identity_fn()}};
  const auto r = demonstrate_limitation(samples);
  bool unbounded_flagged = false;
  for (const auto& s : r.samples) {
    if (s.label == "identity") unbounded_flagged = s.unbounded && std::isinf(s.sup_error);
  }
  return {std::abs(r.best_error - 0.5) <= 0.01 && unbounded_flagged,
          "best_c=" + fmt(r.best_c) + " best_error=" + fmt(r.best_error)};
}

Outcome ac8() {
  const Measure1D mu = Measure1D::gaussian();
  const auto rep = pushforward_density_norm(builtin_activation("leaky_rescaled_paper"), 1.0, mu);
  // Per-branch maxima of phi(x) / s'(x + 1): slope 1.1 for x >= -1, 0.1 below.
  const double phi0 = 1.0 / std::sqrt(2.0 * M_PI);
  const double analytic = std::max(phi0 / 1.1, 10.0 * phi0 * std::exp(-0.5));
  const auto relu = pushforward_density_norm(builtin_activation("relu"), 1.0, mu);
  std::vector<int> ns;
  for (int n = 0; n <= 10; ++n) ns.push_back(n);
  const auto table = kappa_growth_check(builtin_activation("leaky_rescaled_paper"), 1.0, mu, ns);
  const double rel = std::abs(rep.norm_value - analytic) / analytic;
  return {rel < 0.02 && rep.well_defined && !relu.well_defined && table.strictly_increasing,
          "norm=" + fmt(rep.norm_value) + " analytic=" + fmt(analytic) + " rel_err=" + fmt(rel) +
              " relu_well_defined=" + (relu.well_defined ? "true" : "false") +
              " kappa_increasing=" + (table.strictly_increasing ? "true" : "false")};
}

Outcome ac9() {
  const CompositionOperator op(builtin_activation("leaky_rescaled_paper"), Vector::Ones(1));
  const GridFunction target = function_from_json(nlohmann::json{{"name", "indicator"}, {"lo", 0}, {"hi", 1}});
  const Measure1D mu = Measure1D::gaussian();
  const std::vector<int> ns{4, 8, 16, 32, 64, 128, 256};
  const auto r = rate_sweep(tree_basis(), target, mu, ns, 0, op, RateSweepOptions{});
  bool monotone = true;
  bool below = true;
  std::string res;
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    if (i > 0 && r.rows[i].residual > 1.05 * r.rows[i - 1].residual) monotone = false;
    const double reference = (1.0 + std::sqrt(2.0 * mu.total_mass())) / std::sqrt(r.rows[i].n);
    if (!(r.rows[i].residual <= reference)) below = false;
    res += (i ? "," : "") + fmt(r.rows[i].residual);
  }
  return {monotone && below && r.slope_estimate <= -0.3,
          "slope=" + fmt(r.slope_estimate) + " residuals=[" + res + "]"};
}

GridFunction random_bounded(Rng& rng) {
  const double a = rng.uniform(-2.0, 2.0);
  const double w = rng.uniform(0.2, 3.0);
  const double p = rng.uniform(0.0, 6.283);
  const double c = rng.uniform(-1.0, 1.0);
  const double s = rng.uniform(0.5, 4.0);
  return GridFunction::from_scalar([=](double x) {
    return a * std::sin(w * x + p) * std::exp(-x * x / (s * s)) + c * std::tanh(x / s);
  });
}

Outcome ac10() {
  Rng rng(derive_seed(10, 0));
  double eta_worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double r = rng.uniform(-10.0, 10.0);
    const double s = rng.uniform(-10.0, 10.0);
    const double d = l1_distance_piecewise(eta(r), eta(s), -11.0, 11.0, 2200, {r, s, 0.0});
    eta_worst = std::max(eta_worst, std::abs(d - std::abs(r - s)));
  }

  const std::vector<Weight> shipped{Weight::unit(), Weight::power(1), Weight::power(2),
                                    Weight::max_t_power(2), Weight::exp_decay(1)};
  const GridSpec grid{1, 1, 801, 1.0};
  WeightedSupOptions wopt;
  wopt.max_radius = 256.0;
  double omega_worst = 0.0;
  for (const auto& w : shipped) {
    const auto om = [w](double t) { return w(t); };
    for (int i = 0; i < 100; ++i) {
      const GridFunction f = random_bounded(rng);
      const GridFunction g = random_bounded(rng);
      const double lhs = weighted_sup_norm(phi_omega(f, w) - phi_omega(g, w), om, grid, wopt).value;
      const double rhs = weighted_sup_norm(f - g, [](double) { return 0.0; }, grid, wopt).value;
      omega_worst = std::max(omega_worst, std::abs(lhs - rhs) / std::max(1.0, rhs));
    }
  }

  const CompositionOperator op(builtin_activation("leaky_shifted_paper"), Vector::Ones(1));
  double lin_worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const GridFunction f = random_bounded(rng);
    const GridFunction g = random_bounded(rng);
    const double alpha = rng.uniform(-3.0, 3.0);
    const int n = 1 + i % 8;
    const GridFunction lhs = apply(op, alpha * f + g, n);
    const GridFunction rhs = alpha * apply(op, f, n) + apply(op, g, n);
    for (int k = 0; k < 10; ++k) {
      Vector x(1);
      x(0) = rng.uniform(-10.0, 10.0);
      const Vector a = lhs(x);
      const Vector b = rhs(x);
      lin_worst = std::max(lin_worst, (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff()));
    }
  }
  return {eta_worst < 1e-9 && omega_worst < 1e-9 && lin_worst <= 1e-12,
          "eta=" + fmt(eta_worst) + " phi_omega=" + fmt(omega_worst) + " linearity=" + fmt(lin_worst)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string strip_wall_time(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  j.erase("wall_time_s");
  return j.dump();
}

Outcome ac11(const std::string& cli, const fs::path& configs) {
  if (cli.empty() || !fs::exists(cli)) return {false, "CLI binary not found: " + cli};
  const fs::path work = fs::temp_directory_path() / ("uaplab_ac11_" + std::to_string(::getpid()));
  fs::create_directories(work);
  const std::vector<std::string> commands{"check-activation", "escape",      "transitivity-demo",
                                          "constrained-fit",  "omega-approx", "rate-sweep",
                                          "limitation-demo",  "free-space-tests"};
  int identical = 0;
  std::string failures;
  for (const auto& cmd : commands) {
    const fs::path cfg = configs / (cmd + ".json");
    std::string outputs[2];
    bool ran = true;
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path out = work / (cmd + "_" + std::to_string(rep));
      const std::string line = "\"" + cli + "\" " + cmd + " --config \"" + cfg.string() +
                               "\" --seed 7 --out \"" + out.string() + "\" > /dev/null 2>&1";
      if (std::system(line.c_str()) != 0) {
        ran = false;
        break;
      }
      outputs[rep] = strip_wall_time(slurp(out / (cmd + ".json")));
    }
    if (ran && outputs[0] == outputs[1]) {
      ++identical;
    } else {
      failures += " " + cmd + (ran ? "(differs)" : "(failed)");
    }
  }
  fs::remove_all(work);
  return {identical == static_cast<int>(commands.size()),
          std::to_string(identical) + "/" + std::to_string(commands.size()) + " identical" + failures};
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  fs::path configs = fs::path(UAPLAB_ACCEPTANCE_CONFIGS);
  std::string only;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string key = argv[i];
    if (key == "--cli") cli = argv[i + 1];
    else if (key == "--configs") configs = argv[i + 1];
    else if (key == "--only") only = argv[i + 1];
  }

  const std::vector<Criterion> criteria{
      {"AC1", 1.0, ac1},   {"AC2", 30.0, ac2},   {"AC3", 1.0, ac3},
      {"AC4", 60.0, ac4},  {"AC5", 120.0, ac5},  {"AC6", 120.0, ac6},
      {"AC7", 5.0, ac7},   {"AC8", 5.0, ac8},    {"AC9", 300.0, ac9},
      {"AC10", 30.0, ac10}, {"AC11", 600.0, [&] { return ac11(cli, configs); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && c.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const Error& e) {
      o = {false, std::string("error: ") + e.to_json().dump()};
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.limit_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("%s %s (%.2f s, limit %.0f s) %s%s\n", c.id.c_str(), pass ? "PASS" : "FAIL", secs,
                c.limit_s, o.detail.c_str(), in_time ? "" : " [over time limit]");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
