#include "uaplab/cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

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

namespace uaplab::cli {

using nlohmann::json;

namespace {

// Collects every missing or invalid field before failing.
class FieldCheck {
 public:
  explicit FieldCheck(const json& params) : params_(params) {}

  void require(const char* key) {
    if (!params_.contains(key)) bad_.push_back(key);
  }
  void require_any(std::initializer_list<const char*> keys) {
    for (const char* k : keys) {
      if (params_.contains(k)) return;
    }
    bad_.push_back(*keys.begin());
  }
  void positive(const char* key) {
    if (params_.contains(key) && !(params_.at(key).is_number() && params_.at(key).get<double>() > 0.0)) {
      bad_.push_back(key);
    }
  }
  void done() const {
    if (!bad_.empty()) throw Error(ErrorCode::kConfig, "invalid params", {{"fields", bad_}});
  }

 private:
  const json& params_;
  std::vector<std::string> bad_;
};

ActivationSpec activation_param(const json& p, const char* fallback = nullptr) {
  if (p.contains("activation")) return activation_from_json(p.at("activation"));
  if (p.contains("name")) return activation_from_json(p.at("name"));
  if (fallback) return builtin_activation(fallback);
  throw Error(ErrorCode::kConfig, "missing activation", {{"fields", {"activation"}}});
}

Vector vector_param(const json& v, int dim) {
  if (v.is_number()) return Vector::Constant(dim, v.get<double>());
  const auto xs = v.get<std::vector<double>>();
  if (static_cast<int>(xs.size()) != dim) {
    throw Error(ErrorCode::kConfig, "vector length differs from the input dimension",
                {{"fields", {"b"}}, {"expected", dim}, {"got", xs.size()}});
  }
  return Eigen::Map<const Vector>(xs.data(), dim);
}

CompositionOperator operator_param(const json& p, const ActivationSpec& act, int m) {
  const Vector b = vector_param(p.value("b", json(1.0)), m);
  if (p.contains("A")) {
    const auto rows = p.at("A").get<std::vector<std::vector<double>>>();
    Matrix a(m, m);
    if (static_cast<int>(rows.size()) != m) throw Error(ErrorCode::kConfig, "A must be m x m", {{"fields", {"A"}}});
    for (int i = 0; i < m; ++i) {
      if (static_cast<int>(rows[static_cast<std::size_t>(i)].size()) != m) {
        throw Error(ErrorCode::kConfig, "A must be m x m", {{"fields", {"A"}}});
      }
      for (int k = 0; k < m; ++k) a(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    }
    return CompositionOperator(act, a, b);
  }
  return CompositionOperator(act, b);
}

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

CommandOutput check_activation(const json& p, std::uint64_t) {
  FieldCheck fc(p);
  fc.require_any({"name", "activation"});
  fc.positive("search_radius");
  fc.done();
  const ActivationSpec act = activation_param(p);
  const auto v = classify(act, p.value("search_radius", 1e6));
  return {{{"activation", to_json(act)}, {"verdict", to_json(v)}}, json::object(), ""};
}

CommandOutput escape(const json& p, std::uint64_t) {
  FieldCheck fc(p);
  fc.require_any({"name", "activation"});
  fc.require("K_radius");
  fc.positive("K_radius");
  fc.positive("guard_radius");
  fc.done();
  const int m = p.value("m", 1);
  const CompositionOperator op = operator_param(p, activation_param(p), m);
  const double k = p.at("K_radius").get<double>();
  const double guard = p.value("guard_radius", k);
  const int n = escape_time(op, k, guard, p.value("max_N", 10000));
  const Box box = iterate_box(op, k, n);
  return {{{"N", n}, {"K_radius", k}, {"guard_radius", guard},
           {"box", {{"lo", vec_json(box.lo)}, {"hi", vec_json(box.hi)}}}},
          json::object(), ""};
}

CommandOutput transitivity_demo(const json& p, std::uint64_t seed) {
  FieldCheck fc(p);
  fc.require_any({"name", "activation"});
  fc.require("g");
  fc.require("f");
  fc.require("eps");
  fc.require("delta");
  fc.positive("eps");
  fc.positive("delta");
  fc.done();
  const int m = p.value("m", 1);
  const int n_out = p.value("n", 1);
  const CompositionOperator op = operator_param(p, activation_param(p), m);
  const GridFunction g = function_from_json(p.at("g"), m, n_out);
  const GridFunction f = function_from_json(p.at("f"), m, n_out);
  const double eps = p.at("eps").get<double>();
  const double delta = p.at("delta").get<double>();
  TransitivityOptions opt;
  opt.blend_margin = p.value("blend_margin", opt.blend_margin);
  opt.max_n = p.value("max_N", opt.max_n);
  opt.verify_terms = p.value("verify_terms", opt.verify_terms);
  if (p.contains("verify_grid")) opt.verify_grid = p.at("verify_grid").get<GridSpec>();
  if (p.contains("fitter")) {
    ShallowFitConfig c = shallow_fit_from_json(p.at("fitter"));
    c.seed = seed;
    opt.fitter = c;
  }
  const std::string metric = p.value("metric", std::string("d_ucc"));
  TransitivityCertificate cert;
  if (metric == "l1") {
    const Measure1D mu = p.contains("mu") ? measure_from_json(p.at("mu")) : Measure1D::gaussian();
    opt.quad_nodes = p.value("quad_nodes", opt.quad_nodes);
    cert = l1_transitive_approximant(op, g, f, mu, eps, delta, opt);
  } else if (metric == "d_ucc") {
    cert = construct_transitive_approximant(op, g, f, eps, delta, opt);
  } else {
    throw Error(ErrorCode::kConfig, "metric must be d_ucc or l1", {{"fields", {"metric"}}});
  }
  return {{{"certificate", to_json(cert)}}, {{"eps", eps}, {"delta", delta}}, ""};
}

CommandOutput constrained_fit(const json& p, std::uint64_t seed) {
  FieldCheck fc(p);
  fc.require_any({"name", "activation"});
  fc.require("f");
  fc.require("eps");
  fc.positive("eps");
  fc.positive("delta");
  if (!p.contains("constraints")) {
    fc.require("f_hat");
    fc.require("delta");
  }
  fc.done();
  const int m = p.value("m", 1);
  const int n_out = p.value("n", 1);
  const CompositionOperator op = operator_param(p, activation_param(p), m);
  const GridFunction f = function_from_json(p.at("f"), m, n_out);
  const double eps = p.at("eps").get<double>();
  ConstrainedFitOptions opt =
      p.contains("options") ? constrained_options_from_json(p.at("options")) : ConstrainedFitOptions{};
  opt.fit.seed = seed;
  if (p.contains("constraints")) {
    std::vector<ConstraintFunctional> cons;
    for (const auto& c : p.at("constraints")) cons.push_back(constraint_from_json(c));
    const json witness = p.contains("f0") ? p.at("f0") : p.value("f_hat", json("zero"));
    const GridFunction f0 = function_from_json(witness, m, n_out);
    const auto r = assemble_constrained(cons, f0, f, eps, op, opt);
    return {{{"report", to_json(r)}}, {{"eps", eps}}, ""};
  }
  const double delta = p.at("delta").get<double>();
  const GridFunction f_hat = function_from_json(p.at("f_hat"), m, n_out);
  const auto r = assemble_prescribed(f_hat, f, eps, delta, op, opt);
  return {{{"report", to_json(r)}}, {{"eps", eps}, {"delta", delta}}, ""};
}

CommandOutput omega_approx(const json& p, std::uint64_t seed) {
  FieldCheck fc(p);
  fc.require("f");
  fc.require("omega");
  fc.require("eps");
  fc.positive("eps");
  fc.positive("measure_radius");
  fc.done();
  const int m = p.value("m", 1);
  const GridFunction f = function_from_json(p.at("f"), m, p.value("n", 1));
  const WeightFamily omega = weight_family_from_json(p.at("omega"));
  VanishingOptions opt = p.contains("options") ? vanishing_options_from_json(p.at("options")) : VanishingOptions{};
  opt.fit.seed = seed;
  const double eps = p.at("eps").get<double>();
  const auto r = approximate_growth(f, omega, eps, activation_param(p, "relu"), opt,
                                    p.value("measure_radius", 30.0));
  return {to_json(r), {{"eps", eps}}, ""};
}

CommandOutput rate_sweep_cmd(const json& p, std::uint64_t seed) {
  FieldCheck fc(p);
  fc.require("target");
  fc.require("n_values");
  fc.done();
  const GridFunction target = function_from_json(p.at("target"));
  const Measure1D mu = p.contains("mu") ? measure_from_json(p.at("mu")) : Measure1D::gaussian();
  const std::string basis = p.value("basis", std::string("trees"));
  const double lo = p.value("basis_lo", -0.5);
  const double hi = p.value("basis_hi", 1.5);
  BasisSampler sampler;
  if (basis == "trees") {
    sampler = tree_basis(lo, hi);
  } else if (basis == "ramps") {
    sampler = ramp_basis(lo, hi);
  } else {
    throw Error(ErrorCode::kConfig, "basis must be trees or ramps", {{"fields", {"basis"}}});
  }
  const CompositionOperator op = operator_param(p, activation_param(p, "leaky_rescaled_paper"), 1);
  RateSweepOptions opt;
  opt.seed = seed;
  opt.max_iter = p.value("max_iter", opt.max_iter);
  opt.quad_nodes = p.value("quad_nodes", opt.quad_nodes);
  const auto r = rate_sweep(sampler, target, mu, p.at("n_values").get<std::vector<int>>(),
                            p.value("N", 0), op, opt);
  return {to_json(r), json::object(), rate_sweep_csv(r)};
}

CommandOutput limitation_demo(const json& p, std::uint64_t) {
  const int m = p.value("dim_in", 1);
  const int n = p.value("dim_out", 1);
  std::vector<std::pair<std::string, GridFunction>> samples;
  const json list = p.value("samples", json::array({json{{"name", "constant"}, {"value", 0.5}}, json("identity")}));
  for (const auto& s : list) {
    const std::string label = s.is_string() ? s.get<std::string>() : s.value("label", s.value("name", std::string("sample")));
    samples.emplace_back(label, function_from_json(s, m, n));
  }
  const auto r = demonstrate_limitation(samples, m, n, p.value("radius", 50.0), p.value("points", 20001),
                                        p.value("c_lo", -2.0), p.value("c_hi", 2.0),
                                        p.value("c_points", 4001));
  return {to_json(r), {{"best_error_target", 0.5}, {"tolerance", 0.01}}, ""};
}

CommandOutput free_space_tests(const json& p, std::uint64_t seed) {
  const int pairs = p.value("pairs", 1000);
  const double range = p.value("range", 10.0);
  if (pairs < 1 || !(range > 0.0)) {
    throw Error(ErrorCode::kConfig, "pairs and range must be positive", {{"fields", {"pairs", "range"}}});
  }
  Rng rng(derive_seed(seed, 0));
  double eta_exact = 0.0;
  double eta_quadrature = 0.0;
  for (int i = 0; i < pairs; ++i) {
    const double r = rng.uniform(-range, range);
    const double s = rng.uniform(-range, range);
    eta_exact = std::max(eta_exact, std::abs(eta_l1_distance(r, s) - std::abs(r - s)));
    const double q = l1_distance_piecewise(eta(r), eta(s), -range - 1.0, range + 1.0,
                                           static_cast<int>(100 * (range + 1.0)), {r, s, 0.0});
    eta_quadrature = std::max(eta_quadrature, std::abs(q - std::abs(r - s)));
  }
  const GridFunction f = GridFunction::from_scalar([](double x) { return std::sin(x); });
  const GridFunction g = GridFunction::from_scalar([](double x) { return x * x; });
  FormalCombination c1;
  c1.add(0.3, f);
  c1.add(-1.2, g);
  FormalCombination c2;
  c2.add(2.0, g);
  const double a = rng.uniform(-2.0, 2.0);
  const double b = rng.uniform(-2.0, 2.0);
  const GridFunction lhs = rho(c1.scaled(a) + c2.scaled(b));
  const GridFunction rhs = a * rho(c1) + b * rho(c2);
  const GridFunction single = rho(FormalCombination::single(f));
  FormalCombination split;
  split.add(0.5, f);
  split.add(0.5, f);
  const GridFunction halves = rho(split);
  double linearity = 0.0;
  double left_inverse = 0.0;
  double representation = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(-range, range);
    linearity = std::max(linearity, std::abs(lhs.scalar(x) - rhs.scalar(x)));
    left_inverse = std::max(left_inverse, std::abs(single.scalar(x) - f.scalar(x)));
    representation = std::max(representation, std::abs(halves.scalar(x) - f.scalar(x)));
  }
  const double tol = 1e-9;
  return {{{"pairs", pairs},
           {"eta_isometry_max_dev_exact", eta_exact},
           {"eta_isometry_max_dev_quadrature", eta_quadrature},
           {"rho_linearity_max_dev", linearity},
           {"rho_left_inverse_max_dev", left_inverse},
           {"rho_split_max_dev", representation},
           {"pass", eta_exact < tol && eta_quadrature < tol && linearity < 1e-12 &&
                        left_inverse == 0.0 && representation < 1e-12}},
          {{"eta_isometry", tol}, {"rho", 1e-12}},
          ""};
}

using Handler = CommandOutput (*)(const json&, std::uint64_t);

Handler handler_for(const std::string& command) {
  if (command == "check-activation") return check_activation;
  if (command == "escape") return escape;
  if (command == "transitivity-demo") return transitivity_demo;
  if (command == "constrained-fit") return constrained_fit;
  if (command == "omega-approx") return omega_approx;
  if (command == "rate-sweep") return rate_sweep_cmd;
  if (command == "limitation-demo") return limitation_demo;
  if (command == "free-space-tests") return free_space_tests;
  return nullptr;
}

void report(std::ostream& err, const json& error) { err << json{{"error", error}}.dump() << '\n'; }

}  // namespace

std::vector<std::string> command_names() {
  return {"check-activation", "escape",       "transitivity-demo", "constrained-fit",
          "omega-approx",     "rate-sweep",   "limitation-demo",   "free-space-tests"};
}

std::string config_hash(const json& config) {
  const std::string text = config.dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

CommandOutput run_command(const std::string& command, const json& params, std::uint64_t seed) {
  const Handler h = handler_for(command);
  if (!h) throw Error(ErrorCode::kConfig, "unknown command", {{"fields", {"command"}}, {"value", command}});
  if (!params.is_object()) throw Error(ErrorCode::kConfig, "params must be an object", {{"fields", {"params"}}});
  try {
    return h(params, seed);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("bad parameter value: ") + e.what(),
                {{"fields", {"params"}}, {"json_error_id", e.id}});
  }
}

int execute(const std::string& command, const std::string& config_text,
            std::optional<std::uint64_t> seed_override, const std::string& out_dir,
            std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  json config;
  try {
    config = json::parse(config_text);
  } catch (const json::parse_error& e) {
    report(err, {{"error", "config"}, {"message", "malformed JSON"}, {"detail", {{"parse_error", e.what()}, {"byte", e.byte}}}});
    return 2;
  }
  try {
    std::vector<std::string> bad;
    if (!config.is_object()) {
      throw Error(ErrorCode::kConfig, "config must be a JSON object", {{"fields", {"config"}}});
    }
    if (config.contains("command") && config.at("command") != command) bad.push_back("command");
    if (config.contains("params") && !config.at("params").is_object()) bad.push_back("params");
    if (seed_override) {
      config["seed"] = *seed_override;
    } else if (!config.contains("seed") || !config.at("seed").is_number_unsigned()) {
      bad.push_back("seed");
    }
    if (!handler_for(command)) bad.push_back("command");
    if (!bad.empty()) throw Error(ErrorCode::kConfig, "invalid config", {{"fields", bad}});
    config["command"] = command;
    if (!config.contains("params")) config["params"] = json::object();

    const std::uint64_t seed = config.at("seed").get<std::uint64_t>();
    const CommandOutput out = run_command(command, config.at("params"), seed);

    std::filesystem::path dir = out_dir.empty() ? std::filesystem::path(config.value("output_path", std::string("."))) : std::filesystem::path(out_dir);
    std::filesystem::create_directories(dir);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const json doc{{"command", command},
                   {"config", config},
                   {"config_hash", config_hash(config)},
                   {"seed", seed},
                   {"result", out.result},
                   {"tolerances", out.tolerances},
                   {"wall_time_s", wall}};
    std::ofstream(dir / (command + ".json")) << doc.dump(2) << '\n';
    if (!out.csv.empty()) std::ofstream(dir / (command + ".csv")) << out.csv;
    return 0;
  } catch (const Error& e) {
    report(err, e.to_json());
    return e.code() == ErrorCode::kConfig ? 2 : 1;
  } catch (const json::exception& e) {
    report(err, {{"error", "config"}, {"message", e.what()}});
    return 2;
  } catch (const std::exception& e) {
    report(err, {{"error", "internal"}, {"message", e.what()}});
    return 1;
  }
}

int main(int argc, char** argv) {
  CLI::App app{"uaplab: numerical experiments on universal approximation"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  for (const auto& name : command_names()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--seed", seed, "overrides the config seed");
    sub->add_option("--out", out_dir, "output directory");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  std::ifstream in(config_path);
  if (!in) {
    report(std::cerr, {{"error", "config"}, {"message", "cannot read config"}, {"detail", {{"fields", {"config"}}, {"path", config_path}}}});
    return 2;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return execute(command, ss.str(), seed, out_dir, std::cerr);
}

}  // namespace uaplab::cli
