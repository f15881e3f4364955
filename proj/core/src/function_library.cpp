#include "uaplab/function_library.hpp"

#include <cmath>
#include <functional>

#include "uaplab/error.hpp"
#include "uaplab/network.hpp"

namespace uaplab {

namespace {

using Profile = std::function<double(double)>;

GridFunction from_profile(Profile p, int dim_in, int dim_out, bool radial, bool unbounded) {
  if (radial) return GridFunction::radial(dim_in, dim_out, std::move(p));
  return GridFunction(
      dim_in, dim_out,
      [p = std::move(p), dim_out](const Vector& x) {
        return Vector::Constant(dim_out, p(x(0))).eval();
      },
      unbounded);
}

}  // namespace

std::vector<std::string> library_function_names() {
  return {"zero",     "identity", "sin",        "cos",       "exp_neg_abs", "gaussian",
          "x_exp_neg_sq_plus_x",  "exp_sq",     "constant",  "polynomial",  "tree",
          "indicator"};
}

GridFunction function_from_json(const nlohmann::json& j, int dim_in, int dim_out) {
  if (dim_in < 1 || dim_out < 1) {
    throw Error(ErrorCode::kConfig, "function shape must be positive",
                {{"fields", {"dim_in", "dim_out"}}});
  }
  std::string name;
  if (j.is_string()) {
    name = j.get<std::string>();
  } else if (j.is_object() && j.contains("name")) {
    name = j.at("name").get<std::string>();
  } else {
    throw Error(ErrorCode::kConfig, "function must be a name or an object with a name",
                {{"fields", {"name"}}});
  }
  const nlohmann::json p = j.is_object() ? j : nlohmann::json::object();

  if (name == "zero") return GridFunction::zero(dim_in, dim_out);
  if (name == "identity") {
    return from_profile([](double x) { return x; }, dim_in, dim_out, false, true);
  }
  if (name == "sin") return from_profile([](double x) { return std::sin(x); }, dim_in, dim_out, false, false);
  if (name == "cos") return from_profile([](double x) { return std::cos(x); }, dim_in, dim_out, false, false);
  if (name == "exp_neg_abs") {
    return from_profile([](double r) { return std::exp(-r); }, dim_in, dim_out, true, false);
  }
  if (name == "gaussian") {
    const double s = p.value("scale", 1.0);
    if (!(s > 0.0)) throw Error(ErrorCode::kConfig, "gaussian scale must be positive", {{"fields", {"scale"}}});
    return from_profile([s](double r) { return std::exp(-(r * r) / (s * s)); }, dim_in, dim_out, true, false);
  }
  if (name == "x_exp_neg_sq_plus_x") {
    return from_profile([](double x) { return x * std::exp(-x * x) + x; }, dim_in, dim_out, false, true);
  }
  if (name == "exp_sq") {
    return from_profile([](double x) { return std::exp(x * x); }, dim_in, dim_out, false, true);
  }
  if (name == "constant") {
    if (!p.contains("value")) throw Error(ErrorCode::kConfig, "constant needs a value", {{"fields", {"value"}}});
    return GridFunction::constant(dim_in, Vector::Constant(dim_out, p.at("value").get<double>()));
  }
  if (name == "polynomial") {
    if (!p.contains("coefficients")) {
      throw Error(ErrorCode::kConfig, "polynomial needs coefficients", {{"fields", {"coefficients"}}});
    }
    const auto c = p.at("coefficients").get<std::vector<double>>();
    return from_profile(
        [c](double x) {
          double acc = 0.0;
          for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
          return acc;
        },
        dim_in, dim_out, false, c.size() > 1);
  }
  if (name == "indicator") {
    const double lo = p.value("lo", 0.0);
    const double hi = p.value("hi", 1.0);
    if (!(hi > lo)) throw Error(ErrorCode::kConfig, "indicator needs lo < hi", {{"fields", {"lo", "hi"}}});
    return from_profile([lo, hi](double x) { return (x > lo && x < hi) ? 1.0 : 0.0; }, dim_in,
                        dim_out, false, false);
  }
  if (name == "tree") {
    TreeFunction t;
    for (const auto& term : p.at("terms")) {
      t.terms.push_back({term.at(0).get<double>(), term.at(1).get<double>(), term.at(2).get<double>()});
    }
    t.validate();
    return from_profile([t](double x) { return t.eval(x); }, dim_in, dim_out, false, false);
  }
  throw Error(ErrorCode::kConfig, "unknown function", {{"fields", {"name"}}, {"value", name}});
}

}  // namespace uaplab
