#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uaplab/function_space.hpp"

namespace uaplab {

/// Named scalar-profile functions used by configs and tests.
///
/// Accepted forms: "sin", {"name": "sin"}, or a name with parameters:
///   {"name": "constant", "value": 0.3}
///   {"name": "polynomial", "coefficients": [c0, c1, ...]}
///   {"name": "gaussian", "scale": 1.0}
///   {"name": "indicator", "lo": 0, "hi": 1}
///   {"name": "tree", "terms": [[a, b, c], ...]}
/// For m > 1 the profile is applied to the first coordinate, except the
/// radial ones (gaussian, exp_neg_abs) which use ||x||. Output is replicated
/// over `dim_out`.
GridFunction function_from_json(const nlohmann::json& j, int dim_in = 1, int dim_out = 1);

std::vector<std::string> library_function_names();

}  // namespace uaplab
