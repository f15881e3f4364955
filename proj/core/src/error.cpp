#include "uaplab/error.hpp"

namespace uaplab {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kNonFinite: return "non_finite";
    case ErrorCode::kPrecondition: return "precondition";
    case ErrorCode::kInconclusive: return "inconclusive";
    case ErrorCode::kOutOfRange: return "out_of_range";
    case ErrorCode::kSingularSystem: return "singular_system";
    case ErrorCode::kNoEscape: return "no_escape";
    case ErrorCode::kVerificationFailed: return "verification_failed";
    case ErrorCode::kFitBudgetExceeded: return "fit_budget_exceeded";
    case ErrorCode::kTailSearchFailed: return "tail_search_failed";
    case ErrorCode::kNoControllingWeight: return "no_controlling_weight";
    case ErrorCode::kConstraintViolated: return "constraint_violated";
    case ErrorCode::kConfig: return "config";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message, nlohmann::json detail)
    : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

nlohmann::json Error::to_json() const {
  return {{"error", std::string(to_string(code_))},
          {"message", what()},
          {"detail", detail_}};
}

}  // namespace uaplab
