#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace uaplab {

enum class ErrorCode {
  kDimensionMismatch,
  kNonFinite,
  kPrecondition,
  kInconclusive,
  kOutOfRange,
  kSingularSystem,
  kNoEscape,
  kVerificationFailed,
  kFitBudgetExceeded,
  kTailSearchFailed,
  kNoControllingWeight,
  kConstraintViolated,
  kConfig,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library. `detail()` carries machine-readable
// context (offending point, measured distances, violated fields, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        nlohmann::json detail = nlohmann::json::object());

  ErrorCode code() const noexcept { return code_; }
  const nlohmann::json& detail() const noexcept { return detail_; }

  nlohmann::json to_json() const;

 private:
  ErrorCode code_;
  nlohmann::json detail_;
};

}  // namespace uaplab
