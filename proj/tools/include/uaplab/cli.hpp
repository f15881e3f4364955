#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace uaplab::cli {

std::vector<std::string> command_names();

/// FNV-1a 64 over the canonical (sorted-key, compact) dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

struct CommandOutput {
  nlohmann::json result;
  nlohmann::json tolerances = nlohmann::json::object();
  /// Optional CSV table written next to the result JSON as <command>.csv.
  std::string csv;
};

/// Runs one command on its params. Throws uaplab::Error; config problems use
/// ErrorCode::kConfig with the offending fields in detail["fields"].
CommandOutput run_command(const std::string& command, const nlohmann::json& params,
                          std::uint64_t seed);

/// Parses `config_text`, runs the command and writes <out_dir>/<command>.json.
/// Returns the process exit code: 0 ok, 1 computation failure, 2 config error.
/// Errors are reported on `err` as a single JSON object.
int execute(const std::string& command, const std::string& config_text,
            std::optional<std::uint64_t> seed_override, const std::string& out_dir,
            std::ostream& err);

/// Full command-line entry point.
int main(int argc, char** argv);

}  // namespace uaplab::cli
