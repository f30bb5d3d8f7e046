#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "tdsafe/model/system.hpp"

namespace tdsafe::model {

// Build a problem from a JSON configuration document. Throws ConfigError with
// a message naming the offending key.
Problem load_problem(const nlohmann::json& config);
Problem load_problem_file(const std::filesystem::path& path);

// Same checks as the loader, applied to a programmatically built system.
void validate(const System& sys);

// Stable hexadecimal hash of a JSON document (sorted keys).
std::string fingerprint_of(const nlohmann::json& doc);

}  // namespace tdsafe::model
