#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace odpp::cli {

using Config = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";

/// Every setting with its default value. Keys absent here are rejected,
/// except inside `priors` tables.
Config default_config();

/// Overlays `user` on `defaults`. Throws ConfigError for unknown keys and
/// for values whose JSON type differs from the default's.
Config merge_config(const Config& defaults, const Config& user);

/// Applies `a.b.c=value` to `tree`. The value is parsed as JSON when
/// possible, otherwise taken as a string.
void apply_override(Config& tree, const std::string& assignment);

/// Exit status for an exception thrown by a command.
int exit_code_for(const std::exception& e);

/// Runs one command line (without the program name). Returns the exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace odpp::cli
