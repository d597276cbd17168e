#pragma once

// Subcommand CLI: generate, train, adapt, evaluate, early, covercrops.
// Exit codes: 0 success, 1 validation error, 2 I/O error.

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace cropmon::cli {

using json = nlohmann::ordered_json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

// Default parameters of a command, in echo order. Null entries are paths
// that must be supplied unless noted otherwise by the command.
json command_defaults(const std::string& command);
std::vector<std::string> command_names();

// defaults <- file (must only contain known keys of matching type, plus
// "seed" and "out") <- flags. Flags are raw strings parsed by the default's
// type; lists are comma separated.
json resolve_config(const std::string& command, const json& file,
                    const std::vector<std::pair<std::string, std::string>>& flags);

// Full program: parses argv, runs one command, maps errors to exit codes.
int run(int argc, const char* const* argv);

}  // namespace cropmon::cli
