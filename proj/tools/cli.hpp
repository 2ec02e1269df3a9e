#pragma once

#include <string>
#include <vector>

namespace kktplan::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitInfeasible = 3;

/// Runs one command line; args exclude the program name.
int run(const std::vector<std::string>& args);

/// Path of the manifest written next to an output.
std::string manifest_path(const std::string& out);

}  // namespace kktplan::cli
