#pragma once

#include <string>
#include <vector>

namespace renfdi::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kVerification = 3 };

/// Parses the command line, runs one subcommand and maps errors to exit codes.
int run(int argc, char** argv);
/// Same, argument list without the program name.
int run(const std::vector<std::string>& args);

}  // namespace renfdi::cli
