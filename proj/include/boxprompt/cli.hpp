#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace boxprompt {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitValidation = 1,
    kExitIo = 2,
    kExitContract = 3,
};

/// Environment variable naming a default config file for pipeline and sweep.
inline constexpr const char* kConfigEnvVar = "BOXPROMPT_CONFIG";

/// Runs one subcommand. args excludes the program name. Data goes to out,
/// diagnostics to err.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Shortest round-trip decimal that always shows a fractional part, e.g. "1.0".
std::string format_fraction(double value);

}  // namespace boxprompt
