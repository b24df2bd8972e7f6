#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace countforge::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;       ///< ran to completion but the checked property did not hold
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitZeroCount = 3;
inline constexpr int kExitNumerical = 4;

/// Runs the command line `args` (args[0] is the program name). Reports go to
/// `out`, diagnostics to `err`; the return value is the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace countforge::cli
