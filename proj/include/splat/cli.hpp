#pragma once

#include <ostream>

namespace splat {

/// Exit codes of the `splat` tool.
enum ExitCode : int { kExitOk = 0, kExitSortMismatch = 1, kExitUsage = 2, kExitDevice = 3 };

/// Entry point of `splat render|bench|sort-test`; returns the exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace splat
