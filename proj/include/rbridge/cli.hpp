#pragma once

#include <ostream>

namespace rbridge {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitNumerical = 2,
    kExitIo = 3,
    kExitCheckFailed = 4,
};

/// Entry point of the rbridge tool; diagnostics go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& err);

}  // namespace rbridge
