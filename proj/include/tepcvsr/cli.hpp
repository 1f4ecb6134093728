#pragma once

#include <iosfwd>

namespace tepcvsr {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,  // oracle mismatch, insecure plan, audit failure
  kExitInput = 2,
  kExitBackend = 3,
  kExitTimeLimit = 4,
};

/// Entry point of the tepcvsr tool (subcommands screen, plan, verify, oracle).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tepcvsr
