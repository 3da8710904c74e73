#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ogcp {

/// Exit codes of the command-line front end.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitData = 3,
  kExitNumeric = 4,
};

/// Runs the `ogcp` command line. `args` excludes the program name. Results go
/// to `out`; a failure prints one line to `err` of the form
///   ogcp: error: <kind>: <message>
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace ogcp
