#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace groundcheck {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitValidation = 2,
  kExitNumeric = 3,
};

/// Runs one command. `args` excludes the program name. Normal output goes to
/// `out`; failures print one `groundcheck: error kind=...` line to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace groundcheck
