#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace drpn::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,   // bad arguments or configuration
  kExitData = 2,    // unreadable or inconsistent data, numeric failure
  kExitCheck = 3,   // a verification check failed
};

/// Runs the command line (args[0] is the program name). Progress goes to
/// `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace drpn::cli
