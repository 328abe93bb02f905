#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ipn::cli {

/// Process exit codes; failures also print one line
/// "ipnparse: error: <category>: <message>" on the error stream.
enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kIo = 3,
  kFormat = 4,
  kMode = 5,
  kAlignment = 6,
  kCheckFailed = 7,
};

/// Runs the command line `args` (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ipn::cli
