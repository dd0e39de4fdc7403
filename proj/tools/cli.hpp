#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace emeforge::cli {

// Exit codes shared by every subcommand.
enum Exit : int {
  kOk = 0,
  kNoncompliant = 1,
  kUsage = 2,
  kEmeUnsupported = 3,
  kNoClearClientId = 4,
};

// Runs the command line `args` (args[0] is the program name). Reads `in` when
// a file argument is "-".
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err);

}  // namespace emeforge::cli
