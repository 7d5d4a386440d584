#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ztnc::cli {

enum ExitCode : int {
  kSuccess = 0,
  kInternal = 1,
  kUsage = 2,
  kCorrupt = 3,
};

// Runs one command line (args excludes the program name). Reports go to
// `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ztnc::cli
