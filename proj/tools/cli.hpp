#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace utv::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsageError = 1,
  kRuntimeError = 2,
};

/// Runs one `utv` invocation. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace utv::cli
