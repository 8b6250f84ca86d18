#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace splitlogit::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsage = 1,
  kData = 2,
  kNumerical = 3,
};

/// Entry point shared by the `splitlogit` binary and the tests.
/// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace splitlogit::cli
