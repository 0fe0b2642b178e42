#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace icsad::cli {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kUsageError = 1,
  kDataError = 2,
  kNumericError = 3,
};

/// Entry point for `icsad <train|detect|explain|eval|gridsearch> [flags]`.
/// argv[0] is the program name. Diagnostics go to `err` as one line:
///   icsad: error kind=<usage|config|data|numeric> code=<n>: <message>
int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace icsad::cli
