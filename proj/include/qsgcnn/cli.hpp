#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace qsgcnn::cli {

enum ExitCode : int { kSuccess = 0, kUsage = 1, kDataFailure = 2, kNumericFailure = 3 };

/// Bad flags or arguments that parse but make no sense (exit code 1).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Runs one command line (without the program name). Reports go to `out`;
/// failures are a single `qsgcnn: error: <kind>: <message>` line on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qsgcnn::cli
