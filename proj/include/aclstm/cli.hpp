#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace aclstm::cli {

// Stable process exit codes.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,  // a check did not pass (e.g. gradcheck)
  kConfigError = 2,
  kNumericError = 3,
  kIoError = 4,
};

// Entry point shared by the executable and the tests; args exclude argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace aclstm::cli
