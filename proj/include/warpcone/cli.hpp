#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace warpcone::cli {

enum ExitCode : int {
    kOk = 0,
    kConfigError = 2,
    kEvaluationError = 3,
    kHypothesesFail = 4,
    kMissingBundle = 5,
    kVerificationFailed = 6,
};

/// Runs one command (classify, solve, verify, export). `args` excludes the
/// program name. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace warpcone::cli
