#pragma once

#include <ostream>

namespace bugsmc::cli {

/// Exit status contract of the command-line tool.
enum ExitCode : int {
  kOk = 0,
  kParseFailure = 2,
  kConfigFailure = 3,     // compile errors, bad data, bad flags
  kDiagnosisFailure = 4,  // smc ran, but the SESS check failed
  kRuntimeFailure = 5,    // inference failed
};

/// Entry point shared by the executable and the tests.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bugsmc::cli
