#pragma once

#include <ostream>

namespace flick::cli {

/// Exit codes of the flick binary.
enum ExitCode : int { ok = 0, bad_arguments = 2, data_error = 3, numeric_error = 4 };

/// Entry point shared by the binary and the tests. Subcommands: synth,
/// cluster, refine, train, eval, run.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace flick::cli
