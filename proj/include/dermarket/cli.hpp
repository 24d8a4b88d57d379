#pragma once

#include <iosfwd>

namespace dermarket::cli {

enum ExitCode : int {
    kOk = 0,
    kValidation = 1,
    kSolver = 2,
    kUsage = 64,
};

/// Runs one subcommand. Diagnostics and logs go to `err`, results to `out`.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dermarket::cli
