#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace ccrobust::cli {

enum ExitCode : int {
    Success = 0,
    Failure = 1,
    ConfigError = 2,
    Undersampled = 3,
    SolverNotOptimal = 4,
};

std::string_view version() noexcept;

/// Runs the command line `args` (without the program name). Standard output
/// goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace ccrobust::cli
