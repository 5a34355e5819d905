#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tsfit::cli {

enum ExitCode : int {
    kOk = 0,
    kInputError = 2,
    kSolverFailure = 3,
    kNotConverged = 4,
};

/// Runs the command line `args` (args[0] is the program name). Normal output
/// goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Turns `key = value` lines of a config file into `--key=value` arguments.
/// Throws tsfit::InputError on unreadable files and section headers.
std::vector<std::string> config_arguments(const std::string& path);

}  // namespace tsfit::cli
