#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace kmine::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int { kOk = 0, kValidation = 2, kRuntime = 3 };

/// Runs the command line `args` (without the program name) and returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kmine::cli
