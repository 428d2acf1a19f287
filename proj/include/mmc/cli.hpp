#pragma once

#include <iosfwd>

namespace mmc {

enum ExitCode : int { exit_ok = 0, exit_failed = 1, exit_usage = 2, exit_solver = 3 };

// Parses and runs one subcommand; the JSON report goes to out, diagnostics to err.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mmc
