#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace btltrack {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitDivergence = 3 };

/// Entry point of the `btltrack` command; args excludes the program name.
/// Subcommands: simulate, sweep, stability, table2.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace btltrack
