#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tsnmt {

enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitData = 3, kExitNumeric = 4 };

// Entry point of the `tsnmt` tool. args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tsnmt
