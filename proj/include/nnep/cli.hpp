#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nnep {

enum ExitCode { kExitOk = 0, kExitUsage = 1, kExitConfig = 2, kExitData = 3, kExitDiverged = 4 };

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nnep
