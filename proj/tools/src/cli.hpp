#pragma once

#include <string>
#include <vector>

namespace matmuon::cli {

// Full command-line entry point:
//   matmuon <train|stability|probe|convergence|sweep> --config <path> --out <dir>
//           [--check] [--threads N]
// Exit codes: 0 ok, 2 config error, 3 numeric divergence, 4 acceptance
// failure under --check.
int run_cli(const std::vector<std::string>& args);

} // namespace matmuon::cli
