#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace settle {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

// Runs one `settle` command; args exclude the program name. Output and
// diagnostics go to the given streams.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace settle
