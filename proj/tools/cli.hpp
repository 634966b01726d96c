#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kgv::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

// Runs the kgv command line with `args` (without the program name). Data goes
// to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kgv::cli
