#pragma once

#include <iosfwd>

namespace daa {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitSignal = 3;

/// Entry point of the daalab tool: gen-data | train | eval | monitor | report.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace daa
