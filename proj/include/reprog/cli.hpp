#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace reprog {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;   // bad flags, schema violations, refused preconditions
inline constexpr int kExitRuntime = 3;  // I/O, data, numeric and transport failures

// Entry point of the `reprog` tool. args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace reprog
