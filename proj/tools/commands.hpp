#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace geobridge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line (without the program name). Never throws; the
/// return value is the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace geobridge::cli
