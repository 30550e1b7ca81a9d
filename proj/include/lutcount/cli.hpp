#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lutcount::cli {

inline constexpr const char* tool_version = "1.0.0";

/**
 * Runs the command-line driver. `args` excludes the program name.
 * Returns the process exit code: 0 on success, 1 when any row or run failed,
 * 2 for usage errors.
 */
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lutcount::cli
