#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace chainnas {

inline constexpr const char* kVersion = "0.1.0";

/// Entry point shared by the `chainnas` binary and the tests. `args` excludes
/// the program name. Returns the process exit status.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace chainnas
