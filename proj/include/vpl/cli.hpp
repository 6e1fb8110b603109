#pragma once

#include <string>
#include <vector>

namespace vpl {

// Full dispatch for the `vpl` binary. `args` excludes the program name.
// Returns the process exit code: 0 success, 1 usage error, 2 data error,
// 3 numeric failure.
int run_cli(std::vector<std::string> args);

}  // namespace vpl
