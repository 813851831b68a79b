#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace uiscout {

// Exit codes: 0 success, 1 runtime failure, 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Directory holding the bundled fixtures, used for bench defaults.
std::string default_fixture_dir();

}  // namespace uiscout
