#pragma once

// Command-line front end. `run` parses argv, executes one subcommand and
// returns the process exit code: 0 success, 1 runtime or numerical failure,
// 2 usage or configuration error.

#include <iosfwd>

namespace cdyn::cli {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cdyn::cli
