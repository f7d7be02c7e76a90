#pragma once

// Command-line driver: simulate-forward, solve, verify and sweep. Every run
// writes into a fresh directory under --out with a manifest.json (deterministic
// for a given config and seed), run_info.json (timestamps) and config.json.

#include <iosfwd>

namespace halfline {

enum ExitCode : int { kExitPass = 0, kExitPropertyFailure = 1, kExitConfigError = 2, kExitNumericalFailure = 3 };

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace halfline
