#pragma once

#include <iosfwd>

namespace rkf {

/// Exit codes: 0 success, 1 config/argument validation, 2 runtime or numerical
/// failure, 64 usage error (unknown subcommand, malformed flags).
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitUsage = 64;

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rkf
