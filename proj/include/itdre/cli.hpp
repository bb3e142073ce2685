#pragma once

#include <iosfwd>

namespace itdre::cli {

/// Exit codes: 0 success, 1 runtime or numerical failure, 2 usage or config error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace itdre::cli
