#pragma once

#include <iosfwd>

namespace owl::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitConfig = 2,
  kExitRuntime = 3,
  kExitSchema = 4,
};

/// Entry point of the owl tool, callable in-process.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace owl::cli
