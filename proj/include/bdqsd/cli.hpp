#pragma once

#include <string>
#include <vector>

namespace bdqsd {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitNumerical = 2,
  kExitIo = 3,
};

/// Runs one subcommand: solve | simulate | fv | qprocess | check | converge |
/// certify. Errors are printed to stderr and mapped to an exit code.
int dispatch(int argc, const char* const* argv);

/// Same, with argv[0] supplied.
int dispatch(const std::vector<std::string>& args);

/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirVariable = "BDQSD_OUT_DIR";

}  // namespace bdqsd
