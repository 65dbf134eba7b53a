#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hazeprior {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitData = 2,
    kExitInternal = 3,
};

/// Runs one command line (args excludes the program name). Scores go to
/// `out`; logs and error messages go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_cli(int argc, char** argv);

}  // namespace hazeprior
