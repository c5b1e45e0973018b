#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace spanprof {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitMalformed = 2,
    kExitIo = 3,
};

// Entry point of the `spanprof` binary. Every flag can also be given through
// an environment variable named SPANPROF_<FLAG> (upper case, dashes as
// underscores); flags on the command line win.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace spanprof
