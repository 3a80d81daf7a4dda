#ifndef PROXYFAIR_CLI_HPP
#define PROXYFAIR_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace proxyfair {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitInvalid = 2,
    kExitDegraded = 3,
};

/**
 * Entry point of the `proxyfair` command line. `args[0]` is the program
 * name. Subcommands: reduce, cluster, tune, sample, evaluate, synth.
 */
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace proxyfair

#endif
