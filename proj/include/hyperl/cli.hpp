#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hyperl {

// Subcommands: train, eval, gen-reference, stats, export-traj. Returns 0 on
// success, 2 for invalid configuration or arguments, 1 for runtime failures.
// Failures print one line to `err`:
//   error: exit=<code> kind=<config|runtime> message=<text>
int parse_and_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int parse_and_dispatch(int argc, char** argv);

}  // namespace hyperl
