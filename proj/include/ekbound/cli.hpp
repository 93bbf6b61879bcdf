#pragma once

#include <iosfwd>
#include <string>

namespace ekbound::cli {

enum ExitCode : int { Ok = 0, NumericalFailure = 1, Usage = 2, Infeasible = 3, Unresolved = 4 };

/// Shortest round-trip decimal form.
std::string format_number(double x);

/// Runs the ekbound command line. Output goes to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ekbound::cli
