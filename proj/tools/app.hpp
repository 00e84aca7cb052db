#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fracperim::cli {

enum ExitCode : int { Ok = 0, ConfigFailure = 1, PropertyFailure = 2, NumericalFailure = 3 };

/// Parse `args` (without the program name), run the command and write its
/// result to the configured output file or to `out`. Diagnostics go to
/// `err` as one JSON object.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fracperim::cli
