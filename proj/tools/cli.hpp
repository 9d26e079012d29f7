#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace monogls::cli {

enum ExitCode : int { ok = 0, usage = 2, estimation = 3, study_breaker = 4 };

/// Runs the command line `args` (without the program name). Results go to
/// `out` unless --out names a file; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace monogls::cli
