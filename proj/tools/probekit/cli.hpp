#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace probekit::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2 };

// Runs one `probekit` invocation. `args` excludes the program name. Normal
// output goes to `out`; diagnostics and error messages go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace probekit::cli
