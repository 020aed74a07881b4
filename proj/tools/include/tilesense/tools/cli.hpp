#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tilesense::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kFailure = 2 };

/// Runs one `tilesense` invocation. `args` excludes the program name.
/// Diagnostics go to `err`; reports that are not written to a file go to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tilesense::cli
