#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace instrexp::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kBackend = 3 };

/// Run one command line (without the program name). Output files are written
/// as a side effect; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args);

/// sha256 of a file's bytes as "sha256:<hex>".
std::string file_digest(const std::string& path);

}  // namespace instrexp::cli
