#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace carpet::cli {

enum ExitCode : int { kOk = 0, kVerifyFailed = 1, kUsage = 2, kIo = 3 };

/// Runs one command line; artifacts go to `out` unless --out names a file.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Hex SHA-256 of a string.
std::string sha256_hex(const std::string& data);

/// %.17g
std::string format_double(double v);

}  // namespace carpet::cli
