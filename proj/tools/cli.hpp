#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fpca::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Runs one subcommand (fit, select, decompose, predict, simulate). args
/// excludes the program name. Returns 0 on success, 1 on usage errors and 2 on
/// data or model errors; diagnostics go to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args);

}  // namespace fpca::cli
