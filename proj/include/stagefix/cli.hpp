#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace stagefix::cli {

/// Exit codes. Data problems inside a run (a backend failure on one
/// instance, a missing manifest) do not change the exit code.
inline constexpr int kOk = 0;
inline constexpr int kDataError = 1;
inline constexpr int kConfigError = 2;

/// Runs one subcommand. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace stagefix::cli
