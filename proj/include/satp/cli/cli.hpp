#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace satp {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitDivergence = 3;

// Stable artifact names under --out.
std::string metrics_filename(const std::string& method);
std::string cutoff_filename(const std::string& method, const std::string& metric);
std::string checkpoint_filename(const std::string& stage, std::size_t member = 0);

// Runs one subcommand. args excludes the program name. Normal output goes
// to out, progress and error messages to err.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

}  // namespace satp
