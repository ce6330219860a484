#pragma once

#include <string>
#include <vector>

namespace ofdmtoa {

const char* tool_version();

/// Exit codes of run_cli.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2, kExitConfig = 3 };

/// Entry point of the `ofdmtoa` command: subcommands bounds, zzb, estimate, mc, prs-search,
/// leo and validate. Diagnostics go to stderr.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace ofdmtoa
