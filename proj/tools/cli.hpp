#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mfgcn::cli {

/// Exit codes of every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitNotConverged = 2;

/// Environment variable consulted for the worker count when --threads is absent.
inline constexpr const char* kThreadsEnv = "MFGCN_THREADS";

/// Runs one subcommand: solve, phi, bsde-check, w1-oracle, mimic-check, validate.
/// args excludes the program name.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mfgcn::cli
