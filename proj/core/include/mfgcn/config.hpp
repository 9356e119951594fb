#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mfgcn/equilibrium.hpp"
#include "mfgcn/problem_model.hpp"

namespace mfgcn {

struct OutputConfig {
    std::string out_dir = "out";
    bool write_flow = true;
    bool write_policy = true;
};

/// Parsed run configuration. The file is line oriented:
///
///   # comment
///   [problem]
///   family = lq
///   interaction = 1.0
///   [solver]
///   n_paths = 20000
///   partition = 0, 0.5, 1
///   [output]
///   out_dir = results
///
/// Unknown sections or keys and out-of-range values raise ConfigError with
/// the offending line number.
struct RunConfig {
    std::string family = "lq";
    FamilyParameters problem_params;
    SolverConfig solver;
    OutputConfig output;
    /// Every "section.key = value" in file order, for run manifests.
    std::vector<std::pair<std::string, std::string>> entries;

    ProblemSpec build_problem() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Keys accepted in the [solver] section.
const std::vector<std::string>& solver_keys();

}  // namespace mfgcn
