#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mfgcn/equilibrium.hpp"
#include "mfgcn/markov_projection.hpp"

namespace mfgcn::checks {

struct MartingaleResult {
    double y0 = 0.0;
    double stderr_ = 0.0;
    double expected = 0.0;
    /// Worst per-step RMS deviation of Z from its exact value along the paths.
    double z_rms_max = 0.0;
};

/// Zero-driver BSDE with terminal x^power; the exact Y_0 is E[X_T^power].
MartingaleResult martingale_case(int power, std::size_t n_paths, std::size_t n_steps, std::uint64_t seed);

struct LqOracleOptions {
    std::size_t n_paths = 20000;
    std::size_t n_steps = 50;
    std::uint64_t seed = 1;
    /// The feedback comparison needs data across |x| <= policy_x_range at
    /// every step, so it runs on its own sample with a spread initial law.
    std::size_t policy_paths = 100000;
    std::size_t policy_degree = 4;
    double policy_x0_std = 0.5;
    double policy_x_range = 2.0;
};

struct LqOracleResult {
    double y0 = 0.0;
    double stderr_ = 0.0;
    double hjb_y0 = 0.0;
    /// max over steps and |x| <= policy_x_range of |alpha_bsde - alpha_hjb|.
    double policy_max_dev = 0.0;
    /// Same deviation with the default quadratic basis on the same sample.
    double policy_max_dev_default_basis = 0.0;
};

/// Scalar LQ problem without interaction (kappa = 0): BSDE against the
/// finite-difference HJB value function.
LqOracleResult lq_hjb_case(const LqOracleOptions& options);

struct TransportOracleResult {
    std::size_t instances = 0;
    double max_lp_vs_quantile = 0.0;
    double max_lp_vs_permutation = 0.0;
};

/// Random one-dimensional instances with at most max_atoms atoms per side:
/// wasserstein_1d against lp_transport, and both against exhaustive
/// permutation search on equal-size uniform instances.
TransportOracleResult transport_oracle_suite(std::size_t instances, std::size_t max_atoms, std::uint64_t seed);

struct MimicExperiment {
    MimicReport report;
    CostGap gap;
    ProjectionResult projection;
};

enum class MimicControl { kBsdeFeedback, kPathDependent };

/// Projects a control in the configured problem against the driftless flow and
/// measures the mimicking error on fresh noise. The path-dependent control is
/// alpha_t = clamp(W_{t/2}); the feedback control is the BSDE best response.
MimicExperiment mimic_experiment(const ProblemSpec& spec, const SolverConfig& config, MimicControl control);

}  // namespace mfgcn::checks
