#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mfgcn/bsde_solver.hpp"
#include "mfgcn/markov_projection.hpp"
#include "mfgcn/measure_flow.hpp"

namespace mfgcn {

struct SolverConfig {
    std::size_t n_paths = 20000;
    std::size_t n_steps = 50;
    FlowOptions flow;
    BsdeOptions bsde;
    double damping = 0.5;
    std::size_t max_iters = 30;
    double tol = 0.05;
    /// Order of the flow metric d_M.
    double q = 2.0;
    /// Halve the damping after this many consecutive non-decreasing residuals.
    std::size_t stall_window = 5;
    double min_damping = 1.0 / 64.0;
    std::uint64_t seed = 1;
    std::uint64_t eval_seed = 2;
    bool project = true;
    ProjectionOptions projection;

    /// Throws std::invalid_argument for out-of-range settings.
    void validate() const;
};

/// Driftless particle cloud and the noise that generated it.
struct EstimationSample {
    std::shared_ptr<const PathBundle> paths;
    std::shared_ptr<const NoiseBundle> noise;
};

EstimationSample make_estimation_sample(const ProblemSpec& spec, std::size_t n_paths, std::size_t n_steps,
                                        std::uint64_t seed);

/// One application of m -> Phi(m): best response to m by BSDE, then the
/// conditional law of the optimally controlled state by Girsanov reweighting.
struct PhiResult {
    std::shared_ptr<const ConditionalMeasureFlow> flow;
    std::shared_ptr<const BsdeSolution> solution;
    GirsanovWeights weights;
    std::size_t clamp_count = 0;
};

PhiResult apply_phi(const ProblemSpec& spec, std::shared_ptr<const ConditionalMeasureFlow> m,
                    const EstimationSample& sample, const SolverConfig& config);

struct IterationRecord {
    std::size_t iter = 0;
    double residual = 0.0;
    double y0 = 0.0;
    double y0_stderr = 0.0;
    double damping = 0.0;
    double wall_ms = 0.0;
};

enum class SolveStatus { kConverged, kMaxIterations, kDampingExhausted };

const char* to_string(SolveStatus s);

struct EquilibriumResult {
    SolveStatus status = SolveStatus::kMaxIterations;
    std::vector<IterationRecord> history;
    /// Flow m_hat at which the residual d_M(Phi(m_hat), m_hat) was last evaluated.
    std::shared_ptr<const ConditionalMeasureFlow> flow;
    /// Phi(m_hat).
    std::shared_ptr<const ConditionalMeasureFlow> phi_flow;
    /// Best response to m_hat.
    std::shared_ptr<const BsdeSolution> solution;
    std::optional<MarkovPolicy> policy;
    std::optional<ProjectionResult> projection;
    std::optional<MimicReport> mimic;
    EstimationSample sample;
    GirsanovWeights weights;
    std::vector<std::string> warnings;

    bool converged() const { return status == SolveStatus::kConverged; }
    double final_residual() const { return history.empty() ? 0.0 : history.back().residual; }
};

using IterationCallback = std::function<void(const IterationRecord&)>;

/// Damped Picard iteration m_{k+1} = (1 - lambda) m_k + lambda Phi(m_k) started
/// from the driftless flow, with an undamped first step and the same
/// estimation sample in every application of Phi.
EquilibriumResult solve_equilibrium(const ProblemSpec& spec, const SolverConfig& config,
                                    const IterationCallback& on_iteration = {});

struct DeviationValue {
    std::string label;
    double value = 0.0;
    double stderr_ = 0.0;
};

struct ExploitabilityReport {
    double policy_value = 0.0;
    double policy_stderr = 0.0;
    double epsilon = 0.0;
    /// Standard error of epsilon from the paired difference against the best deviation.
    double epsilon_stderr = 0.0;
    std::string best_deviation;
    std::vector<DeviationValue> deviations;
};

/// epsilon = J(policy) - min over deviations of J(deviation), all against the
/// fixed flow m and evaluated on a fresh driftless sample drawn with eval_seed.
/// Deviations: an out-of-sample BSDE best response, constant actions on a
/// grid over the box, and the policy shifted by +-0.1 (clamped).
ExploitabilityReport exploitability(const ProblemSpec& spec, std::shared_ptr<const ConditionalMeasureFlow> m,
                                    const MarkovPolicy& policy, const SolverConfig& config,
                                    std::uint64_t eval_seed);

struct ConsistencyReport {
    double distance = 0.0;
    std::shared_ptr<const ConditionalMeasureFlow> simulated;
};

/// d_M between m and the unweighted flow of the Markov SDE driven by `policy`
/// against m on a fresh sample.
ConsistencyReport consistency_check(const ProblemSpec& spec, const ConditionalMeasureFlow& m,
                                    const MarkovPolicy& policy, const SolverConfig& config, std::uint64_t seed);

}  // namespace mfgcn
