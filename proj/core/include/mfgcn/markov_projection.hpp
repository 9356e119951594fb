#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mfgcn/bsde_solver.hpp"
#include "mfgcn/girsanov.hpp"
#include "mfgcn/measure_flow.hpp"
#include "mfgcn/policy.hpp"

namespace mfgcn {

struct ProjectionOptions {
    std::size_t grid_points = 41;
    /// Grid covers weighted mean +- range_sigmas weighted standard deviations.
    double range_sigmas = 3.0;
    double min_half_width = 1e-6;
    /// A node is flagged when min_a |b(a) - b_hat| exceeds this.
    double inversion_tolerance = 1e-6;
    double max_flagged_fraction = 0.01;
    BasisSpec basis;
    MinimizerOptions minimizer;
};

struct ProjectionResult {
    MarkovPolicy policy;
    std::size_t nodes = 0;
    std::size_t flagged = 0;
    double max_inversion_residual = 0.0;
};

/// Markovian control alpha_hat(t, x, xc) whose drift matches the conditional
/// expectation E[b(t, X_t, phi_m, alpha_t) | X_t = x, X^c_t = xc] under the
/// weighted measure. `actions` are the open-loop controls along the driftless
/// `paths` ([path][step][d_action]) and `weights` their stochastic exponential.
/// Only d_I = d_C = 1 with a current-value flow is supported. Throws
/// NumericalError when more than max_flagged_fraction of the nodes cannot be
/// inverted.
ProjectionResult project_control(const ProblemSpec& spec, const PathBundle& paths,
                                 std::span<const double> actions, const ConditionalMeasureFlow& flow,
                                 const GirsanovWeights& weights, const ProjectionOptions& options = {});

struct MimicOptions {
    /// Compare every `stride`-th step (0: n_steps / 10) plus the last one.
    std::size_t stride = 0;
    /// Atoms per marginal in the two-dimensional transport problems.
    std::size_t atoms = 256;
};

struct MimicReport {
    std::vector<std::size_t> steps;
    std::vector<double> distances;
    double max_distance = 0.0;
    double mean_distance = 0.0;
};

/// W_1 between the joint marginals of (X_t, X^c_t) under the original control
/// (weighted driftless paths) and under the Markov policy simulated on `noise`.
MimicReport mimicking_check(const ProblemSpec& spec, const PathBundle& paths, const GirsanovWeights& weights,
                            const MarkovPolicy& policy, const ConditionalMeasureFlow& flow,
                            const NoiseBundle& noise, const MimicOptions& options = {});

struct CostGap {
    double original = 0.0;
    double projected = 0.0;
    double gap = 0.0;
    double stderr_ = 0.0;
};

/// J(alpha) - J(alpha_hat) on common driftless paths with a paired standard
/// error. Non-negative up to noise when f is convex in the action and b is affine in it.
CostGap project_cost_gap(const ProblemSpec& spec, const PathBundle& paths, const NoiseBundle& noise,
                         std::span<const double> actions, const MarkovPolicy& policy,
                         const ConditionalMeasureFlow& flow);

}  // namespace mfgcn
