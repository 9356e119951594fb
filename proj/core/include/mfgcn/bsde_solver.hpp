#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "mfgcn/basis.hpp"
#include "mfgcn/girsanov.hpp"
#include "mfgcn/measure_flow.hpp"
#include "mfgcn/policy.hpp"
#include "mfgcn/sde_engine.hpp"

namespace mfgcn {

struct BasisSpec {
    std::size_t degree = 2;
    double ridge = 1e-8;
};

struct BsdeOptions {
    BasisSpec basis;
    MinimizerOptions minimizer;
    /// Abort when the residual variance of a Y regression exceeds this.
    double explosion_threshold = 1e6;
    /// Keep the per-path optimal actions of the backward pass.
    bool record_actions = true;
};

/// Regression coefficients of one backward step, in standardized (x, xc).
struct BsdeStep {
    Standardization standardization;
    std::vector<double> y_coef;   // n_features
    std::vector<double> z_coef;   // d_state x n_features
    std::vector<double> z0_coef;  // d_common x n_features
    double y_residual_variance = 0.0;
    double z_residual_variance = 0.0;
};

/// Backward-pass output: Y_0 with a standard error, the fitted Z, Z^0 and Y
/// at every step, and (optionally) the optimal actions on the estimation paths.
struct BsdeSolution {
    TimeGrid grid;
    std::size_t d_state = 1;
    std::size_t d_common = 1;
    std::size_t d_action = 1;
    PolynomialBasis basis;
    std::vector<BsdeStep> steps;  // 0..n_steps-1
    double y0 = 0.0;
    double y0_stderr = 0.0;
    std::size_t n_paths = 0;
    std::vector<double> actions;  // [path][step][d_action]

    void z(std::size_t step, std::span<const double> x, std::span<const double> xc,
           std::span<double> out) const;
    void z0(std::size_t step, std::span<const double> x, std::span<const double> xc,
            std::span<double> out) const;
    double y(std::size_t step, std::span<const double> x, std::span<const double> xc) const;
    std::span<const double> action(std::size_t path, std::size_t step) const {
        return {actions.data() + (path * grid.n_steps + step) * d_action, d_action};
    }
};

/// Minimizer of the Hamiltonian at (t_k, x, phi_m(t_k, key), Z_hat_k(x, xc)).
/// Shared by the backward pass and the closure policy so both agree bitwise.
BoxMinimum closure_action(const ProblemSpec& spec, const BsdeSolution& solution,
                          const ConditionalMeasureFlow& flow, std::size_t step,
                          std::span<const double> x, std::span<const double> xc_path,
                          const MinimizerOptions& minimizer);

/// Least-squares Monte Carlo for
///   dY = -H(t, X, phi_m, alpha_hat, Z) dt + Z dW + Z^0 dW^0,  Y_T = g(X_T, phi_m(T)),
/// along driftless paths. Throws NumericalError on explosion.
BsdeSolution solve_bsde(const ProblemSpec& spec, const ConditionalMeasureFlow& flow,
                        const PathBundle& paths, const NoiseBundle& noise,
                        const BsdeOptions& options = {});

/// Feedback control associated with a BSDE solution.
MarkovPolicy extract_control(std::shared_ptr<const BsdeSolution> solution, const ProblemSpec& spec,
                             std::shared_ptr<const ConditionalMeasureFlow> flow,
                             const MinimizerOptions& minimizer = {});

/// Actions of a policy along every path: [path][step][d_action].
/// `clamped` receives the number of evaluations clamped into the box.
std::vector<double> sample_policy(const MarkovPolicy& policy, const PathBundle& paths,
                                  std::size_t* clamped = nullptr);

/// lambda = sigma^{-1} b(t_k, X_k, phi_m(t_k, .), alpha_k) along every path.
std::vector<double> scaled_drift_samples(const ProblemSpec& spec, const ConditionalMeasureFlow& flow,
                                         const PathBundle& paths, std::span<const double> actions);

struct ObjectiveEstimate {
    double value = 0.0;
    double stderr_ = 0.0;
    /// Per-path influence values; paired differences of two estimates on the
    /// same paths use these for their standard error.
    std::vector<double> influence;
};

/// Self-normalized Girsanov estimate of
/// J(alpha) = E[int_0^T f(t, X, phi_m, alpha) dt + g(X_T, phi_m(T))]
/// along driftless paths; `actions` is [path][step][d_action].
ObjectiveEstimate evaluate_objective(const ProblemSpec& spec, const ConditionalMeasureFlow& flow,
                                     std::span<const double> actions, const PathBundle& paths,
                                     const NoiseBundle& noise);

struct PairedDifference {
    double value = 0.0;
    double stderr_ = 0.0;
};

/// a - b with the standard error of the paired per-path influences.
PairedDifference paired_difference(const ObjectiveEstimate& a, const ObjectiveEstimate& b);

}  // namespace mfgcn
