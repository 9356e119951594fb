#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mfgcn/problem_model.hpp"

namespace mfgcn {

class MarkovPolicy;
class ConditionalMeasureFlow;

/// Uniform grid t_k = k T / n_steps, k = 0..n_steps.
struct TimeGrid {
    double horizon = 1.0;
    std::size_t n_steps = 50;

    TimeGrid() = default;
    TimeGrid(double horizon, std::size_t n_steps);

    double dt() const { return horizon / static_cast<double>(n_steps); }
    double time(std::size_t k) const {
        return k == n_steps ? horizon : horizon * static_cast<double>(k) / static_cast<double>(n_steps);
    }
    std::size_t n_points() const { return n_steps + 1; }
    /// Index of the grid point nearest to t; throws outside [0, T].
    std::size_t nearest_step(double t) const;

    bool operator==(const TimeGrid&) const = default;
};

/// Brownian increments dW ~ N(0, dt I_{d_I}) and dW0 ~ N(0, dt I_{d_C}),
/// each entry a pure function of (seed, stream, path, step, coordinate).
struct NoiseBundle {
    TimeGrid grid;
    std::size_t n_paths = 0;
    std::size_t d_state = 1;
    std::size_t d_common = 1;
    std::uint64_t seed = 0;
    std::vector<double> dw;   // [path][step][d_state]
    std::vector<double> dw0;  // [path][step][d_common]

    std::span<const double> dW(std::size_t path, std::size_t step) const {
        return {dw.data() + (path * grid.n_steps + step) * d_state, d_state};
    }
    std::span<const double> dW0(std::size_t path, std::size_t step) const {
        return {dw0.data() + (path * grid.n_steps + step) * d_common, d_common};
    }
};

NoiseBundle generate_noise(std::size_t n_paths, const TimeGrid& grid, std::uint64_t seed,
                           std::size_t d_state = 1, std::size_t d_common = 1);

/// Common-state trajectories [path][step+1][d_C].
struct CommonPaths {
    TimeGrid grid;
    std::size_t n_paths = 0;
    std::size_t d_common = 1;
    std::vector<double> xc;

    std::span<const double> at(std::size_t path, std::size_t step) const {
        return {xc.data() + (path * grid.n_points() + step) * d_common, d_common};
    }
};

enum class PathLabel { kDriftless, kMarkovControlled, kPooled };

/// Simulated (X^c, X) on a shared grid.
struct PathBundle {
    TimeGrid grid;
    std::size_t n_paths = 0;
    std::size_t d_state = 1;
    std::size_t d_common = 1;
    std::vector<double> xc;  // [path][step+1][d_common]
    std::vector<double> x;   // [path][step+1][d_state]
    PathLabel label = PathLabel::kDriftless;
    std::uint64_t seed = 0;
    /// Policy evaluations that had to be clamped into the action box.
    std::size_t clamp_count = 0;

    std::span<const double> state(std::size_t path, std::size_t step) const {
        return {x.data() + (path * grid.n_points() + step) * d_state, d_state};
    }
    std::span<const double> common(std::size_t path, std::size_t step) const {
        return {xc.data() + (path * grid.n_points() + step) * d_common, d_common};
    }
    /// Whole common trajectory of one path, rows 0..n_steps.
    std::span<const double> common_path(std::size_t path) const {
        return {xc.data() + path * grid.n_points() * d_common, grid.n_points() * d_common};
    }
    /// Content hash of (grid, xc, x); equal bundles hash equal.
    std::uint64_t fingerprint() const;
};

/// Euler scheme X^c_{k+1} = X^c_k + b^c(t_k, X^c_k) dt + sigma^c dW0_k.
CommonPaths simulate_common_state(const ProblemSpec& spec, const NoiseBundle& noise);

/// X_{k+1} = X_k + sigma dW_k + sigma0 dW0_k with X_0 = xi, bundled with X^c.
PathBundle simulate_driftless_state(const ProblemSpec& spec, const NoiseBundle& noise);

/// Euler scheme for the Markovian controlled state
/// X_{k+1} = X_k + b(t_k, X_k, phi_m(t_k, .), alpha(t_k, X_k, .)) dt + sigma dW_k + sigma0 dW0_k.
PathBundle simulate_markov_sde(const ProblemSpec& spec, const MarkovPolicy& policy,
                               const ConditionalMeasureFlow& flow, const NoiseBundle& noise);

}  // namespace mfgcn
