#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mfgcn/sde_engine.hpp"

namespace mfgcn {

/// Discrete stochastic exponential
///   log M_{k+1} = log M_k + lambda_k . dW_k - |lambda_k|^2 dt / 2,  M_0 = 1,
/// stored for every path and grid point.
struct GirsanovWeights {
    TimeGrid grid;
    std::size_t n_paths = 0;
    std::vector<double> log_m;  // [path][step+1]
    std::vector<double> m;      // [path][step+1]

    double log_weight(std::size_t path, std::size_t step) const {
        return log_m[path * grid.n_points() + step];
    }
    double weight(std::size_t path, std::size_t step) const { return m[path * grid.n_points() + step]; }
    /// Weights of all paths at one grid point.
    std::vector<double> at_step(std::size_t step) const;
    /// Sample mean of M_{t_k}; close to 1 when the drift is bounded.
    double mean(std::size_t step) const;
    /// Kish effective sample size of the weights at step k.
    double effective_sample_size(std::size_t step) const;
};

/// `scaled_drift` holds lambda = sigma^{-1} b as [path][step][d_state].
/// The problem fixes the dimensions; the drift samples are already scaled.
GirsanovWeights stochastic_exponential(const ProblemSpec& spec, std::span<const double> scaled_drift,
                                       const NoiseBundle& noise);

/// sum_i w_i v_i / sum_i w_i with the weights M_T.
double weighted_expectation(std::span<const double> values, const GirsanovWeights& weights);

struct BinStatistics {
    std::size_t count = 0;
    double weight_sum = 0.0;
    double weighted_mean = 0.0;
    /// Mean and standard error of M_i / mean(M) over the bin's particles;
    /// a martingale check that should be 1 within sampling error.
    double normalized_weight_mean = 0.0;
    double normalized_weight_stderr = 0.0;
};

/// Per-bin self-normalized means of `values` at grid step `step`, given each
/// path's bin index.
std::vector<BinStatistics> weighted_conditional_values(std::span<const double> values,
                                                       const GirsanovWeights& weights,
                                                       std::span<const std::uint32_t> bin_of_path,
                                                       std::size_t n_bins, std::size_t step);

}  // namespace mfgcn
