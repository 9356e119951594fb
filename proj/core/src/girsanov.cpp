#include "mfgcn/girsanov.hpp"

#include <cmath>
#include <stdexcept>

#include "mfgcn/parallel.hpp"

namespace mfgcn {

std::vector<double> GirsanovWeights::at_step(std::size_t step) const {
    std::vector<double> out(n_paths);
    for (std::size_t i = 0; i < n_paths; ++i) out[i] = weight(i, step);
    return out;
}

double GirsanovWeights::mean(std::size_t step) const {
    double s = 0.0;
    for (std::size_t i = 0; i < n_paths; ++i) s += weight(i, step);
    return s / static_cast<double>(n_paths);
}

double GirsanovWeights::effective_sample_size(std::size_t step) const {
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n_paths; ++i) {
        const double w = weight(i, step);
        s += w;
        s2 += w * w;
    }
    return s2 > 0.0 ? s * s / s2 : 0.0;
}

GirsanovWeights stochastic_exponential(const ProblemSpec& spec, std::span<const double> scaled_drift,
                                       const NoiseBundle& noise) {
    const std::size_t d = spec.d_state();
    const std::size_t n = noise.n_paths, ns = noise.grid.n_steps, np = noise.grid.n_points();
    if (noise.d_state != d) throw std::invalid_argument("stochastic_exponential: dimension mismatch");
    if (scaled_drift.size() != n * ns * d)
        throw std::invalid_argument("stochastic_exponential: drift samples have the wrong size");
    GirsanovWeights gw;
    gw.grid = noise.grid;
    gw.n_paths = n;
    gw.log_m.resize(n * np);
    gw.m.resize(n * np);
    const double dt = noise.grid.dt();
    parallel_chunks(n, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            double* lm = gw.log_m.data() + i * np;
            double* m = gw.m.data() + i * np;
            lm[0] = 0.0;
            m[0] = 1.0;
            for (std::size_t k = 0; k < ns; ++k) {
                const double* lam = scaled_drift.data() + (i * ns + k) * d;
                const auto dw = noise.dW(i, k);
                double dot = 0.0, sq = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    dot += lam[j] * dw[j];
                    sq += lam[j] * lam[j];
                }
                const double inc = dot - 0.5 * sq * dt;
                lm[k + 1] = lm[k] + inc;
                m[k + 1] = m[k] * std::exp(inc);
            }
        }
    });
    return gw;
}

double weighted_expectation(std::span<const double> values, const GirsanovWeights& weights) {
    if (values.size() != weights.n_paths)
        throw std::invalid_argument("weighted_expectation: size mismatch");
    const std::size_t last = weights.grid.n_steps;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double w = weights.weight(i, last);
        num += w * values[i];
        den += w;
    }
    return num / den;
}

std::vector<BinStatistics> weighted_conditional_values(std::span<const double> values,
                                                       const GirsanovWeights& weights,
                                                       std::span<const std::uint32_t> bin_of_path,
                                                       std::size_t n_bins, std::size_t step) {
    const std::size_t n = weights.n_paths;
    if (values.size() != n || bin_of_path.size() != n)
        throw std::invalid_argument("weighted_conditional_values: size mismatch");
    const double global_mean = weights.mean(step);
    std::vector<BinStatistics> out(n_bins);
    std::vector<double> wsum(n_bins, 0.0), wv(n_bins, 0.0), r1(n_bins, 0.0), r2(n_bins, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t b = bin_of_path[i];
        if (b >= n_bins) throw std::invalid_argument("weighted_conditional_values: bin index out of range");
        const double w = weights.weight(i, step);
        const double r = w / global_mean;
        ++out[b].count;
        wsum[b] += w;
        wv[b] += w * values[i];
        r1[b] += r;
        r2[b] += r * r;
    }
    for (std::size_t b = 0; b < n_bins; ++b) {
        auto& s = out[b];
        s.weight_sum = wsum[b];
        if (s.count == 0) continue;
        const double c = static_cast<double>(s.count);
        s.weighted_mean = wsum[b] > 0.0 ? wv[b] / wsum[b] : 0.0;
        s.normalized_weight_mean = r1[b] / c;
        const double var = s.count > 1 ? (r2[b] - r1[b] * r1[b] / c) / (c - 1.0) : 0.0;
        s.normalized_weight_stderr = std::sqrt(std::max(var, 0.0) / c);
    }
    return out;
}

}  // namespace mfgcn
