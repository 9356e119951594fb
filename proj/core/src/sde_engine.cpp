#include "mfgcn/sde_engine.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "mfgcn/error.hpp"
#include "mfgcn/measure_flow.hpp"
#include "mfgcn/parallel.hpp"
#include "mfgcn/policy.hpp"

namespace mfgcn {

TimeGrid::TimeGrid(double horizon_, std::size_t n_steps_) : horizon(horizon_), n_steps(n_steps_) {
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw std::invalid_argument("time grid: horizon must be positive");
    if (n_steps == 0) throw std::invalid_argument("time grid: n_steps must be positive");
}

std::size_t TimeGrid::nearest_step(double t) const {
    const double tol = 1e-9 * horizon;
    if (!(t >= -tol && t <= horizon + tol))
        throw std::invalid_argument("time " + std::to_string(t) + " outside [0, T]");
    const double k = std::round(t / dt());
    return std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 0.0)), n_steps);
}

NoiseBundle generate_noise(std::size_t n_paths, const TimeGrid& grid, std::uint64_t seed,
                           std::size_t d_state, std::size_t d_common) {
    if (n_paths == 0) throw std::invalid_argument("generate_noise: n_paths must be positive");
    if (d_state == 0 || d_state > kMaxDim || d_common == 0 || d_common > kMaxDim)
        throw std::invalid_argument("generate_noise: dimension out of range");
    NoiseBundle nb;
    nb.grid = grid;
    nb.n_paths = n_paths;
    nb.d_state = d_state;
    nb.d_common = d_common;
    nb.seed = seed;
    nb.dw.resize(n_paths * grid.n_steps * d_state);
    nb.dw0.resize(n_paths * grid.n_steps * d_common);
    const double sq = std::sqrt(grid.dt());
    const CounterRng rng(seed);
    parallel_chunks(n_paths, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto path = static_cast<std::uint32_t>(i);
            for (std::size_t k = 0; k < grid.n_steps; ++k) {
                const auto step = static_cast<std::uint32_t>(k);
                double* w = nb.dw.data() + (i * grid.n_steps + k) * d_state;
                for (std::size_t j = 0; j < d_state; ++j)
                    w[j] = sq * rng.normal(Stream::kIdiosyncratic, path, step, static_cast<std::uint32_t>(j));
                double* w0 = nb.dw0.data() + (i * grid.n_steps + k) * d_common;
                for (std::size_t j = 0; j < d_common; ++j)
                    w0[j] = sq * rng.normal(Stream::kCommon, path, step, static_cast<std::uint32_t>(j));
            }
        }
    });
    return nb;
}

namespace {

void check_noise(const ProblemSpec& spec, const NoiseBundle& noise) {
    if (noise.d_state != spec.d_state() || noise.d_common != spec.d_common())
        throw std::invalid_argument("noise dimensions do not match the problem");
    if (std::abs(noise.grid.horizon - spec.horizon()) > 1e-12 * spec.horizon())
        throw std::invalid_argument("noise horizon does not match the problem");
}

// X^c along one path, written to out (rows 0..n_steps).
void common_path(const ProblemSpec& spec, const NoiseBundle& noise, const CounterRng& rng,
                 std::size_t i, double* out) {
    const std::size_t dc = spec.d_common();
    const auto& sc = spec.data().sigmac;
    const double dt = noise.grid.dt();
    spec.data().initial_common.sample(rng, Stream::kInitialCommon, static_cast<std::uint32_t>(i),
                                      {out, dc});
    Vec drift{};
    for (std::size_t k = 0; k < noise.grid.n_steps; ++k) {
        const double* cur = out + k * dc;
        double* next = out + (k + 1) * dc;
        spec.common_drift(noise.grid.time(k), {cur, dc}, {drift.data(), dc});
        const auto dw0 = noise.dW0(i, k);
        for (std::size_t r = 0; r < dc; ++r) {
            double v = cur[r] + drift[r] * dt;
            for (std::size_t c = 0; c < dc; ++c) v += sc[r * dc + c] * dw0[c];
            next[r] = v;
        }
    }
}

PathBundle empty_bundle(const ProblemSpec& spec, const NoiseBundle& noise, PathLabel label) {
    PathBundle pb;
    pb.grid = noise.grid;
    pb.n_paths = noise.n_paths;
    pb.d_state = spec.d_state();
    pb.d_common = spec.d_common();
    pb.xc.resize(noise.n_paths * noise.grid.n_points() * spec.d_common());
    pb.x.resize(noise.n_paths * noise.grid.n_points() * spec.d_state());
    pb.label = label;
    pb.seed = noise.seed;
    return pb;
}

// x_next = x + drift dt + sigma dW + sigma0 dW0.
void euler_state(const ProblemSpec& spec, const double* x, const double* drift, double dt,
                 std::span<const double> dw, std::span<const double> dw0, double* next) {
    const std::size_t d = spec.d_state(), dc = spec.d_common();
    const auto& s = spec.data().sigma;
    const auto& s0 = spec.data().sigma0;
    for (std::size_t r = 0; r < d; ++r) {
        double v = x[r] + (drift ? drift[r] * dt : 0.0);
        for (std::size_t c = 0; c < d; ++c) v += s[r * d + c] * dw[c];
        for (std::size_t c = 0; c < dc; ++c) v += s0[r * dc + c] * dw0[c];
        next[r] = v;
    }
}

}  // namespace

CommonPaths simulate_common_state(const ProblemSpec& spec, const NoiseBundle& noise) {
    check_noise(spec, noise);
    CommonPaths cp;
    cp.grid = noise.grid;
    cp.n_paths = noise.n_paths;
    cp.d_common = spec.d_common();
    cp.xc.resize(noise.n_paths * noise.grid.n_points() * spec.d_common());
    const CounterRng rng(noise.seed);
    parallel_chunks(noise.n_paths, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            common_path(spec, noise, rng, i, cp.xc.data() + i * noise.grid.n_points() * cp.d_common);
    });
    return cp;
}

PathBundle simulate_driftless_state(const ProblemSpec& spec, const NoiseBundle& noise) {
    check_noise(spec, noise);
    PathBundle pb = empty_bundle(spec, noise, PathLabel::kDriftless);
    const CounterRng rng(noise.seed);
    const std::size_t np = noise.grid.n_points(), d = spec.d_state(), dc = spec.d_common();
    parallel_chunks(noise.n_paths, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            common_path(spec, noise, rng, i, pb.xc.data() + i * np * dc);
            double* x = pb.x.data() + i * np * d;
            spec.data().initial_state.sample(rng, Stream::kInitialState, static_cast<std::uint32_t>(i),
                                             {x, d});
            for (std::size_t k = 0; k < noise.grid.n_steps; ++k)
                euler_state(spec, x + k * d, nullptr, 0.0, noise.dW(i, k), noise.dW0(i, k), x + (k + 1) * d);
        }
    });
    return pb;
}

PathBundle simulate_markov_sde(const ProblemSpec& spec, const MarkovPolicy& policy,
                               const ConditionalMeasureFlow& flow, const NoiseBundle& noise) {
    check_noise(spec, noise);
    if (!(flow.grid() == noise.grid))
        throw std::invalid_argument("simulate_markov_sde: flow grid differs from noise grid");
    if (policy.d_action() != spec.d_action())
        throw std::invalid_argument("simulate_markov_sde: policy action dimension mismatch");
    PathBundle pb = empty_bundle(spec, noise, PathLabel::kMarkovControlled);
    const CounterRng rng(noise.seed);
    const std::size_t np = noise.grid.n_points(), d = spec.d_state(), dc = spec.d_common();
    const std::size_t da = spec.d_action();
    const double dt = noise.grid.dt();
    std::vector<std::size_t> clamps(chunk_count(noise.n_paths), 0);
    parallel_chunks(noise.n_paths, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        Vec a{}, drift{};
        for (std::size_t i = begin; i < end; ++i) {
            const double* xc = pb.xc.data() + i * np * dc;
            common_path(spec, noise, rng, i, pb.xc.data() + i * np * dc);
            double* x = pb.x.data() + i * np * d;
            spec.data().initial_state.sample(rng, Stream::kInitialState, static_cast<std::uint32_t>(i),
                                             {x, d});
            for (std::size_t k = 0; k < noise.grid.n_steps; ++k) {
                const std::span<const double> xc_path(xc, (k + 1) * dc);
                if (policy.action(k, {x + k * d, d}, xc_path, {a.data(), da})) ++clamps[chunk];
                const auto& mu = flow.measure(k, flow.locate(k, xc_path)).summary();
                spec.drift(noise.grid.time(k), {x + k * d, d}, mu, {a.data(), da}, {drift.data(), d});
                for (std::size_t r = 0; r < d; ++r)
                    if (!std::isfinite(drift[r]))
                        throw NumericalError("non-finite drift at path " + std::to_string(i) + ", step " +
                                             std::to_string(k));
                euler_state(spec, x + k * d, drift.data(), dt, noise.dW(i, k), noise.dW0(i, k),
                            x + (k + 1) * d);
            }
        }
    });
    for (const auto c : clamps) pb.clamp_count += c;
    return pb;
}

std::uint64_t PathBundle::fingerprint() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* data, std::size_t bytes) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < bytes; ++i) {
            h ^= p[i];
            h *= 1099511628211ULL;
        }
    };
    const std::uint64_t header[4] = {grid.n_steps, n_paths, d_state, d_common};
    mix(header, sizeof header);
    mix(&grid.horizon, sizeof grid.horizon);
    mix(xc.data(), xc.size() * sizeof(double));
    mix(x.data(), x.size() * sizeof(double));
    return h;
}

}  // namespace mfgcn
