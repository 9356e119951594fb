#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace mfgcn {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
/// Stateless: every output block is a pure function of (key, counter).
struct Philox4x32 {
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Block generate(Block ctr, Key key) {
        constexpr std::uint32_t kM0 = 0xD2511F53u;
        constexpr std::uint32_t kM1 = 0xCD9E8D57u;
        constexpr std::uint32_t kW0 = 0x9E3779B9u;
        constexpr std::uint32_t kW1 = 0xBB67AE85u;
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
            key[0] += kW0;
            key[1] += kW1;
        }
        return ctr;
    }
};

/// Random stream identifiers; each noise source owns a disjoint substream.
enum class Stream : std::uint32_t {
    kIdiosyncratic = 0,
    kCommon = 1,
    kInitialState = 2,
    kInitialCommon = 3,
    kProbe = 4,
};

/// Deterministic Gaussian/uniform draws keyed by (seed, stream, path, step, index).
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

    /// Two open-interval uniforms from one Philox block.
    std::array<double, 2> uniform_pair(Stream stream, std::uint32_t path, std::uint32_t step,
                                       std::uint32_t block) const {
        const auto out = Philox4x32::generate(
            {path, step, static_cast<std::uint32_t>(stream), block}, key_);
        return {to_unit(out[0], out[1]), to_unit(out[2], out[3])};
    }

    /// Standard normal number `index` of the (stream, path, step) cell.
    /// Indices 2j and 2j+1 share one Box-Muller block.
    double normal(Stream stream, std::uint32_t path, std::uint32_t step, std::uint32_t index) const {
        const auto u = uniform_pair(stream, path, step, index / 2);
        const double r = std::sqrt(-2.0 * std::log(u[0]));
        const double theta = 2.0 * std::numbers::pi * u[1];
        return (index % 2 == 0) ? r * std::cos(theta) : r * std::sin(theta);
    }

private:
    static double to_unit(std::uint32_t hi, std::uint32_t lo) {
        const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    Philox4x32::Key key_;
};

}  // namespace mfgcn
