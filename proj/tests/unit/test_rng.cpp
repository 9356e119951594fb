#include <gtest/gtest.h>

#include <cmath>

#include "mfgcn/rng.hpp"

using namespace mfgcn;

// Known-answer vectors of the reference Philox4x32-10 implementation.
TEST(Philox, KnownAnswerZero) {
    const auto out = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(out[0], 0x6627e8d5u);
    EXPECT_EQ(out[1], 0xe169c58du);
    EXPECT_EQ(out[2], 0xbc57ac4cu);
    EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerOnes) {
    const auto out = Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                          {0xffffffffu, 0xffffffffu});
    EXPECT_EQ(out[0], 0x408f276du);
    EXPECT_EQ(out[1], 0x41c83b0eu);
    EXPECT_EQ(out[2], 0xa20bc7c6u);
    EXPECT_EQ(out[3], 0x6d5451fdu);
}

TEST(CounterRng, PureFunctionOfCounter) {
    const CounterRng a(42), b(42), c(43);
    EXPECT_EQ(a.normal(Stream::kCommon, 7, 3, 1), b.normal(Stream::kCommon, 7, 3, 1));
    EXPECT_NE(a.normal(Stream::kCommon, 7, 3, 1), c.normal(Stream::kCommon, 7, 3, 1));
    EXPECT_NE(a.normal(Stream::kCommon, 7, 3, 1), a.normal(Stream::kIdiosyncratic, 7, 3, 1));
}

TEST(CounterRng, UniformsInOpenInterval) {
    const CounterRng rng(5);
    for (std::uint32_t i = 0; i < 10000; ++i) {
        const auto u = rng.uniform_pair(Stream::kProbe, i, 0, 0);
        EXPECT_GT(u[0], 0.0);
        EXPECT_LT(u[0], 1.0);
        EXPECT_GT(u[1], 0.0);
        EXPECT_LT(u[1], 1.0);
    }
}

TEST(CounterRng, NormalMoments) {
    const CounterRng rng(9);
    const int n = 200000;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal(Stream::kIdiosyncratic, static_cast<std::uint32_t>(i), 0, 0);
        s1 += z;
        s2 += z * z;
    }
    const double mean = s1 / n, var = s2 / n - mean * mean;
    EXPECT_LT(std::abs(mean), 4.0 / std::sqrt(n));
    EXPECT_LT(std::abs(var - 1.0), 4.0 * std::sqrt(2.0 / n));
}
