#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "mfgcn/problem_model.hpp"
#include "mfgcn/rng.hpp"

using namespace mfgcn;

namespace {

const MeasureSummary kDirac0 = MeasureSummary::dirac(std::vector<double>{0.0});

double hamiltonian_at(const ProblemSpec& spec, double x, double a, double z, const MeasureSummary& mu = kDirac0) {
    return hamiltonian(spec, 0.0, {&x, 1}, mu, {&a, 1}, {&z, 1});
}

BoxMinimum minimize_at(const ProblemSpec& spec, double x, double z, const MeasureSummary& mu = kDirac0) {
    return minimize_hamiltonian(spec, 0.0, {&x, 1}, mu, {&z, 1});
}

}  // namespace

TEST(Hamiltonian, VanishesAtOrigin) {
    const ProblemSpec spec = make_family("lq");
    EXPECT_EQ(hamiltonian_at(spec, 0.0, 0.0, 0.0), 0.0);
}

TEST(Hamiltonian, HandEvaluatedQuadratic) {
    const ProblemSpec spec = make_family("lq");
    // 0.5 * 0.25 + 0.5 * 1 + 0.2 * 0.5, computed independently of the library.
    const double expected = 0.5 * 0.5 * 0.5 + 0.5 * 1.0 * 1.0 + 0.2 * 0.5;
    EXPECT_NEAR(hamiltonian_at(spec, 1.0, 0.5, 0.2), 0.725, 1e-15);
    EXPECT_NEAR(expected, 0.725, 1e-15);
}

TEST(Hamiltonian, ZeroAdjointIsRunningCost) {
    const ProblemSpec spec = make_family("tanh");
    const double x = 0.7, a = -0.3;
    EXPECT_EQ(hamiltonian_at(spec, x, a, 0.0), spec.running_cost(0.0, {&x, 1}, kDirac0, {&a, 1}));
}

TEST(Hamiltonian, RejectsActionOutsideBox) {
    const ProblemSpec spec = make_family("lq");
    EXPECT_THROW(hamiltonian_at(spec, 0.0, 1.5, 0.0), std::invalid_argument);
    EXPECT_THROW(hamiltonian_at(spec, std::nan(""), 0.0, 0.0), std::invalid_argument);
}

TEST(MinimizeHamiltonian, InteriorVertex) {
    const ProblemSpec spec = make_family("lq");
    EXPECT_NEAR(minimize_at(spec, 0.0, 0.3).action[0], -0.3, 1e-7);
}

TEST(MinimizeHamiltonian, ClippedToBox) {
    const ProblemSpec spec = make_family("lq");
    EXPECT_EQ(minimize_at(spec, 0.0, 2.0).action[0], -1.0);
}

TEST(MinimizeHamiltonian, SymmetricMinimumAtOrigin) {
    const ProblemSpec spec = make_family("lq");
    const BoxMinimum m = minimize_at(spec, 0.0, 0.0);
    EXPECT_NEAR(m.action[0], 0.0, 1e-9);
    EXPECT_NEAR(m.value, 0.0, 1e-15);
}

TEST(MinimizeHamiltonian, NeverAboveRandomActions) {
    const CounterRng rng(3);
    for (const char* family : {"lq", "tanh"}) {
        const ProblemSpec spec = make_family(family);
        for (std::uint32_t probe = 0; probe < 50; ++probe) {
            const double x = 2.0 * rng.normal(Stream::kProbe, probe, 0, 0);
            const double z = 2.0 * rng.normal(Stream::kProbe, probe, 0, 1);
            const MeasureSummary mu = MeasureSummary::dirac(std::vector<double>{rng.normal(Stream::kProbe, probe, 1, 0)});
            const BoxMinimum m = minimize_at(spec, x, z, mu);
            for (std::uint32_t j = 0; j < 100; ++j) {
                const double a = -1.0 + 2.0 * rng.uniform_pair(Stream::kProbe, probe, 2, j)[0];
                EXPECT_LE(m.value, hamiltonian_at(spec, x, a, z, mu) + 1e-9);
            }
        }
    }
}

TEST(Hamiltonian, AffineInAdjoint) {
    const CounterRng rng(4);
    const ProblemSpec spec = make_family("tanh");
    for (std::uint32_t probe = 0; probe < 200; ++probe) {
        const double x = rng.normal(Stream::kProbe, probe, 0, 0);
        const double a = -1.0 + 2.0 * rng.uniform_pair(Stream::kProbe, probe, 1, 0)[0];
        const double z1 = rng.normal(Stream::kProbe, probe, 2, 0), z2 = rng.normal(Stream::kProbe, probe, 2, 1);
        const double lhs = hamiltonian_at(spec, x, a, z1 + z2) - hamiltonian_at(spec, x, a, z1) -
                           hamiltonian_at(spec, x, a, z2) + hamiltonian_at(spec, x, a, 0.0);
        EXPECT_NEAR(lhs, 0.0, 1e-10);
    }
}

TEST(MinimizeHamiltonian, InvariantUnderSupportReordering) {
    const ProblemSpec spec = make_family("lq", {{"interaction", 0.8}});
    const MeasureSummary a(1, {-1.0, 0.5, 2.0}, {0.2, 0.5, 0.3});
    const MeasureSummary b(1, {2.0, -1.0, 0.5}, {0.3, 0.2, 0.5});
    const BoxMinimum ma = minimize_at(spec, 0.4, 0.3, a), mb = minimize_at(spec, 0.4, 0.3, b);
    EXPECT_NEAR(ma.action[0], mb.action[0], 1e-9);
    EXPECT_NEAR(ma.value, mb.value, 1e-12);
}

TEST(MinimizeOverBox, LexicographicTieBreak) {
    const ActionBox box{{-1.0}, {1.0}};
    const BoxMinimum m = minimize_over_box(box, [](std::span<const double>) { return 1.0; });
    EXPECT_EQ(m.action[0], -1.0);
}

TEST(ValidateSpec, LqPassesWithTightBound) {
    const ValidationReport r = validate_spec(make_family("lq"), 500, 1);
    EXPECT_TRUE(r.passed());
    EXPECT_EQ(r.max_drift, 1.0);
}

TEST(ValidateSpec, SingularSigmaFails) {
    const ValidationReport r = validate_spec(make_family("lq", {{"sigma", 0.0}}), 100, 1);
    EXPECT_FALSE(r.passed());
    EXPECT_FALSE(r.sigma_ok);
}

TEST(ValidateSpec, DriftBoundViolation) {
    ProblemData d = make_family("lq").data();
    d.drift = [](double, std::span<const double>, const MeasureSummary&, std::span<const double> a,
                 std::span<double> out) { out[0] = 2.0 * a[0]; };
    d.drift_bound = 1.0;
    const ValidationReport r = validate_spec(ProblemSpec(d), 100, 1);
    EXPECT_FALSE(r.drift_ok);
    EXPECT_EQ(r.max_drift, 2.0);
}

TEST(Families, UnknownNamesRejected) {
    EXPECT_THROW(make_family("nope"), std::invalid_argument);
    EXPECT_THROW(make_family("lq", {{"sigmma", 1.0}}), std::invalid_argument);
}

TEST(MeasureSummary, MomentsAndNormalization) {
    const MeasureSummary mu(1, {1.0, 3.0}, {1.0, 3.0});
    EXPECT_DOUBLE_EQ(mu.weights()[0], 0.25);
    EXPECT_DOUBLE_EQ(mu.mean()[0], 2.5);
    EXPECT_DOUBLE_EQ(mu.pth_moment(), 0.25 * 1.0 + 0.75 * 9.0);
}
