#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "mfgcn/bsde_solver.hpp"
#include "mfgcn/measure_flow.hpp"
#include "mfgcn/parallel.hpp"
#include "mfgcn/policy.hpp"
#include "mfgcn/sde_engine.hpp"
#include "mfgcn/transport.hpp"

using namespace mfgcn;

namespace {

MarkovPolicy constant_policy(const TimeGrid& grid, double value) {
    PolicyTable t;
    t.grid = grid;
    t.nx = 2;
    t.nc = 2;
    t.x_lo.assign(grid.n_steps, -1.0);
    t.x_hi.assign(grid.n_steps, 1.0);
    t.c_lo = t.x_lo;
    t.c_hi = t.x_hi;
    t.actions.assign(grid.n_steps * 4, value);
    return MarkovPolicy::table(std::move(t), ActionBox{{-1.0}, {1.0}});
}

std::vector<double> terminal_states(const PathBundle& b) {
    std::vector<double> v(b.n_paths);
    for (std::size_t i = 0; i < b.n_paths; ++i) v[i] = b.state(i, b.grid.n_steps)[0];
    return v;
}

}  // namespace

TEST(TimeGrid, NearestStep) {
    const TimeGrid g(1.0, 50);
    EXPECT_EQ(g.nearest_step(0.0), 0u);
    EXPECT_EQ(g.nearest_step(1.0), 50u);
    EXPECT_EQ(g.nearest_step(0.511), 26u);
    EXPECT_EQ(g.time(50), 1.0);
    EXPECT_THROW(g.nearest_step(1.5), std::invalid_argument);
}

TEST(Noise, IncrementStatistics) {
    const TimeGrid g(1.0, 20);
    const NoiseBundle n = generate_noise(10000, g, 17);
    for (const auto* v : {&n.dw, &n.dw0}) {
        double s1 = 0.0, s2 = 0.0;
        for (const double x : *v) {
            const double z = x / std::sqrt(g.dt());
            s1 += z;
            s2 += z * z;
        }
        const double m = static_cast<double>(v->size());
        EXPECT_LE(std::abs(s1 / m), 4.0 / std::sqrt(m));
        EXPECT_LE(std::abs(s2 / m - 1.0), 4.0 * std::sqrt(2.0 / m));
    }
}

TEST(Noise, IndependentOfWorkerCount) {
    const TimeGrid g(1.0, 10);
    set_worker_count(1);
    const NoiseBundle a = generate_noise(3000, g, 5);
    set_worker_count(3);
    const NoiseBundle b = generate_noise(3000, g, 5);
    set_worker_count(1);
    EXPECT_EQ(a.dw, b.dw);
    EXPECT_EQ(a.dw0, b.dw0);
}

TEST(Driftless, EulerMatchesHandRecursion) {
    const ProblemSpec spec = make_family("lq", {{"common_drift", 0.3}, {"x0_mean", 0.5}});
    const TimeGrid g(1.0, 5);
    const NoiseBundle n = generate_noise(4, g, 1);
    const PathBundle b = simulate_driftless_state(spec, n);
    for (std::size_t i = 0; i < 4; ++i) {
        double x = 0.5, xc = 0.0;
        for (std::size_t k = 0; k < 5; ++k) {
            x += 1.0 * n.dW(i, k)[0] + 0.5 * n.dW0(i, k)[0];
            xc += 0.3 * g.dt() + 1.0 * n.dW0(i, k)[0];
            EXPECT_NEAR(b.state(i, k + 1)[0], x, 1e-14);
            EXPECT_NEAR(b.common(i, k + 1)[0], xc, 1e-14);
        }
    }
}

TEST(MarkovSde, ZeroPolicyReproducesDriftlessLaw) {
    const ProblemSpec spec = make_family("lq");
    const TimeGrid g(1.0, 20);
    const NoiseBundle n = generate_noise(100000, g, 2);
    auto driftless = std::make_shared<const PathBundle>(simulate_driftless_state(spec, n));
    const auto flow = estimate_conditional_flow(driftless, FlowOptions{});
    const NoiseBundle fresh = generate_noise(100000, g, 3);
    const PathBundle controlled = simulate_markov_sde(spec, constant_policy(g, 0.0), flow, fresh);
    EXPECT_EQ(controlled.clamp_count, 0u);
    const double w1 = wasserstein_1d(EmpiricalMeasure::uniform(1, terminal_states(*driftless)),
                                     EmpiricalMeasure::uniform(1, terminal_states(controlled)), 1.0);
    EXPECT_LE(w1, 0.02);
}

TEST(MarkovSde, UnitPolicyShiftsMean) {
    const ProblemSpec spec = make_family("lq");
    const TimeGrid g(1.0, 20);
    const NoiseBundle n = generate_noise(20000, g, 4);
    auto driftless = std::make_shared<const PathBundle>(simulate_driftless_state(spec, n));
    const auto flow = estimate_conditional_flow(driftless, FlowOptions{});
    const PathBundle b = simulate_markov_sde(spec, constant_policy(g, 1.0), flow, n);
    const auto xt = terminal_states(b);
    double s1 = 0.0, s2 = 0.0;
    for (const double v : xt) {
        s1 += v;
        s2 += v * v;
    }
    const double m = s1 / xt.size(), se = std::sqrt((s2 / xt.size() - m * m) / xt.size());
    EXPECT_LE(std::abs(m - 1.0), 3.0 * se);
}

TEST(MarkovSde, BitwiseAcrossWorkerCounts) {
    const ProblemSpec spec = make_family("lq");
    const TimeGrid g(1.0, 10);
    const NoiseBundle n = generate_noise(5000, g, 8);
    auto driftless = std::make_shared<const PathBundle>(simulate_driftless_state(spec, n));
    const auto flow = std::make_shared<const ConditionalMeasureFlow>(estimate_conditional_flow(driftless, FlowOptions{}));
    auto sol = std::make_shared<const BsdeSolution>(solve_bsde(spec, *flow, *driftless, n));
    const MarkovPolicy policy = extract_control(sol, spec, flow);
    set_worker_count(1);
    const PathBundle a = simulate_markov_sde(spec, policy, *flow, n);
    set_worker_count(4);
    const PathBundle b = simulate_markov_sde(spec, policy, *flow, n);
    set_worker_count(1);
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.fingerprint(), b.fingerprint());
    EXPECT_EQ(a.clamp_count, 0u);
}

TEST(PathBundle, FingerprintSeesContent) {
    const ProblemSpec spec = make_family("lq");
    const NoiseBundle n = generate_noise(100, TimeGrid(1.0, 4), 8);
    PathBundle a = simulate_driftless_state(spec, n);
    const std::uint64_t h = a.fingerprint();
    a.x[7] += 1e-12;
    EXPECT_NE(h, a.fingerprint());
}
