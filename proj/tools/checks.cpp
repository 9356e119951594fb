#include "checks.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "mfgcn/bsde_solver.hpp"
#include "mfgcn/transport.hpp"
#include "mfgcn_oracles/hjb_fd.hpp"
#include "mfgcn_oracles/transport_brute.hpp"

namespace mfgcn::checks {
namespace {

constexpr std::uint64_t kFreshNoiseSalt = 0xA5A5A5A55A5A5A5AULL;

std::shared_ptr<const ConditionalMeasureFlow> driftless_flow(const EstimationSample& sample) {
    return std::make_shared<const ConditionalMeasureFlow>(estimate_conditional_flow(sample.paths, FlowOptions{}));
}

}  // namespace

MartingaleResult martingale_case(int power, std::size_t n_paths, std::size_t n_steps, std::uint64_t seed) {
    const ProblemSpec spec = make_family("martingale", {{"terminal_power", static_cast<double>(power)}});
    const EstimationSample sample = make_estimation_sample(spec, n_paths, n_steps, seed);
    const auto flow = driftless_flow(sample);
    const BsdeSolution sol = solve_bsde(spec, *flow, *sample.paths, *sample.noise);
    const double s = spec.data().sigma[0], s0 = spec.data().sigma0[0];
    const double var_t = (s * s + s0 * s0) * spec.horizon();

    MartingaleResult r;
    r.y0 = sol.y0;
    r.stderr_ = sol.y0_stderr;
    r.expected = power == 1 ? 0.0 : var_t;
    const auto& paths = *sample.paths;
    for (std::size_t k = 0; k < n_steps; ++k) {
        double sq = 0.0;
        for (std::size_t i = 0; i < paths.n_paths; ++i) {
            const auto x = paths.state(i, k);
            double z = 0.0;
            sol.z(k, x, paths.common(i, k), {&z, 1});
            const double exact = power == 1 ? s : 2.0 * s * x[0];
            sq += (z - exact) * (z - exact);
        }
        r.z_rms_max = std::max(r.z_rms_max, std::sqrt(sq / static_cast<double>(paths.n_paths)));
    }
    return r;
}

double policy_deviation(const ProblemSpec& spec, const EstimationSample& sample,
                        const std::shared_ptr<const ConditionalMeasureFlow>& flow, std::size_t degree, double x_range) {
    BsdeOptions opts;
    opts.basis.degree = degree;
    auto sol = std::make_shared<const BsdeSolution>(solve_bsde(spec, *flow, *sample.paths, *sample.noise, opts));
    const MarkovPolicy policy = extract_control(sol, spec, flow);
    const oracle::HjbSolution hjb(spec);
    const std::size_t ns = sample.paths->grid.n_steps;
    const std::vector<double> xc(ns + 1, 0.0);
    double worst = 0.0;
    for (std::size_t k = 0; k < ns; ++k) {
        const double t = sample.paths->grid.time(k);
        for (int j = 0; j <= 80; ++j) {
            const double x = -x_range + 2.0 * x_range * j / 80.0;
            double a = 0.0;
            policy.action(k, {&x, 1}, {xc.data(), k + 1}, {&a, 1});
            worst = std::max(worst, std::abs(a - hjb.action(t, x)));
        }
    }
    return worst;
}

LqOracleResult lq_hjb_case(const LqOracleOptions& o) {
    LqOracleResult r;
    {
        const ProblemSpec spec = make_family("lq", {{"interaction", 0.0}});
        const EstimationSample sample = make_estimation_sample(spec, o.n_paths, o.n_steps, o.seed);
        const auto flow = driftless_flow(sample);
        const BsdeSolution sol = solve_bsde(spec, *flow, *sample.paths, *sample.noise);
        r.y0 = sol.y0;
        r.stderr_ = sol.y0_stderr;
        r.hjb_y0 = oracle::HjbSolution(spec).value(0.0, 0.0);
    }
    const ProblemSpec spec = make_family("lq", {{"interaction", 0.0}, {"x0_std", o.policy_x0_std}});
    const EstimationSample sample = make_estimation_sample(spec, o.policy_paths, o.n_steps, o.seed + 1);
    const auto flow = driftless_flow(sample);
    r.policy_max_dev = policy_deviation(spec, sample, flow, o.policy_degree, o.policy_x_range);
    r.policy_max_dev_default_basis = policy_deviation(spec, sample, flow, BasisSpec{}.degree, o.policy_x_range);
    return r;
}

TransportOracleResult transport_oracle_suite(std::size_t instances, std::size_t max_atoms, std::uint64_t seed) {
    const CounterRng rng(seed);
    TransportOracleResult r;
    r.instances = instances;
    for (std::size_t inst = 0; inst < instances; ++inst) {
        const auto path = static_cast<std::uint32_t>(inst);
        std::uint32_t counter = 0;
        auto uniform = [&] { return rng.uniform_pair(Stream::kProbe, path, counter++, 0)[0]; };
        auto normal = [&] { return rng.normal(Stream::kProbe, path, counter++, 0); };
        const double q = inst % 2 == 0 ? 1.0 : 2.0;
        const bool equal = inst % 4 < 2;
        const std::size_t cap = equal ? std::min<std::size_t>(max_atoms, 7) : max_atoms;
        const std::size_t n = 1 + static_cast<std::size_t>(uniform() * static_cast<double>(cap)) % cap;
        const std::size_t m = equal ? n : 1 + static_cast<std::size_t>(uniform() * static_cast<double>(cap)) % cap;
        std::vector<double> x(n), y(m), wx(n, 1.0), wy(m, 1.0);
        const double shift = 2.0 * normal();
        for (auto& v : x) v = normal();
        for (auto& v : y) v = shift + 1.5 * normal();
        if (!equal) {
            for (auto& w : wx) w = uniform();
            for (auto& w : wy) w = uniform();
        }
        const EmpiricalMeasure mu(1, x, wx), nu(1, y, wy);
        const double quantile = wasserstein_1d(mu, nu, q);
        const double lp = lp_transport(mu, nu, q);
        r.max_lp_vs_quantile = std::max(r.max_lp_vs_quantile, std::abs(quantile - lp));
        if (equal) {
            const double brute = oracle::permutation_wasserstein(x, y, 1, q);
            r.max_lp_vs_permutation =
                std::max({r.max_lp_vs_permutation, std::abs(brute - lp), std::abs(brute - quantile)});
        }
    }
    return r;
}

MimicExperiment mimic_experiment(const ProblemSpec& spec, const SolverConfig& config, MimicControl control) {
    const EstimationSample sample = make_estimation_sample(spec, config.n_paths, config.n_steps, config.seed);
    const auto flow = std::make_shared<const ConditionalMeasureFlow>(estimate_conditional_flow(sample.paths, config.flow));
    const PathBundle& paths = *sample.paths;
    const NoiseBundle& noise = *sample.noise;
    const std::size_t n = paths.n_paths, ns = paths.grid.n_steps, da = spec.d_action();

    std::vector<double> actions;
    if (control == MimicControl::kBsdeFeedback) {
        actions = solve_bsde(spec, *flow, paths, noise, config.bsde).actions;
    } else {
        actions.resize(n * ns * da);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> w(ns + 1, 0.0);
            for (std::size_t k = 0; k < ns; ++k) w[k + 1] = w[k] + noise.dW(i, k)[0];
            for (std::size_t k = 0; k < ns; ++k) {
                double* a = actions.data() + (i * ns + k) * da;
                std::fill(a, a + da, w[k / 2]);
                spec.action_box().clamp({a, da});
            }
        }
    }
    const auto lambda = scaled_drift_samples(spec, *flow, paths, actions);
    const GirsanovWeights weights = stochastic_exponential(spec, lambda, noise);
    ProjectionResult projection = project_control(spec, paths, actions, *flow, weights, config.projection);
    const NoiseBundle fresh = generate_noise(n, paths.grid, config.seed ^ kFreshNoiseSalt, spec.d_state(), spec.d_common());
    MimicReport report = mimicking_check(spec, paths, weights, projection.policy, *flow, fresh);
    const CostGap gap = project_cost_gap(spec, paths, noise, actions, projection.policy, *flow);
    return {std::move(report), gap, std::move(projection)};
}

}  // namespace mfgcn::checks
