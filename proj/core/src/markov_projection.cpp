#include "mfgcn/markov_projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "mfgcn/error.hpp"
#include "mfgcn/parallel.hpp"

namespace mfgcn {
namespace {

struct WeightedMoments {
    double mean = 0.0;
    double sd = 0.0;
};

template <class F>
WeightedMoments weighted_moments(std::size_t n, std::span<const double> w, F&& value) {
    double sw = 0.0, s1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sw += w[i];
        s1 += w[i] * value(i);
    }
    const double mean = s1 / sw;
    double s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = value(i) - mean;
        s2 += w[i] * e * e;
    }
    return {mean, std::sqrt(std::max(s2 / sw, 0.0))};
}

}  // namespace

ProjectionResult project_control(const ProblemSpec& spec, const PathBundle& paths, std::span<const double> actions,
                                 const ConditionalMeasureFlow& flow, const GirsanovWeights& weights,
                                 const ProjectionOptions& options) {
    if (spec.d_state() != 1 || spec.d_common() != 1)
        throw std::invalid_argument("Markov projection supports d_I = d_C = 1 only");
    if (flow.options().mode.kind != ConditioningMode::Kind::kCurrentValue)
        throw std::invalid_argument("Markov projection needs a flow conditioned on the current common state");
    if (options.grid_points < 2) throw std::invalid_argument("projection grid needs at least two points per axis");
    if (!(flow.grid() == paths.grid) || !(weights.grid == paths.grid) || weights.n_paths != paths.n_paths)
        throw std::invalid_argument("projection inputs do not share a grid");
    const std::size_t n = paths.n_paths, ns = paths.grid.n_steps, da = spec.d_action();
    if (actions.size() != n * ns * da) throw std::invalid_argument("action samples have the wrong size");

    const PolynomialBasis basis(2, options.basis.degree);
    const std::size_t nf = basis.size();
    const std::size_t g = options.grid_points;

    PolicyTable table;
    table.grid = paths.grid;
    table.nx = g;
    table.nc = g;
    table.d_action = da;
    table.x_lo.resize(ns);
    table.x_hi.resize(ns);
    table.c_lo.resize(ns);
    table.c_hi.resize(ns);
    table.actions.resize(ns * g * g * da);

    std::vector<std::size_t> flagged(ns, 0);
    std::vector<double> max_res(ns, 0.0);
    parallel_chunks(
        ns,
        [&](std::size_t, std::size_t begin, std::size_t end) {
            std::vector<double> drift(n), w(n), f(nf);
            for (std::size_t k = begin; k < end; ++k) {
                const double t = paths.grid.time(k);
                double bmin = std::numeric_limits<double>::infinity(), bmax = -bmin;
                for (std::size_t i = 0; i < n; ++i) {
                    const auto& mu = flow.measure(k, flow.locate(k, paths.common_path(i))).summary();
                    double b = 0.0;
                    spec.drift(t, paths.state(i, k), mu, actions.subspan((i * ns + k) * da, da), {&b, 1});
                    drift[i] = b;
                    w[i] = weights.weight(i, k);
                    bmin = std::min(bmin, b);
                    bmax = std::max(bmax, b);
                }
                const auto mx = weighted_moments(n, w, [&](std::size_t i) { return paths.state(i, k)[0]; });
                const auto mc = weighted_moments(n, w, [&](std::size_t i) { return paths.common(i, k)[0]; });
                Standardization st{{mx.mean, mc.mean}, {mx.sd < 1e-12 ? 0.0 : mx.sd, mc.sd < 1e-12 ? 0.0 : mc.sd}};

                NormalEquations ne(nf, 1);
                for (std::size_t i = 0; i < n; ++i) {
                    const double v[2] = {paths.state(i, k)[0], paths.common(i, k)[0]};
                    double u[2];
                    st.apply(v, u);
                    basis.evaluate(u, f);
                    ne.add(f, {&drift[i], 1}, w[i]);
                }
                const Eigen::VectorXd beta = ne.solve(options.basis.ridge);

                const double hx = std::max(options.range_sigmas * mx.sd, options.min_half_width);
                const double hc = std::max(options.range_sigmas * mc.sd, options.min_half_width);
                table.x_lo[k] = mx.mean - hx;
                table.x_hi[k] = mx.mean + hx;
                table.c_lo[k] = mc.mean - hc;
                table.c_hi[k] = mc.mean + hc;
                for (std::size_t ix = 0; ix < g; ++ix) {
                    const double x = table.x_node(k, ix);
                    for (std::size_t ic = 0; ic < g; ++ic) {
                        const double xc = table.c_node(k, ic);
                        const double v[2] = {x, xc};
                        double u[2];
                        st.apply(v, u);
                        basis.evaluate(u, f);
                        double target = 0.0;
                        for (std::size_t j = 0; j < nf; ++j) target += beta[static_cast<Eigen::Index>(j)] * f[j];
                        target = std::clamp(target, bmin, bmax);
                        const auto& mu = flow.measure(k, flow.locate_key(k, {&xc, 1})).summary();
                        const BoxMinimum m = minimize_over_box(
                            spec.action_box(),
                            [&](std::span<const double> a) {
                                double b = 0.0;
                                spec.drift(t, {&x, 1}, mu, a, {&b, 1});
                                return (b - target) * (b - target);
                            },
                            options.minimizer);
                        const double res = std::sqrt(m.value);
                        if (!(res <= options.inversion_tolerance)) ++flagged[k];
                        max_res[k] = std::max(max_res[k], res);
                        std::copy_n(m.action.begin(), da, table.at(k, ix, ic).begin());
                    }
                }
            }
        },
        1);

    std::size_t total_flagged = 0;
    double worst = 0.0;
    for (std::size_t k = 0; k < ns; ++k) {
        total_flagged += flagged[k];
        worst = std::max(worst, max_res[k]);
    }
    const std::size_t nodes = ns * g * g;
    if (static_cast<double>(total_flagged) > options.max_flagged_fraction * static_cast<double>(nodes))
        throw NumericalError("Markov projection: " + std::to_string(total_flagged) + " of " + std::to_string(nodes) +
                             " grid nodes could not be inverted (max residual " + std::to_string(worst) + ")");
    return {MarkovPolicy::table(std::move(table), spec.action_box()), nodes, total_flagged, worst};
}

MimicReport mimicking_check(const ProblemSpec& spec, const PathBundle& paths, const GirsanovWeights& weights,
                            const MarkovPolicy& policy, const ConditionalMeasureFlow& flow, const NoiseBundle& noise,
                            const MimicOptions& options) {
    if (spec.d_state() != 1 || spec.d_common() != 1)
        throw std::invalid_argument("mimicking_check supports d_I = d_C = 1 only");
    if (!(weights.grid == paths.grid) || weights.n_paths != paths.n_paths || !(noise.grid == paths.grid))
        throw std::invalid_argument("mimicking_check inputs do not share a grid");
    const PathBundle sim = simulate_markov_sde(spec, policy, flow, noise);
    const std::size_t ns = paths.grid.n_steps;
    const std::size_t stride = options.stride ? options.stride : std::max<std::size_t>(1, ns / 10);

    MimicReport rep;
    for (std::size_t k = stride; k < ns; k += stride) rep.steps.push_back(k);
    if (rep.steps.empty() || rep.steps.back() != ns) rep.steps.push_back(ns);
    rep.distances.assign(rep.steps.size(), 0.0);
    const TransportOptions topts{2 * options.atoms};
    parallel_chunks(
        rep.steps.size(),
        [&](std::size_t, std::size_t begin, std::size_t end) {
            for (std::size_t s = begin; s < end; ++s) {
                const std::size_t k = rep.steps[s];
                std::vector<double> a, wa, b;
                a.reserve(2 * paths.n_paths);
                wa.reserve(paths.n_paths);
                for (std::size_t i = 0; i < paths.n_paths; ++i) {
                    a.push_back(paths.state(i, k)[0]);
                    a.push_back(paths.common(i, k)[0]);
                    wa.push_back(weights.weight(i, k));
                }
                b.reserve(2 * sim.n_paths);
                for (std::size_t i = 0; i < sim.n_paths; ++i) {
                    b.push_back(sim.state(i, k)[0]);
                    b.push_back(sim.common(i, k)[0]);
                }
                const EmpiricalMeasure original(2, std::move(a), std::move(wa), 1.0);
                const EmpiricalMeasure mimic = EmpiricalMeasure::uniform(2, std::move(b), 1.0);
                rep.distances[s] = lp_transport(original, mimic, 1.0, topts);
            }
        },
        1);
    double sum = 0.0;
    for (const double v : rep.distances) {
        rep.max_distance = std::max(rep.max_distance, v);
        sum += v;
    }
    rep.mean_distance = sum / static_cast<double>(rep.distances.size());
    return rep;
}

CostGap project_cost_gap(const ProblemSpec& spec, const PathBundle& paths, const NoiseBundle& noise,
                         std::span<const double> actions, const MarkovPolicy& policy,
                         const ConditionalMeasureFlow& flow) {
    const ObjectiveEstimate original = evaluate_objective(spec, flow, actions, paths, noise);
    const auto projected_actions = sample_policy(policy, paths);
    const ObjectiveEstimate projected = evaluate_objective(spec, flow, projected_actions, paths, noise);
    const PairedDifference diff = paired_difference(original, projected);
    return {original.value, projected.value, diff.value, diff.stderr_};
}

}  // namespace mfgcn
