#include "mfgcn/bsde_solver.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mfgcn/error.hpp"
#include "mfgcn/parallel.hpp"

namespace mfgcn {
namespace {

// Standardized basis features of (x, xc) at one step.
void step_features(const PolynomialBasis& basis, const Standardization& st, std::span<const double> x,
                   std::span<const double> xc, std::span<double> out) {
    Vec raw{}, u{};
    std::copy(x.begin(), x.end(), raw.begin());
    std::copy(xc.begin(), xc.end(), raw.begin() + static_cast<std::ptrdiff_t>(x.size()));
    const std::size_t nv = x.size() + xc.size();
    st.apply({raw.data(), nv}, {u.data(), nv});
    basis.evaluate({u.data(), nv}, out);
}

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

std::span<double> feature_buffer(std::size_t n) {
    thread_local std::vector<double> buf;
    if (buf.size() < n) buf.resize(n);
    return {buf.data(), n};
}

// Ordered chunk reduction of per-path values.
template <class F>
double chunked_sum(std::size_t n, F&& value) {
    std::vector<double> partial(chunk_count(n), 0.0);
    parallel_chunks(n, [&](std::size_t c, std::size_t begin, std::size_t end) {
        double s = 0.0;
        for (std::size_t i = begin; i < end; ++i) s += value(i);
        partial[c] = s;
    });
    double s = 0.0;
    for (const double p : partial) s += p;
    return s;
}

template <class F>
NormalEquations chunked_regression(std::size_t n, std::size_t nf, std::size_t nt, F&& row) {
    std::vector<NormalEquations> partial(chunk_count(n), NormalEquations(nf, nt));
    parallel_chunks(n, [&](std::size_t c, std::size_t begin, std::size_t end) {
        Vec targets{};
        for (std::size_t i = begin; i < end; ++i) {
            const double* f = row(i, targets);
            partial[c].add({f, nf}, {targets.data(), nt});
        }
    });
    NormalEquations total(nf, nt);
    for (const auto& p : partial) total.merge(p);
    return total;
}

void check_inputs(const ProblemSpec& spec, const ConditionalMeasureFlow& flow, const PathBundle& paths) {
    if (!(flow.grid() == paths.grid)) throw std::invalid_argument("flow and paths use different grids");
    if (paths.d_state != spec.d_state() || paths.d_common != spec.d_common() || flow.d_state() != spec.d_state() ||
        flow.d_common() != spec.d_common())
        throw std::invalid_argument("dimensions of flow/paths do not match the problem");
    if (std::abs(paths.grid.horizon - spec.horizon()) > 1e-12 * spec.horizon())
        throw std::invalid_argument("grid horizon does not match the problem");
}

}  // namespace

void BsdeSolution::z(std::size_t step, std::span<const double> x, std::span<const double> xc,
                     std::span<double> out) const {
    const std::size_t nf = basis.size();
    auto f = feature_buffer(nf);
    const BsdeStep& s = steps[step];
    step_features(basis, s.standardization, x, xc, f);
    for (std::size_t j = 0; j < d_state; ++j) out[j] = dot(s.z_coef.data() + j * nf, f.data(), nf);
}

void BsdeSolution::z0(std::size_t step, std::span<const double> x, std::span<const double> xc,
                      std::span<double> out) const {
    const std::size_t nf = basis.size();
    auto f = feature_buffer(nf);
    const BsdeStep& s = steps[step];
    step_features(basis, s.standardization, x, xc, f);
    for (std::size_t j = 0; j < d_common; ++j) out[j] = dot(s.z0_coef.data() + j * nf, f.data(), nf);
}

double BsdeSolution::y(std::size_t step, std::span<const double> x, std::span<const double> xc) const {
    const std::size_t nf = basis.size();
    auto f = feature_buffer(nf);
    const BsdeStep& s = steps[step];
    step_features(basis, s.standardization, x, xc, f);
    return dot(s.y_coef.data(), f.data(), nf);
}

BoxMinimum closure_action(const ProblemSpec& spec, const BsdeSolution& solution,
                          const ConditionalMeasureFlow& flow, std::size_t step, std::span<const double> x,
                          std::span<const double> xc_path, const MinimizerOptions& minimizer) {
    const std::size_t dc = solution.d_common;
    Vec z{};
    solution.z(step, x, xc_path.subspan(step * dc, dc), {z.data(), solution.d_state});
    const auto& mu = flow.measure(step, flow.locate(step, xc_path)).summary();
    return minimize_hamiltonian(spec, solution.grid.time(step), x, mu, {z.data(), solution.d_state}, minimizer);
}

BsdeSolution solve_bsde(const ProblemSpec& spec, const ConditionalMeasureFlow& flow, const PathBundle& paths,
                        const NoiseBundle& noise, const BsdeOptions& options) {
    check_inputs(spec, flow, paths);
    if (!(noise.grid == paths.grid) || noise.n_paths != paths.n_paths)
        throw std::invalid_argument("noise does not match the paths");
    const std::size_t n = paths.n_paths, ns = paths.grid.n_steps;
    const std::size_t d = spec.d_state(), dc = spec.d_common(), da = spec.d_action();
    const double dt = paths.grid.dt();
    if (n < 2) throw std::invalid_argument("solve_bsde needs at least two paths");

    BsdeSolution sol;
    sol.grid = paths.grid;
    sol.d_state = d;
    sol.d_common = dc;
    sol.d_action = da;
    sol.basis = PolynomialBasis(d + dc, options.basis.degree);
    sol.steps.resize(ns);
    sol.n_paths = n;
    if (options.record_actions) sol.actions.resize(n * ns * da);
    const std::size_t nf = sol.basis.size();

    std::vector<double> y_next(n), gamma(n), target(n), feats(n * nf);
    parallel_chunks(n, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto& mu = flow.measure(ns, flow.locate(ns, paths.common_path(i))).summary();
            y_next[i] = spec.terminal_cost(paths.state(i, ns), mu);
            if (!std::isfinite(y_next[i])) throw NumericalError("non-finite terminal cost on path " + std::to_string(i));
            gamma[i] = y_next[i];
        }
    });

    const double nd = static_cast<double>(n);
    for (std::size_t k = ns; k-- > 0;) {
        BsdeStep& st = sol.steps[k];
        st.standardization.center.assign(d + dc, 0.0);
        st.standardization.scale.assign(d + dc, 0.0);
        for (std::size_t v = 0; v < d + dc; ++v) {
            auto raw = [&](std::size_t i) { return v < d ? paths.state(i, k)[v] : paths.common(i, k)[v - d]; };
            const double mean = chunked_sum(n, raw) / nd;
            const double var = chunked_sum(n, [&](std::size_t i) {
                                   const double e = raw(i) - mean;
                                   return e * e;
                               }) / nd;
            st.standardization.center[v] = mean;
            st.standardization.scale[v] = std::sqrt(var) < 1e-12 ? 0.0 : std::sqrt(var);
        }
        parallel_chunks(n, [&](std::size_t, std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i)
                step_features(sol.basis, st.standardization, paths.state(i, k), paths.common(i, k),
                              {feats.data() + i * nf, nf});
        });

        // Conditional mean of Y_{k+1}, used as a control variate for Z.
        const Eigen::VectorXd pre = chunked_regression(n, nf, 1, [&](std::size_t i, Vec& t) {
                                        t[0] = y_next[i];
                                        return feats.data() + i * nf;
                                    }).solve(options.basis.ridge);
        const Eigen::MatrixXd zc = chunked_regression(n, nf, d + dc, [&](std::size_t i, Vec& t) {
                                       const double* f = feats.data() + i * nf;
                                       const double r = y_next[i] - dot(pre.data(), f, nf);
                                       const auto dw = noise.dW(i, k);
                                       const auto dw0 = noise.dW0(i, k);
                                       for (std::size_t j = 0; j < d; ++j) t[j] = r * dw[j] / dt;
                                       for (std::size_t j = 0; j < dc; ++j) t[d + j] = r * dw0[j] / dt;
                                       return f;
                                   }).solve(options.basis.ridge);
        st.z_coef.resize(d * nf);
        st.z0_coef.resize(dc * nf);
        for (std::size_t j = 0; j < d; ++j)
            for (std::size_t f = 0; f < nf; ++f)
                st.z_coef[j * nf + f] = zc(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(j));
        for (std::size_t j = 0; j < dc; ++j)
            for (std::size_t f = 0; f < nf; ++f)
                st.z0_coef[j * nf + f] = zc(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(d + j));

        parallel_chunks(n, [&](std::size_t, std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                const BoxMinimum m = closure_action(spec, sol, flow, k, paths.state(i, k), paths.common_path(i),
                                                    options.minimizer);
                if (!std::isfinite(m.value))
                    throw NumericalError("non-finite Hamiltonian at path " + std::to_string(i) + ", step " +
                                         std::to_string(k));
                if (options.record_actions)
                    std::copy_n(m.action.begin(), da, sol.actions.begin() + static_cast<std::ptrdiff_t>((i * ns + k) * da));
                target[i] = y_next[i] + m.value * dt;
                gamma[i] += m.value * dt;
            }
        });

        const Eigen::VectorXd yc = chunked_regression(n, nf, 1, [&](std::size_t i, Vec& t) {
                                       t[0] = target[i];
                                       return feats.data() + i * nf;
                                   }).solve(options.basis.ridge);
        st.y_coef.assign(yc.data(), yc.data() + nf);
        st.y_residual_variance = chunked_sum(n, [&](std::size_t i) {
                                     const double e = target[i] - dot(yc.data(), feats.data() + i * nf, nf);
                                     return e * e;
                                 }) / nd;
        st.z_residual_variance = chunked_sum(n, [&](std::size_t i) {
                                     const double* f = feats.data() + i * nf;
                                     const double r = y_next[i] - dot(pre.data(), f, nf);
                                     double s = 0.0;
                                     for (std::size_t j = 0; j < d; ++j) {
                                         const double e = r * noise.dW(i, k)[j] / dt - dot(st.z_coef.data() + j * nf, f, nf);
                                         s += e * e;
                                     }
                                     return s;
                                 }) / nd;
        if (!std::isfinite(st.y_residual_variance) || st.y_residual_variance > options.explosion_threshold)
            throw NumericalError("BSDE regression exploded at step " + std::to_string(k) +
                                 " (residual variance " + std::to_string(st.y_residual_variance) + ")");
        if (k == 0) {
            sol.y0 = chunked_sum(n, [&](std::size_t i) { return target[i]; }) / nd;
        } else {
            parallel_chunks(n, [&](std::size_t, std::size_t begin, std::size_t end) {
                for (std::size_t i = begin; i < end; ++i) y_next[i] = dot(yc.data(), feats.data() + i * nf, nf);
            });
        }
    }

    const double gmean = chunked_sum(n, [&](std::size_t i) { return gamma[i]; }) / nd;
    const double gvar = chunked_sum(n, [&](std::size_t i) {
                            const double e = gamma[i] - gmean;
                            return e * e;
                        }) / (nd - 1.0);
    sol.y0_stderr = std::sqrt(gvar / nd);
    return sol;
}

MarkovPolicy extract_control(std::shared_ptr<const BsdeSolution> solution, const ProblemSpec& spec,
                             std::shared_ptr<const ConditionalMeasureFlow> flow, const MinimizerOptions& minimizer) {
    return MarkovPolicy::closure(spec, std::move(solution), std::move(flow), minimizer);
}

std::vector<double> sample_policy(const MarkovPolicy& policy, const PathBundle& paths, std::size_t* clamped) {
    const std::size_t n = paths.n_paths, ns = paths.grid.n_steps, da = policy.d_action();
    std::vector<double> out(n * ns * da);
    std::vector<std::size_t> clamps(chunk_count(n), 0);
    parallel_chunks(n, [&](std::size_t c, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto xc = paths.common_path(i);
            for (std::size_t k = 0; k < ns; ++k)
                if (policy.action(k, paths.state(i, k), xc.first((k + 1) * paths.d_common),
                                  {out.data() + (i * ns + k) * da, da}))
                    ++clamps[c];
        }
    });
    if (clamped) {
        *clamped = 0;
        for (const auto v : clamps) *clamped += v;
    }
    return out;
}

std::vector<double> scaled_drift_samples(const ProblemSpec& spec, const ConditionalMeasureFlow& flow,
                                         const PathBundle& paths, std::span<const double> actions) {
    check_inputs(spec, flow, paths);
    const std::size_t n = paths.n_paths, ns = paths.grid.n_steps;
    const std::size_t d = spec.d_state(), da = spec.d_action();
    if (actions.size() != n * ns * da) throw std::invalid_argument("action samples have the wrong size");
    std::vector<double> out(n * ns * d);
    parallel_chunks(n, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto xc = paths.common_path(i);
            for (std::size_t k = 0; k < ns; ++k) {
                const auto& mu = flow.measure(k, flow.locate(k, xc)).summary();
                spec.scaled_drift(paths.grid.time(k), paths.state(i, k), mu, actions.subspan((i * ns + k) * da, da),
                                  {out.data() + (i * ns + k) * d, d});
            }
        }
    });
    return out;
}

ObjectiveEstimate evaluate_objective(const ProblemSpec& spec, const ConditionalMeasureFlow& flow,
                                     std::span<const double> actions, const PathBundle& paths,
                                     const NoiseBundle& noise) {
    const std::size_t n = paths.n_paths, ns = paths.grid.n_steps, da = spec.d_action();
    if (!(noise.grid == paths.grid) || noise.n_paths != n) throw std::invalid_argument("noise does not match the paths");
    const auto lambda = scaled_drift_samples(spec, flow, paths, actions);
    const GirsanovWeights gw = stochastic_exponential(spec, lambda, noise);
    const double dt = paths.grid.dt();
    std::vector<double> payoff(n);
    parallel_chunks(n, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto xc = paths.common_path(i);
            double s = 0.0;
            for (std::size_t k = 0; k < ns; ++k) {
                const auto& mu = flow.measure(k, flow.locate(k, xc)).summary();
                s += spec.running_cost(paths.grid.time(k), paths.state(i, k), mu, actions.subspan((i * ns + k) * da, da)) * dt;
            }
            const auto& mu = flow.measure(ns, flow.locate(ns, xc)).summary();
            s += spec.terminal_cost(paths.state(i, ns), mu);
            if (!std::isfinite(s)) throw NumericalError("non-finite cost on path " + std::to_string(i));
            payoff[i] = s;
        }
    });
    const double nd = static_cast<double>(n);
    const double wsum = chunked_sum(n, [&](std::size_t i) { return gw.weight(i, ns); });
    const double num = chunked_sum(n, [&](std::size_t i) { return gw.weight(i, ns) * payoff[i]; });
    ObjectiveEstimate est;
    est.value = num / wsum;
    const double wbar = wsum / nd;
    est.influence.resize(n);
    for (std::size_t i = 0; i < n; ++i) est.influence[i] = gw.weight(i, ns) * (payoff[i] - est.value) / wbar;
    const double var = chunked_sum(n, [&](std::size_t i) { return est.influence[i] * est.influence[i]; }) / (nd - 1.0);
    est.stderr_ = std::sqrt(var / nd);
    return est;
}

PairedDifference paired_difference(const ObjectiveEstimate& a, const ObjectiveEstimate& b) {
    if (a.influence.size() != b.influence.size() || a.influence.size() < 2)
        throw std::invalid_argument("paired_difference needs estimates on the same paths");
    const std::size_t n = a.influence.size();
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += a.influence[i] - b.influence[i];
    m /= static_cast<double>(n);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = a.influence[i] - b.influence[i] - m;
        v += e * e;
    }
    v /= static_cast<double>(n - 1);
    return {a.value - b.value, std::sqrt(v / static_cast<double>(n))};
}

}  // namespace mfgcn
