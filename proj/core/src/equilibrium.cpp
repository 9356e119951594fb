#include "mfgcn/equilibrium.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mfgcn/error.hpp"

namespace mfgcn {

void SolverConfig::validate() const {
    if (n_paths < 2) throw std::invalid_argument("n_paths must be at least 2");
    if (n_steps == 0) throw std::invalid_argument("n_steps must be positive");
    if (flow.n_bins == 0) throw std::invalid_argument("n_bins must be positive");
    if (flow.min_bin_count == 0) throw std::invalid_argument("min_bin_count must be positive");
    if (flow.partition_bins == 0) throw std::invalid_argument("partition_bins must be positive");
    if (!(damping > 0.0 && damping <= 1.0)) throw std::invalid_argument("damping must lie in (0, 1]");
    if (max_iters == 0) throw std::invalid_argument("max_iters must be positive");
    if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
    if (!(q >= 1.0)) throw std::invalid_argument("q must be >= 1");
    if (stall_window == 0) throw std::invalid_argument("stall_window must be positive");
    if (!(min_damping > 0.0)) throw std::invalid_argument("min_damping must be positive");
    if (!(bsde.basis.ridge >= 0.0)) throw std::invalid_argument("ridge must be >= 0");
    if (!(bsde.explosion_threshold > 0.0)) throw std::invalid_argument("explosion_threshold must be positive");
}

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::kConverged: return "converged";
        case SolveStatus::kMaxIterations: return "max_iterations";
        case SolveStatus::kDampingExhausted: return "damping_exhausted";
    }
    return "unknown";
}

EstimationSample make_estimation_sample(const ProblemSpec& spec, std::size_t n_paths, std::size_t n_steps,
                                        std::uint64_t seed) {
    const TimeGrid grid(spec.horizon(), n_steps);
    auto noise = std::make_shared<const NoiseBundle>(
        generate_noise(n_paths, grid, seed, spec.d_state(), spec.d_common()));
    auto paths = std::make_shared<const PathBundle>(simulate_driftless_state(spec, *noise));
    return {std::move(paths), std::move(noise)};
}

PhiResult apply_phi(const ProblemSpec& spec, std::shared_ptr<const ConditionalMeasureFlow> m,
                    const EstimationSample& sample, const SolverConfig& config) {
    if (!m) throw std::invalid_argument("apply_phi: no input flow");
    BsdeOptions bopts = config.bsde;
    bopts.record_actions = true;
    auto solution = std::make_shared<const BsdeSolution>(solve_bsde(spec, *m, *sample.paths, *sample.noise, bopts));
    PhiResult out;
    for (std::size_t i = 0; i < solution->actions.size(); i += spec.d_action()) {
        Vec a{};
        std::copy_n(solution->actions.begin() + static_cast<std::ptrdiff_t>(i), spec.d_action(), a.begin());
        if (spec.action_box().clamp({a.data(), spec.d_action()})) ++out.clamp_count;
    }
    const auto lambda = scaled_drift_samples(spec, *m, *sample.paths, solution->actions);
    out.weights = stochastic_exponential(spec, lambda, *sample.noise);
    out.flow = std::make_shared<const ConditionalMeasureFlow>(
        estimate_conditional_flow(sample.paths, out.weights, config.flow));
    out.solution = std::move(solution);
    return out;
}

EquilibriumResult solve_equilibrium(const ProblemSpec& spec, const SolverConfig& config,
                                    const IterationCallback& on_iteration) {
    config.validate();
    EquilibriumResult res;
    res.sample = make_estimation_sample(spec, config.n_paths, config.n_steps, config.seed);
    auto m = std::make_shared<const ConditionalMeasureFlow>(estimate_conditional_flow(res.sample.paths, config.flow));
    for (const auto& w : m->warnings()) res.warnings.push_back(w);

    double lambda = config.damping;
    double previous = std::numeric_limits<double>::infinity();
    std::size_t stalls = 0;
    for (std::size_t iter = 0; iter < config.max_iters; ++iter) {
        const auto start = std::chrono::steady_clock::now();
        PhiResult phi = apply_phi(spec, m, res.sample, config);
        const double residual = flow_distance(*phi.flow, *m, config.q);
        if (!std::isfinite(residual)) throw NumericalError("non-finite Picard residual");

        IterationRecord rec;
        rec.iter = iter;
        rec.residual = residual;
        rec.y0 = phi.solution->y0;
        rec.y0_stderr = phi.solution->y0_stderr;
        rec.damping = iter == 0 ? 1.0 : lambda;

        res.flow = m;
        res.phi_flow = phi.flow;
        res.solution = phi.solution;
        res.weights = std::move(phi.weights);
        if (phi.clamp_count > 0)
            res.warnings.push_back(std::to_string(phi.clamp_count) + " BSDE actions clamped into the action box");

        bool stop = false;
        if (residual <= config.tol) {
            res.status = SolveStatus::kConverged;
            stop = true;
        } else if (iter == 0) {
            m = phi.flow;
        } else {
            stalls = residual >= previous ? stalls + 1 : 0;
            if (stalls >= config.stall_window) {
                lambda *= 0.5;
                stalls = 0;
                if (lambda < config.min_damping) {
                    res.status = SolveStatus::kDampingExhausted;
                    stop = true;
                }
            }
            if (!stop) m = std::make_shared<const ConditionalMeasureFlow>(mix_flows(*m, *phi.flow, lambda));
        }
        previous = residual;
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        res.history.push_back(rec);
        if (on_iteration) on_iteration(rec);
        if (stop) break;
    }

    res.policy = extract_control(res.solution, spec, res.flow, config.bsde.minimizer);
    if (config.project && spec.d_state() == 1 && spec.d_common() == 1 &&
        config.flow.mode.kind == ConditioningMode::Kind::kCurrentValue) {
        res.projection = project_control(spec, *res.sample.paths, res.solution->actions, *res.flow, res.weights,
                                         config.projection);
    }
    return res;
}

namespace {

ObjectiveEstimate value_of(const ProblemSpec& spec, const ConditionalMeasureFlow& m, const MarkovPolicy& policy,
                           const EstimationSample& sample) {
    return evaluate_objective(spec, m, sample_policy(policy, *sample.paths), *sample.paths, *sample.noise);
}

}  // namespace

ExploitabilityReport exploitability(const ProblemSpec& spec, std::shared_ptr<const ConditionalMeasureFlow> m,
                                    const MarkovPolicy& policy, const SolverConfig& config, std::uint64_t eval_seed) {
    if (!m) throw std::invalid_argument("exploitability: no flow");
    const std::size_t ns = m->grid().n_steps, da = spec.d_action();
    const EstimationSample eval = make_estimation_sample(spec, config.n_paths, ns, eval_seed);
    const ObjectiveEstimate base = value_of(spec, *m, policy, eval);

    ExploitabilityReport rep;
    rep.policy_value = base.value;
    rep.policy_stderr = base.stderr_;
    std::vector<ObjectiveEstimate> values;
    auto record = [&](std::string label, ObjectiveEstimate est) {
        rep.deviations.push_back({std::move(label), est.value, est.stderr_});
        values.push_back(std::move(est));
    };

    // Best response fitted on an independent sample, evaluated out of sample.
    const EstimationSample fit = make_estimation_sample(spec, config.n_paths, ns, eval_seed ^ 0x9E3779B97F4A7C15ULL);
    BsdeOptions bopts = config.bsde;
    bopts.record_actions = false;
    auto br = std::make_shared<const BsdeSolution>(solve_bsde(spec, *m, *fit.paths, *fit.noise, bopts));
    record("bsde_best_response", value_of(spec, *m, extract_control(br, spec, m, config.bsde.minimizer), eval));

    const ActionBox& box = spec.action_box();
    const std::size_t n = eval.paths->n_paths;
    constexpr std::size_t kConstants = 9;
    for (std::size_t j = 0; j < kConstants; ++j) {
        const double s = static_cast<double>(j) / static_cast<double>(kConstants - 1);
        std::vector<double> acts(n * ns * da);
        for (std::size_t i = 0; i < acts.size(); ++i) {
            const std::size_t r = i % da;
            acts[i] = box.lo[r] + s * (box.hi[r] - box.lo[r]);
        }
        std::string label = "constant(";
        for (std::size_t r = 0; r < da; ++r) label += (r ? "," : "") + std::to_string(acts[r]);
        record(label + ")", evaluate_objective(spec, *m, acts, *eval.paths, *eval.noise));
    }

    const auto own = sample_policy(policy, *eval.paths);
    for (const double shift : {-0.1, 0.1}) {
        std::vector<double> acts = own;
        for (std::size_t i = 0; i < acts.size(); i += da) box.clamp({acts.data() + i, da});
        for (std::size_t i = 0; i < acts.size(); ++i) acts[i] += shift;
        for (std::size_t i = 0; i < acts.size(); i += da) box.clamp({acts.data() + i, da});
        record(shift < 0 ? "policy-0.1" : "policy+0.1", evaluate_objective(spec, *m, acts, *eval.paths, *eval.noise));
    }

    std::size_t best = 0;
    for (std::size_t j = 1; j < values.size(); ++j)
        if (values[j].value < values[best].value) best = j;
    const PairedDifference diff = paired_difference(base, values[best]);
    rep.epsilon = diff.value;
    rep.epsilon_stderr = diff.stderr_;
    rep.best_deviation = rep.deviations[best].label;
    return rep;
}

ConsistencyReport consistency_check(const ProblemSpec& spec, const ConditionalMeasureFlow& m,
                                    const MarkovPolicy& policy, const SolverConfig& config, std::uint64_t seed) {
    const NoiseBundle noise = generate_noise(config.n_paths, m.grid(), seed, spec.d_state(), spec.d_common());
    auto sim = std::make_shared<const PathBundle>(simulate_markov_sde(spec, policy, m, noise));
    ConsistencyReport rep;
    rep.simulated = std::make_shared<const ConditionalMeasureFlow>(estimate_conditional_flow(sim, m.options()));
    rep.distance = flow_distance(m, *rep.simulated, config.q);
    return rep;
}

}  // namespace mfgcn
