#include "cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <stdexcept>

#include <CLI11.hpp>

#include "checks.hpp"
#include "mfgcn/config.hpp"
#include "mfgcn/csv_io.hpp"
#include "mfgcn/error.hpp"
#include "mfgcn/parallel.hpp"
#include "mfgcn/version.hpp"

namespace mfgcn::cli {
namespace {

namespace fs = std::filesystem;
using Manifest = std::vector<std::pair<std::string, std::string>>;

struct Flags {
    std::string config;
    std::uint64_t seed = 0;
    std::size_t paths = 0, steps = 0, bins = 0, max_iters = 0, threads = 0;
    double damping = 0.0, tol = 0.0;
    std::string out_dir;
    std::vector<CLI::Option*> opts;

    CLI::Option* seed_opt = nullptr;
    CLI::Option* paths_opt = nullptr;
    CLI::Option* steps_opt = nullptr;
    CLI::Option* bins_opt = nullptr;
    CLI::Option* max_iters_opt = nullptr;
    CLI::Option* threads_opt = nullptr;
    CLI::Option* damping_opt = nullptr;
    CLI::Option* tol_opt = nullptr;
    CLI::Option* out_dir_opt = nullptr;
};

void add_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "configuration file");
    f.seed_opt = cmd->add_option("--seed", f.seed, "estimation seed");
    f.paths_opt = cmd->add_option("--paths", f.paths, "number of particles");
    f.steps_opt = cmd->add_option("--steps", f.steps, "number of time steps");
    f.bins_opt = cmd->add_option("--bins", f.bins, "common-state bins per step");
    f.damping_opt = cmd->add_option("--damping", f.damping, "Picard damping in (0, 1]");
    f.max_iters_opt = cmd->add_option("--max-iters", f.max_iters, "maximum Picard iterations");
    f.tol_opt = cmd->add_option("--tol", f.tol, "residual tolerance");
    f.out_dir_opt = cmd->add_option("--out-dir", f.out_dir, "output directory");
    f.threads_opt = cmd->add_option("--threads", f.threads, "worker threads (default: $MFGCN_THREADS or 1)");
}

RunConfig resolve_config(const Flags& f) {
    RunConfig cfg = f.config.empty() ? parse_config_text("[problem]\nfamily = lq\n") : load_config(f.config);
    SolverConfig& s = cfg.solver;
    if (f.seed_opt->count()) s.seed = f.seed;
    if (f.paths_opt->count()) s.n_paths = f.paths;
    if (f.steps_opt->count()) s.n_steps = f.steps;
    if (f.bins_opt->count()) s.flow.n_bins = f.bins;
    if (f.damping_opt->count()) s.damping = f.damping;
    if (f.max_iters_opt->count()) s.max_iters = f.max_iters;
    if (f.tol_opt->count()) s.tol = f.tol;
    if (f.out_dir_opt->count()) cfg.output.out_dir = f.out_dir;
    s.validate();
    return cfg;
}

std::size_t resolve_threads(const Flags& f) {
    if (f.threads_opt->count()) return f.threads;
    if (const char* env = std::getenv(kThreadsEnv)) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end && *end == '\0' && v > 0) return v;
        throw std::invalid_argument(std::string(kThreadsEnv) + " must be a positive integer");
    }
    return 1;
}

std::string mode_string(const ConditioningMode& mode) {
    if (mode.kind == ConditioningMode::Kind::kCurrentValue) return "current_value";
    std::string s = "partition:";
    for (std::size_t i = 0; i < mode.partition_times.size(); ++i)
        s += (i ? "," : "") + format_double(mode.partition_times[i]);
    return s;
}

Manifest base_manifest(const std::string& command, const Flags& f, const RunConfig& cfg, const ProblemSpec& spec) {
    Manifest m;
    m.emplace_back("program", "mfgcn");
    m.emplace_back("version", kVersion);
    m.emplace_back("command", command);
    m.emplace_back("config_file", f.config.empty() ? "(defaults)" : f.config);
    for (const auto& [k, v] : cfg.entries) m.emplace_back("config." + k, v);
    m.emplace_back("problem.family", spec.data().family);
    for (const auto& [k, v] : spec.data().parameters) m.emplace_back("problem." + k, format_double(v));
    const SolverConfig& s = cfg.solver;
    m.emplace_back("solver.n_paths", std::to_string(s.n_paths));
    m.emplace_back("solver.n_steps", std::to_string(s.n_steps));
    m.emplace_back("solver.n_bins", std::to_string(s.flow.n_bins));
    m.emplace_back("solver.min_bin_count", std::to_string(s.flow.min_bin_count));
    m.emplace_back("solver.partition_bins", std::to_string(s.flow.partition_bins));
    m.emplace_back("solver.conditioning", mode_string(s.flow.mode));
    m.emplace_back("solver.p", format_double(s.flow.p));
    m.emplace_back("solver.basis_degree", std::to_string(s.bsde.basis.degree));
    m.emplace_back("solver.ridge", format_double(s.bsde.basis.ridge));
    m.emplace_back("solver.explosion_threshold", format_double(s.bsde.explosion_threshold));
    m.emplace_back("solver.minimizer_grid", std::to_string(s.bsde.minimizer.grid_points));
    m.emplace_back("solver.golden_steps", std::to_string(s.bsde.minimizer.golden_steps));
    m.emplace_back("solver.damping", format_double(s.damping));
    m.emplace_back("solver.max_iters", std::to_string(s.max_iters));
    m.emplace_back("solver.tol", format_double(s.tol));
    m.emplace_back("solver.q", format_double(s.q));
    m.emplace_back("solver.stall_window", std::to_string(s.stall_window));
    m.emplace_back("solver.min_damping", format_double(s.min_damping));
    m.emplace_back("solver.seed", std::to_string(s.seed));
    m.emplace_back("solver.eval_seed", std::to_string(s.eval_seed));
    m.emplace_back("solver.project", s.project ? "true" : "false");
    m.emplace_back("solver.projection_grid", std::to_string(s.projection.grid_points));
    m.emplace_back("threads", std::to_string(worker_count()));
    return m;
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

int cmd_solve(const Flags& f, std::ostream& out) {
    const auto start = std::chrono::steady_clock::now();
    const RunConfig cfg = resolve_config(f);
    const ProblemSpec spec = cfg.build_problem();
    const fs::path dir = cfg.output.out_dir;
    fs::create_directories(dir);

    const EquilibriumResult res = solve_equilibrium(spec, cfg.solver, [&](const IterationRecord& r) {
        out << "iter " << r.iter << " residual=" << format_double(r.residual) << " y0=" << format_double(r.y0)
            << " damping=" << format_double(r.damping) << '\n';
    });

    write_residuals_csv(dir / "residuals.csv", res.history);
    write_bsde_csv(dir / "bsde.csv", *res.solution);
    if (cfg.output.write_flow) write_flow_csv(dir / "flow.csv", *res.flow);
    if (cfg.output.write_policy && res.projection) write_policy_csv(dir / "policy.csv", *res.projection->policy.table_data());

    Manifest m = base_manifest("solve", f, cfg, spec);
    m.emplace_back("status", to_string(res.status));
    m.emplace_back("phi_evaluations", std::to_string(res.history.size()));
    m.emplace_back("final_iter", std::to_string(res.history.back().iter));
    m.emplace_back("final_residual", format_double(res.final_residual()));
    m.emplace_back("y0", format_double(res.solution->y0));
    m.emplace_back("y0_stderr", format_double(res.solution->y0_stderr));
    if (res.projection) {
        m.emplace_back("projection.nodes", std::to_string(res.projection->nodes));
        m.emplace_back("projection.flagged", std::to_string(res.projection->flagged));
    }
    for (std::size_t i = 0; i < res.warnings.size(); ++i) m.emplace_back("warning." + std::to_string(i), res.warnings[i]);
    for (const auto& r : res.history) m.emplace_back("wall_ms.iter" + std::to_string(r.iter), format_double(r.wall_ms));
    m.emplace_back("wall_ms.total", format_double(elapsed_ms(start)));
    write_manifest(dir / "manifest.txt", m);

    out << "status=" << to_string(res.status) << " final_iter=" << res.history.back().iter
        << " residual=" << format_double(res.final_residual()) << " y0=" << format_double(res.solution->y0) << " +- "
        << format_double(res.solution->y0_stderr) << '\n';
    return res.converged() ? kExitOk : kExitNotConverged;
}

int cmd_phi(const Flags& f, std::ostream& out) {
    const auto start = std::chrono::steady_clock::now();
    const RunConfig cfg = resolve_config(f);
    const ProblemSpec spec = cfg.build_problem();
    const fs::path dir = cfg.output.out_dir;
    fs::create_directories(dir);
    const EstimationSample sample = make_estimation_sample(spec, cfg.solver.n_paths, cfg.solver.n_steps, cfg.solver.seed);
    auto m0 = std::make_shared<const ConditionalMeasureFlow>(estimate_conditional_flow(sample.paths, cfg.solver.flow));
    const PhiResult phi = apply_phi(spec, m0, sample, cfg.solver);
    const double residual = flow_distance(*phi.flow, *m0, cfg.solver.q);

    write_bsde_csv(dir / "bsde.csv", *phi.solution);
    if (cfg.output.write_flow) write_flow_csv(dir / "flow.csv", *phi.flow);
    Manifest m = base_manifest("phi", f, cfg, spec);
    m.emplace_back("residual", format_double(residual));
    m.emplace_back("y0", format_double(phi.solution->y0));
    m.emplace_back("y0_stderr", format_double(phi.solution->y0_stderr));
    m.emplace_back("wall_ms.total", format_double(elapsed_ms(start)));
    write_manifest(dir / "manifest.txt", m);
    out << "d_M(Phi(m0), m0)=" << format_double(residual) << " y0=" << format_double(phi.solution->y0) << " +- "
        << format_double(phi.solution->y0_stderr) << '\n';
    return kExitOk;
}

int cmd_bsde_check(const Flags& f, std::ostream& out) {
    const RunConfig cfg = resolve_config(f);
    const std::size_t n = cfg.solver.n_paths, ns = cfg.solver.n_steps;
    const std::uint64_t seed = cfg.solver.seed;
    bool ok = true;
    for (const int power : {1, 2}) {
        const auto r = checks::martingale_case(power, n, ns, seed);
        const bool pass = std::abs(r.y0 - r.expected) <= 3.0 * r.stderr_ && (power != 1 || r.z_rms_max <= 0.05);
        ok = ok && pass;
        out << (pass ? "PASS" : "FAIL") << " zero-driver terminal x^" << power << ": Y0=" << format_double(r.y0)
            << " expected=" << format_double(r.expected) << " se=" << format_double(r.stderr_)
            << " max_z_rms=" << format_double(r.z_rms_max) << '\n';
    }
    checks::LqOracleOptions lo;
    lo.n_paths = n;
    lo.n_steps = ns;
    lo.seed = seed;
    const auto lq = checks::lq_hjb_case(lo);
    const bool pass_y0 = std::abs(lq.y0 - lq.hjb_y0) <= 0.02;
    const bool pass_pol = lq.policy_max_dev <= 0.1;
    ok = ok && pass_y0 && pass_pol;
    out << (pass_y0 ? "PASS" : "FAIL") << " no-interaction LQ: Y0=" << format_double(lq.y0)
        << " hjb=" << format_double(lq.hjb_y0) << " se=" << format_double(lq.stderr_) << '\n';
    out << (pass_pol ? "PASS" : "FAIL") << " no-interaction LQ feedback: max |a - a_hjb| on |x|<=2 = "
        << format_double(lq.policy_max_dev) << " (basis degree " << lo.policy_degree << ", " << lo.policy_paths
        << " paths; quadratic basis: " << format_double(lq.policy_max_dev_default_basis) << ")\n";
    return ok ? kExitOk : kExitError;
}

int cmd_w1_oracle(const Flags& f, std::ostream& out) {
    const std::uint64_t seed = f.seed_opt->count() ? f.seed : 1;
    const auto r = checks::transport_oracle_suite(200, 10, seed);
    const bool ok = r.max_lp_vs_quantile <= 1e-9 && r.max_lp_vs_permutation <= 1e-9;
    out << (ok ? "PASS" : "FAIL") << " transport oracle: instances=" << r.instances
        << " max|quantile-lp|=" << format_double(r.max_lp_vs_quantile)
        << " max|permutation-other|=" << format_double(r.max_lp_vs_permutation) << '\n';
    return ok ? kExitOk : kExitError;
}

int cmd_mimic_check(const Flags& f, std::ostream& out) {
    const RunConfig cfg = resolve_config(f);
    const ProblemSpec spec = cfg.build_problem();
    const auto base = checks::mimic_experiment(spec, cfg.solver, checks::MimicControl::kBsdeFeedback);
    const auto path = checks::mimic_experiment(spec, cfg.solver, checks::MimicControl::kPathDependent);
    auto line = [&](const char* name, const checks::MimicExperiment& e) {
        out << name << ": max_w1=" << format_double(e.report.max_distance)
            << " mean_w1=" << format_double(e.report.mean_distance) << " J(alpha)=" << format_double(e.gap.original)
            << " J(alpha_M)=" << format_double(e.gap.projected) << " gap=" << format_double(e.gap.gap)
            << " se=" << format_double(e.gap.stderr_) << " flagged=" << e.projection.flagged << '\n';
        for (std::size_t i = 0; i < e.report.steps.size(); ++i)
            out << "  step " << e.report.steps[i] << " w1=" << format_double(e.report.distances[i]) << '\n';
    };
    line("feedback baseline", base);
    line("path-dependent", path);
    const bool ok = path.report.max_distance <= 2.0 * base.report.max_distance &&
                    path.report.mean_distance <= 2.0 * base.report.mean_distance &&
                    path.gap.gap >= -3.0 * path.gap.stderr_;
    out << (ok ? "PASS" : "FAIL") << " mimicking within twice the feedback baseline\n";
    return ok ? kExitOk : kExitError;
}

int cmd_validate(const Flags& f, std::ostream& out) {
    const RunConfig cfg = resolve_config(f);
    const ProblemSpec spec = cfg.build_problem();
    const ValidationReport rep = validate_spec(spec, 1000, cfg.solver.seed);
    out << "max|b|=" << format_double(rep.max_drift) << " (bound " << format_double(spec.data().drift_bound) << ")\n"
        << "max|b^c|=" << format_double(rep.max_common_drift) << " (bound "
        << format_double(spec.data().common_drift_bound) << ")\n"
        << "cond(sigma)=" << format_double(rep.sigma_condition) << " cond(sigma^c)=" << format_double(rep.sigmac_condition)
        << '\n';
    for (const auto& fail : rep.failures) out << "FAIL " << fail << '\n';
    out << (rep.passed() ? "PASS" : "FAIL") << " validate_spec\n";
    return rep.passed() ? kExitOk : kExitError;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Particle solver for mean field games with common noise", "mfgcn"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    struct Sub {
        const char* name;
        const char* help;
        int (*run)(const Flags&, std::ostream&);
    };
    const Sub subs[] = {
        {"solve", "damped Picard iteration for the equilibrium flow", cmd_solve},
        {"phi", "one application of the best-response / conditional-law map", cmd_phi},
        {"bsde-check", "BSDE against martingale and finite-difference references", cmd_bsde_check},
        {"w1-oracle", "quantile coupling vs transport LP vs exhaustive search", cmd_w1_oracle},
        {"mimic-check", "Markov projection mimicking report", cmd_mimic_check},
        {"validate", "probe drift bounds and matrix conditioning", cmd_validate},
    };
    std::vector<Flags> flags(std::size(subs));
    std::vector<CLI::App*> cmds;
    for (std::size_t i = 0; i < std::size(subs); ++i) {
        cmds.push_back(app.add_subcommand(subs[i].name, subs[i].help));
        add_flags(cmds.back(), flags[i]);
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        for (auto* c : cmds)
            if (c->parsed() && e.get_exit_code() == 0) {
                out << c->help();
                return kExitOk;
            }
        err << "error: " << e.what() << '\n';
        return kExitError;
    }

    for (std::size_t i = 0; i < cmds.size(); ++i) {
        if (!cmds[i]->parsed()) continue;
        try {
            set_worker_count(resolve_threads(flags[i]));
            return subs[i].run(flags[i], out);
        } catch (const ConfigError& e) {
            err << "config error: " << e.what() << '\n';
        } catch (const NumericalError& e) {
            err << "numerical error: " << e.what() << '\n';
        } catch (const std::exception& e) {
            err << "error: " << e.what() << '\n';
        }
        return kExitError;
    }
    err << "error: no subcommand\n";
    return kExitError;
}

}  // namespace mfgcn::cli
