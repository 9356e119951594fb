#include "mfgcn/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mfgcn/error.hpp"

namespace mfgcn {
namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& v, int line, const std::string& key) {
    double out = 0.0;
    const char* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end || !std::isfinite(out))
        throw ConfigError(line, "invalid number '" + v + "' for " + key);
    return out;
}

std::size_t parse_count(const std::string& v, int line, const std::string& key, std::size_t min_value) {
    unsigned long long out = 0;
    const char* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) throw ConfigError(line, "invalid integer '" + v + "' for " + key);
    if (out < min_value) throw ConfigError(line, key + " out of range (must be >= " + std::to_string(min_value) + ")");
    return static_cast<std::size_t>(out);
}

std::uint64_t parse_seed(const std::string& v, int line, const std::string& key) {
    std::uint64_t out = 0;
    const char* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) throw ConfigError(line, "invalid seed '" + v + "' for " + key);
    return out;
}

bool parse_bool(const std::string& v, int line, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(line, "invalid boolean '" + v + "' for " + key);
}

double positive(double v, int line, const std::string& key) {
    if (!(v > 0.0)) throw ConfigError(line, key + " out of range (must be > 0)");
    return v;
}

void apply_solver_key(SolverConfig& s, const std::string& key, const std::string& v, int line) {
    if (key == "n_paths") s.n_paths = parse_count(v, line, key, 2);
    else if (key == "n_steps") s.n_steps = parse_count(v, line, key, 1);
    else if (key == "n_bins") s.flow.n_bins = parse_count(v, line, key, 1);
    else if (key == "min_bin_count") s.flow.min_bin_count = parse_count(v, line, key, 1);
    else if (key == "partition_bins") s.flow.partition_bins = parse_count(v, line, key, 1);
    else if (key == "partition") {
        if (v == "none" || v.empty()) {
            s.flow.mode = ConditioningMode::current_value();
        } else {
            std::vector<double> times;
            std::stringstream ss(v);
            std::string item;
            while (std::getline(ss, item, ',')) times.push_back(parse_double(trim(item), line, key));
            for (std::size_t i = 1; i < times.size(); ++i)
                if (times[i] < times[i - 1]) throw ConfigError(line, "partition times must be nondecreasing");
            if (times.size() < 2) throw ConfigError(line, "partition needs at least two times");
            s.flow.mode = ConditioningMode::partition(std::move(times));
        }
    } else if (key == "p") {
        s.flow.p = parse_double(v, line, key);
        if (s.flow.p < 2.0) throw ConfigError(line, "p out of range (must be >= 2)");
    } else if (key == "basis_degree") s.bsde.basis.degree = parse_count(v, line, key, 1);
    else if (key == "ridge") {
        s.bsde.basis.ridge = parse_double(v, line, key);
        if (s.bsde.basis.ridge < 0.0) throw ConfigError(line, "ridge out of range (must be >= 0)");
    } else if (key == "explosion_threshold") s.bsde.explosion_threshold = positive(parse_double(v, line, key), line, key);
    else if (key == "damping") {
        s.damping = parse_double(v, line, key);
        if (!(s.damping > 0.0 && s.damping <= 1.0)) throw ConfigError(line, "damping out of range (0, 1]");
    } else if (key == "max_iters") s.max_iters = parse_count(v, line, key, 1);
    else if (key == "tol") s.tol = positive(parse_double(v, line, key), line, key);
    else if (key == "q") {
        s.q = parse_double(v, line, key);
        if (s.q < 1.0) throw ConfigError(line, "q out of range (must be >= 1)");
    } else if (key == "stall_window") s.stall_window = parse_count(v, line, key, 1);
    else if (key == "min_damping") s.min_damping = positive(parse_double(v, line, key), line, key);
    else if (key == "seed") s.seed = parse_seed(v, line, key);
    else if (key == "eval_seed") s.eval_seed = parse_seed(v, line, key);
    else if (key == "project") s.project = parse_bool(v, line, key);
    else if (key == "projection_grid") s.projection.grid_points = parse_count(v, line, key, 2);
    else if (key == "minimizer_grid") {
        s.bsde.minimizer.grid_points = parse_count(v, line, key, 2);
        s.projection.minimizer.grid_points = s.bsde.minimizer.grid_points;
    } else if (key == "golden_steps") {
        s.bsde.minimizer.golden_steps = parse_count(v, line, key, 0);
        s.projection.minimizer.golden_steps = s.bsde.minimizer.golden_steps;
    } else throw ConfigError(line, "unknown key '" + key + "' in [solver]");
}

}  // namespace

const std::vector<std::string>& solver_keys() {
    static const std::vector<std::string> keys = {
        "n_paths", "n_steps", "n_bins", "min_bin_count", "partition_bins", "partition", "p", "basis_degree",
        "ridge", "explosion_threshold", "damping", "max_iters", "tol", "q", "stall_window", "min_damping",
        "seed", "eval_seed", "project", "projection_grid", "minimizer_grid", "golden_steps"};
    return keys;
}

ProblemSpec RunConfig::build_problem() const { return make_family(family, problem_params); }

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string raw, section;
    int line = 0;
    int family_line = 0;
    std::vector<std::pair<std::string, int>> param_lines;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ConfigError(line, "malformed section header '" + s + "'");
            section = trim(s.substr(1, s.size() - 2));
            if (section != "problem" && section != "solver" && section != "output")
                throw ConfigError(line, "unknown section [" + section + "]");
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError(line, "expected 'key = value', got '" + s + "'");
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (key.empty()) throw ConfigError(line, "missing key");
        if (section.empty()) throw ConfigError(line, "key '" + key + "' outside of a section");
        cfg.entries.emplace_back(section + "." + key, value);

        if (section == "problem") {
            if (key == "family") {
                cfg.family = value;
                family_line = line;
            } else {
                cfg.problem_params[key] = parse_double(value, line, key);
                param_lines.emplace_back(key, line);
            }
        } else if (section == "solver") {
            apply_solver_key(cfg.solver, key, value, line);
        } else {
            if (key == "out_dir") cfg.output.out_dir = value;
            else if (key == "write_flow") cfg.output.write_flow = parse_bool(value, line, key);
            else if (key == "write_policy") cfg.output.write_policy = parse_bool(value, line, key);
            else throw ConfigError(line, "unknown key '" + key + "' in [output]");
        }
    }

    const FamilyInfo* info = nullptr;
    try {
        info = &find_family(cfg.family);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(family_line, e.what());
    }
    for (const auto& [key, l] : param_lines)
        if (!info->defaults.count(key))
            throw ConfigError(l, "unknown key '" + key + "' for family '" + cfg.family + "'");
    try {
        cfg.solver.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(0, e.what());
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(0, "cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

}  // namespace mfgcn
