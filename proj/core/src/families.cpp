#include "mfgcn/problem_model.hpp"

#include <mutex>
#include <stdexcept>

namespace mfgcn {
namespace {

FamilyParameters common_defaults() {
    return {
        {"T", 1.0},           {"p", 2.0},
        {"sigma", 1.0},       {"sigma0", 0.5},
        {"sigmac", 1.0},      {"common_drift", 0.0},
        {"action_lo", -1.0},  {"action_hi", 1.0},
        {"x0_mean", 0.0},     {"x0_std", 0.0},
        {"xc0_mean", 0.0},    {"xc0_std", 0.0},
        {"action_weight", 1.0}, {"state_weight", 1.0},
        {"terminal_weight", 1.0}, {"interaction", 1.0},
    };
}

ProblemData scalar_skeleton(const FamilyParameters& p) {
    ProblemData d;
    d.horizon = p.at("T");
    d.p = p.at("p");
    d.sigma = {p.at("sigma")};
    d.sigma0 = {p.at("sigma0")};
    d.sigmac = {p.at("sigmac")};
    d.action_box = {{p.at("action_lo")}, {p.at("action_hi")}};
    const double bc = p.at("common_drift");
    d.common_drift = [bc](double, std::span<const double>, std::span<double> out) { out[0] = bc; };
    d.common_drift_bound = std::abs(bc);
    d.initial_state = {{p.at("x0_mean")}, {p.at("x0_std")}, 4.0};
    d.initial_common = {{p.at("xc0_mean")}, {p.at("xc0_std")}, 4.0};
    d.parameters = p;
    return d;
}

ProblemSpec build_lq(const FamilyParameters& p) {
    ProblemData d = scalar_skeleton(p);
    d.family = "lq";
    const double ca = p.at("action_weight"), cx = p.at("state_weight");
    const double cg = p.at("terminal_weight"), kappa = p.at("interaction");
    d.drift_bound = std::max(std::abs(p.at("action_lo")), std::abs(p.at("action_hi")));
    d.drift = [](double, std::span<const double>, const MeasureSummary&, std::span<const double> a,
                 std::span<double> out) { out[0] = a[0]; };
    d.running_cost = [ca, cx, kappa](double, std::span<const double> x, const MeasureSummary& mu,
                                     std::span<const double> a) {
        const double dev = x[0] - kappa * mu.mean()[0];
        return 0.5 * ca * a[0] * a[0] + 0.5 * cx * dev * dev;
    };
    d.terminal_cost = [cg, kappa](std::span<const double> x, const MeasureSummary& mu) {
        const double dev = x[0] - kappa * mu.mean()[0];
        return 0.5 * cg * dev * dev;
    };
    return ProblemSpec(std::move(d));
}

ProblemSpec build_tanh(const FamilyParameters& p) {
    ProblemData d = scalar_skeleton(p);
    d.family = "tanh";
    const double a0 = p.at("a0");
    const double ca = p.at("action_weight"), cx = p.at("state_weight");
    const double cg = p.at("terminal_weight"), kappa = p.at("interaction");
    d.drift_bound = std::abs(a0) + std::max(std::abs(p.at("action_lo")), std::abs(p.at("action_hi")));
    d.drift = [a0](double, std::span<const double> x, const MeasureSummary&, std::span<const double> a,
                   std::span<double> out) { out[0] = a0 * std::tanh(x[0]) + a[0]; };
    d.running_cost = [ca, cx, kappa](double, std::span<const double> x, const MeasureSummary& mu,
                                     std::span<const double> a) {
        return 0.5 * ca * a[0] * a[0] + cx * std::abs(x[0] - kappa * mu.mean()[0]);
    };
    d.terminal_cost = [cg, kappa](std::span<const double> x, const MeasureSummary& mu) {
        return cg * std::abs(x[0] - kappa * mu.mean()[0]);
    };
    return ProblemSpec(std::move(d));
}

ProblemSpec build_martingale(const FamilyParameters& p) {
    ProblemData d = scalar_skeleton(p);
    d.family = "martingale";
    const double power = p.at("terminal_power");
    if (power != 1.0 && power != 2.0) throw std::invalid_argument("martingale: terminal_power must be 1 or 2");
    d.drift_bound = 0.0;
    d.drift = [](double, std::span<const double>, const MeasureSummary&, std::span<const double>,
                 std::span<double> out) { out[0] = 0.0; };
    d.running_cost = [](double, std::span<const double>, const MeasureSummary&, std::span<const double>) {
        return 0.0;
    };
    d.terminal_cost = [power](std::span<const double> x, const MeasureSummary&) {
        return power == 1.0 ? x[0] : x[0] * x[0];
    };
    return ProblemSpec(std::move(d));
}

struct Registry {
    std::mutex mutex;
    std::map<std::string, FamilyInfo> families;

    Registry() {
        families["lq"] = {"lq",
                          "b = a; f = ca a^2/2 + cx (x - kappa mean mu)^2/2; g = cg (x - kappa mean mu)^2/2",
                          common_defaults(), build_lq};
        FamilyParameters tanh_defaults = common_defaults();
        tanh_defaults["a0"] = 0.5;
        families["tanh"] = {"tanh",
                            "b = a0 tanh(x) + a; f = ca a^2/2 + cx |x - kappa mean mu|; g = cg |x - kappa mean mu|",
                            tanh_defaults, build_tanh};
        FamilyParameters mart_defaults = common_defaults();
        mart_defaults["terminal_power"] = 1.0;
        families["martingale"] = {"martingale", "b = 0; f = 0; g = x^terminal_power (1 or 2)", mart_defaults,
                                  build_martingale};
    }
};

Registry& registry() {
    static Registry r;
    return r;
}

}  // namespace

void register_family(FamilyInfo info) {
    auto& r = registry();
    std::lock_guard lock(r.mutex);
    r.families[info.name] = std::move(info);
}

const FamilyInfo& find_family(const std::string& name) {
    auto& r = registry();
    std::lock_guard lock(r.mutex);
    const auto it = r.families.find(name);
    if (it == r.families.end()) throw std::invalid_argument("unknown instance family '" + name + "'");
    return it->second;
}

std::vector<std::string> family_names() {
    auto& r = registry();
    std::lock_guard lock(r.mutex);
    std::vector<std::string> names;
    for (const auto& [name, info] : r.families) names.push_back(name);
    return names;
}

ProblemSpec make_family(const std::string& name, const FamilyParameters& params) {
    const FamilyInfo& info = find_family(name);
    FamilyParameters merged = info.defaults;
    for (const auto& [key, value] : params) {
        if (!merged.count(key))
            throw std::invalid_argument("family '" + name + "' has no parameter '" + key + "'");
        merged[key] = value;
    }
    return info.build(merged);
}

}  // namespace mfgcn
