#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mfgcn/rng.hpp"

namespace mfgcn {

/// Upper bound on every dimension (d_I, d_C, d_A). Hot loops use fixed
/// stack buffers of this size.
inline constexpr std::size_t kMaxDim = 8;
using Vec = std::array<double, kMaxDim>;

/// Finite-support probability measure on R^d with cached first and p-th moments.
/// Coefficients see the population only through this type.
class MeasureSummary {
public:
    MeasureSummary() = default;

    /// `points` is row-major (n x dim). Weights are renormalized to sum to 1;
    /// negative or all-zero weights are rejected.
    MeasureSummary(std::size_t dim, std::vector<double> points, std::vector<double> weights,
                   double p = 2.0);

    static MeasureSummary dirac(std::span<const double> point, double p = 2.0);
    static MeasureSummary uniform(std::size_t dim, std::vector<double> points, double p = 2.0);

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return weights_.size(); }
    std::span<const double> point(std::size_t i) const { return {points_.data() + i * dim_, dim_}; }
    const std::vector<double>& points() const { return points_; }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<double>& mean() const { return mean_; }
    /// |mu|^p = sum_i w_i |x_i|^p.
    double pth_moment() const { return pth_moment_; }
    double p() const { return p_; }

private:
    std::size_t dim_ = 0;
    std::vector<double> points_;
    std::vector<double> weights_;
    std::vector<double> mean_;
    double pth_moment_ = 0.0;
    double p_ = 2.0;
};

/// Closed box A = prod_i [lo_i, hi_i].
struct ActionBox {
    std::vector<double> lo;
    std::vector<double> hi;

    std::size_t dim() const { return lo.size(); }
    bool contains(std::span<const double> a, double tol = 0.0) const;
    /// Clamps in place; returns true if any coordinate moved.
    bool clamp(std::span<double> a) const;
};

/// Law of an initial condition: point mass (std = 0) or a diagonal Gaussian
/// truncated at `truncation` standard deviations (by rejection).
struct InitialLaw {
    std::vector<double> mean;
    std::vector<double> std;
    double truncation = 4.0;

    static InitialLaw point(std::vector<double> value);
    bool is_point_mass() const;
    void sample(const CounterRng& rng, Stream stream, std::uint32_t path, std::span<double> out) const;
};

using DriftFn = std::function<void(double t, std::span<const double> x, const MeasureSummary& mu,
                                   std::span<const double> a, std::span<double> out)>;
using CommonDriftFn = std::function<void(double t, std::span<const double> xc, std::span<double> out)>;
using RunningCostFn = std::function<double(double t, std::span<const double> x,
                                           const MeasureSummary& mu, std::span<const double> a)>;
using TerminalCostFn = std::function<double(std::span<const double> x, const MeasureSummary& mu)>;

/// Raw game description. Matrices are row-major.
struct ProblemData {
    std::size_t d_state = 1;
    std::size_t d_common = 1;
    std::size_t d_action = 1;
    double horizon = 1.0;
    double p = 2.0;
    std::vector<double> sigma;   // d_state x d_state
    std::vector<double> sigma0;  // d_state x d_common
    std::vector<double> sigmac;  // d_common x d_common
    ActionBox action_box;
    double drift_bound = 1.0;
    double common_drift_bound = 0.0;
    DriftFn drift;
    CommonDriftFn common_drift;
    RunningCostFn running_cost;
    TerminalCostFn terminal_cost;
    InitialLaw initial_state;
    InitialLaw initial_common;
    std::string family = "custom";
    std::map<std::string, double> parameters;
};

/// Immutable game instance. Construction checks shapes, the action box and
/// p >= 2, and computes sigma^{-1} together with the condition numbers of
/// sigma and sigma^c. Singular matrices are recorded rather than rejected so
/// that validate_spec can report them; sigma_inv() throws in that case.
class ProblemSpec {
public:
    explicit ProblemSpec(ProblemData data);

    const ProblemData& data() const { return data_; }
    std::size_t d_state() const { return data_.d_state; }
    std::size_t d_common() const { return data_.d_common; }
    std::size_t d_action() const { return data_.d_action; }
    double horizon() const { return data_.horizon; }
    double p() const { return data_.p; }
    const ActionBox& action_box() const { return data_.action_box; }

    double sigma_condition() const { return sigma_cond_; }
    double sigmac_condition() const { return sigmac_cond_; }
    bool sigma_invertible() const;
    bool sigmac_invertible() const;
    /// Row-major sigma^{-1}; throws std::domain_error if sigma is singular.
    const std::vector<double>& sigma_inv() const;

    void drift(double t, std::span<const double> x, const MeasureSummary& mu,
               std::span<const double> a, std::span<double> out) const {
        data_.drift(t, x, mu, a, out);
    }
    void common_drift(double t, std::span<const double> xc, std::span<double> out) const {
        data_.common_drift(t, xc, out);
    }
    double running_cost(double t, std::span<const double> x, const MeasureSummary& mu,
                        std::span<const double> a) const {
        return data_.running_cost(t, x, mu, a);
    }
    double terminal_cost(std::span<const double> x, const MeasureSummary& mu) const {
        return data_.terminal_cost(x, mu);
    }

    /// out = sigma^{-1} b(t, x, mu, a).
    void scaled_drift(double t, std::span<const double> x, const MeasureSummary& mu,
                      std::span<const double> a, std::span<double> out) const;

private:
    ProblemData data_;
    std::vector<double> sigma_inv_;
    double sigma_cond_ = std::numeric_limits<double>::infinity();
    double sigmac_cond_ = std::numeric_limits<double>::infinity();
};

/// Condition numbers above this are treated as singular.
inline constexpr double kSingularCondition = 1e12;

/// Reduced Hamiltonian H = f(t,x,mu,a) + z . sigma^{-1} b(t,x,mu,a).
/// Throws std::invalid_argument for a outside the box or non-finite input.
double hamiltonian(const ProblemSpec& spec, double t, std::span<const double> x,
                   const MeasureSummary& mu, std::span<const double> a, std::span<const double> z);

struct MinimizerOptions {
    std::size_t grid_points = 33;
    std::size_t golden_steps = 40;
    std::size_t sweeps = 3;
    double tie_tolerance = 1e-12;
};

struct BoxMinimum {
    Vec action{};
    double value = std::numeric_limits<double>::infinity();
};

/// Derivative-free minimization over a box: uniform grid scan with
/// lexicographic tie-breaking, then cyclic golden-section refinement inside
/// one grid cell either side of the best point. The returned value never
/// exceeds the best grid value.
template <class Objective>
BoxMinimum minimize_over_box(const ActionBox& box, Objective&& objective,
                             const MinimizerOptions& opts = {}) {
    const std::size_t d = box.dim();
    const std::size_t g = std::max<std::size_t>(opts.grid_points, 1);
    Vec step{};
    for (std::size_t i = 0; i < d; ++i)
        step[i] = g > 1 ? (box.hi[i] - box.lo[i]) / static_cast<double>(g - 1) : 0.0;

    auto node = [&](std::size_t flat, Vec& a) {
        for (std::size_t i = d; i-- > 0;) {
            const std::size_t idx = flat % g;
            flat /= g;
            a[i] = (idx + 1 == g && g > 1) ? box.hi[i] : box.lo[i] + static_cast<double>(idx) * step[i];
        }
    };

    std::size_t n_nodes = 1;
    for (std::size_t i = 0; i < d; ++i) n_nodes *= g;

    // First coordinate varies slowest, so enumeration order is lexicographic.
    double best_value = std::numeric_limits<double>::infinity();
    std::size_t best_flat = 0;
    thread_local std::vector<double> values;
    values.resize(n_nodes);
    Vec a{};
    for (std::size_t flat = 0; flat < n_nodes; ++flat) {
        node(flat, a);
        values[flat] = objective(std::span<const double>(a.data(), d));
        if (values[flat] < best_value) best_value = values[flat];
    }
    for (std::size_t flat = 0; flat < n_nodes; ++flat) {
        if (values[flat] <= best_value + opts.tie_tolerance) {
            best_flat = flat;
            break;
        }
    }

    BoxMinimum best;
    node(best_flat, best.action);
    best.value = values[best_flat];
    if (g < 2 || opts.golden_steps == 0) return best;

    constexpr double kInvPhi = 0.6180339887498949;
    const std::size_t sweeps = d == 1 ? 1 : std::max<std::size_t>(opts.sweeps, 1);
    Vec trial = best.action;
    for (std::size_t sweep = 0; sweep < sweeps; ++sweep) {
        for (std::size_t i = 0; i < d; ++i) {
            if (step[i] <= 0.0) continue;
            trial = best.action;
            auto eval = [&](double v) {
                trial[i] = v;
                return objective(std::span<const double>(trial.data(), d));
            };
            double lo = std::max(box.lo[i], best.action[i] - step[i]);
            double hi = std::min(box.hi[i], best.action[i] + step[i]);
            double c1 = hi - kInvPhi * (hi - lo);
            double c2 = lo + kInvPhi * (hi - lo);
            double f1 = eval(c1);
            double f2 = eval(c2);
            for (std::size_t it = 0; it < opts.golden_steps; ++it) {
                if (f1 <= f2) {
                    hi = c2;
                    c2 = c1;
                    f2 = f1;
                    c1 = hi - kInvPhi * (hi - lo);
                    f1 = eval(c1);
                } else {
                    lo = c1;
                    c1 = c2;
                    f1 = f2;
                    c2 = lo + kInvPhi * (hi - lo);
                    f2 = eval(c2);
                }
            }
            const double mid = 0.5 * (lo + hi);
            const double fm = eval(mid);
            double cand = mid, fc = fm;
            if (f1 < fc) { cand = c1; fc = f1; }
            if (f2 < fc) { cand = c2; fc = f2; }
            if (fc < best.value) {
                best.action[i] = cand;
                best.value = fc;
            }
        }
    }
    return best;
}

/// (a_hat, h) with h = H(t,x,mu,a_hat,z) = min over the box.
BoxMinimum minimize_hamiltonian(const ProblemSpec& spec, double t, std::span<const double> x,
                                const MeasureSummary& mu, std::span<const double> z,
                                const MinimizerOptions& opts = {});

struct ValidationReport {
    double max_drift = 0.0;
    double max_common_drift = 0.0;
    double sigma_condition = 0.0;
    double sigmac_condition = 0.0;
    bool drift_ok = true;
    bool common_drift_ok = true;
    bool sigma_ok = true;
    bool sigmac_ok = true;
    std::vector<std::string> failures;

    bool passed() const { return drift_ok && common_drift_ok && sigma_ok && sigmac_ok; }
};

/// Sample-based check of the declared drift bounds and matrix conditioning.
/// Probes include every vertex of the action box.
ValidationReport validate_spec(const ProblemSpec& spec, std::size_t n_probes, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Instance families

using FamilyParameters = std::map<std::string, double>;

struct FamilyInfo {
    std::string name;
    std::string description;
    FamilyParameters defaults;
    std::function<ProblemSpec(const FamilyParameters&)> build;
};

/// Registers (or replaces) a family; "lq" and "tanh" are built in.
void register_family(FamilyInfo info);
const FamilyInfo& find_family(const std::string& name);
std::vector<std::string> family_names();

/// Builds a family instance; parameters not given take the family defaults.
/// Unknown parameter names throw std::invalid_argument.
ProblemSpec make_family(const std::string& name, const FamilyParameters& params = {});

}  // namespace mfgcn
