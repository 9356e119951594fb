#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mfgcn/sde_engine.hpp"
#include "mfgcn/transport.hpp"

namespace mfgcn {

struct GirsanovWeights;

/// What the population law is conditioned on at time t.
///  - current value: X^c_t;
///  - partition {t_0 = 0 <= ... <= t_n = T}: (X^c_{t ^ t_0}, ..., X^c_{t ^ t_n}).
/// Partition components that coincide with the current value are dropped, so
/// the key at step k is (X^c at every partition time strictly before t_k,
/// X^c_{t_k}) in chronological order.
struct ConditioningMode {
    enum class Kind { kCurrentValue, kPartition };
    Kind kind = Kind::kCurrentValue;
    std::vector<double> partition_times;

    static ConditioningMode current_value() { return {}; }
    static ConditioningMode partition(std::vector<double> times) {
        return {Kind::kPartition, std::move(times)};
    }
    bool operator==(const ConditioningMode&) const = default;
};

struct FlowOptions {
    std::size_t n_bins = 16;
    std::size_t min_bin_count = 64;
    /// Bins per past partition component (hierarchical mode).
    std::size_t partition_bins = 2;
    ConditioningMode mode;
    /// Exponent for the cached |mu|^p of each bin measure.
    double p = 2.0;
};

struct FlowBin {
    /// Interval of the current-value component covered by the bin; open ends
    /// are replaced by the extreme key observed in the bin.
    double lo = 0.0;
    double hi = 0.0;
    EmpiricalMeasure measure;
};

/// Binned estimate of t -> phi_m(t, .) : conditioning key -> P_p(R^{d_I}).
/// Each grid step holds a tree of weighted-quantile bins over the key
/// components (a single level in current-value mode). Keys below/above all
/// edges clamp to the extreme bins; intervals are right-open except the last.
class ConditionalMeasureFlow {
public:
    struct Node {
        std::size_t component = 0;
        std::vector<double> edges;         // interior edges, strictly increasing
        std::vector<std::int64_t> child;   // >= 0: node index, < 0: ~bin index
    };
    struct Step {
        std::int64_t root = -1;  // ~0: a single bin
        std::vector<Node> nodes;
        std::vector<FlowBin> bins;
    };

    ConditionalMeasureFlow() = default;
    ConditionalMeasureFlow(TimeGrid grid, std::size_t d_state, std::size_t d_common,
                           FlowOptions options, std::vector<Step> steps);

    /// Current-value flow with d_C = 1 assembled from explicit edges and bin
    /// measures (edges[k].size() + 1 == bins[k].size()).
    static ConditionalMeasureFlow from_bins(const TimeGrid& grid,
                                            const std::vector<std::vector<double>>& edges,
                                            std::vector<std::vector<EmpiricalMeasure>> bins,
                                            FlowOptions options = {});

    const TimeGrid& grid() const { return grid_; }
    const FlowOptions& options() const { return options_; }
    std::size_t d_state() const { return d_state_; }
    std::size_t d_common() const { return d_common_; }
    std::size_t n_bins(std::size_t step) const { return steps_[step].bins.size(); }
    const Step& step(std::size_t k) const { return steps_[k]; }
    const FlowBin& bin(std::size_t step, std::size_t index) const { return steps_[step].bins[index]; }
    const EmpiricalMeasure& measure(std::size_t step, std::size_t index) const {
        return steps_[step].bins[index].measure;
    }

    /// Grid indices of the past partition times used at step k.
    const std::vector<std::size_t>& past_steps(std::size_t k) const { return past_[k]; }
    /// Conditioning key at step k from a common trajectory (rows 0..k at least).
    std::vector<double> key(std::size_t step, std::span<const double> xc_path) const;
    std::size_t locate_key(std::size_t step, std::span<const double> key) const;
    std::size_t locate(std::size_t step, std::span<const double> xc_path) const;

    /// Particle cloud the flow was estimated from (absent for hand-built flows).
    const std::shared_ptr<const PathBundle>& cloud() const { return cloud_; }
    /// Per-step normalized cloud weights [step][path].
    const std::vector<std::vector<double>>& cloud_weights() const { return cloud_weights_; }
    void attach_cloud(std::shared_ptr<const PathBundle> cloud, std::vector<std::vector<double>> weights);

    const std::vector<std::string>& warnings() const { return warnings_; }
    void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

    /// Structural equality: grid, tree edges, bin atoms and weights. Tree
    /// components are matched by their position relative to the current value.
    bool same_bins(const ConditionalMeasureFlow& other) const;

private:
    TimeGrid grid_;
    std::size_t d_state_ = 1;
    std::size_t d_common_ = 1;
    FlowOptions options_;
    std::vector<Step> steps_;
    std::vector<std::vector<std::size_t>> past_;
    std::shared_ptr<const PathBundle> cloud_;
    std::vector<std::vector<double>> cloud_weights_;
    std::vector<std::string> warnings_;
};

/// Unweighted estimate of L(X_t | key_t) from a path cloud.
ConditionalMeasureFlow estimate_conditional_flow(std::shared_ptr<const PathBundle> paths,
                                                 const FlowOptions& options);
/// Estimate under the measure with density M_{t_k} at step k.
ConditionalMeasureFlow estimate_conditional_flow(std::shared_ptr<const PathBundle> paths,
                                                 const GirsanovWeights& weights,
                                                 const FlowOptions& options);
/// Estimate with explicit per-step particle weights [step][path].
ConditionalMeasureFlow estimate_conditional_flow(std::shared_ptr<const PathBundle> paths,
                                                 std::vector<std::vector<double>> step_weights,
                                                 const FlowOptions& options);

/// Particle pooling (1 - lambda) a + lambda b, re-binned with a's options.
/// Flows over the same cloud mix their weights; distinct clouds are concatenated.
ConditionalMeasureFlow mix_flows(const ConditionalMeasureFlow& a, const ConditionalMeasureFlow& b,
                                 double lambda);

/// phi_m(t, key) with t snapped to the nearest grid step.
const EmpiricalMeasure& lookup_measure(const ConditionalMeasureFlow& flow, double t,
                                       std::span<const double> key);

/// Monte Carlo estimate of d_M(a, b) = E[(int_0^T W_q^2(a_t, b_t) dt)^{q/2}]^{1/q}
/// along common trajectories (trapezoid rule in time). Evaluation paths are
/// `eval` when given, otherwise the clouds of both flows in a canonical order.
double flow_distance(const ConditionalMeasureFlow& a, const ConditionalMeasureFlow& b, double q,
                     const PathBundle* eval = nullptr);

/// Bin index of every (path, grid point) of a bundle: [path][step], steps 0..n_steps.
std::vector<std::uint32_t> assign_bins(const ConditionalMeasureFlow& flow, const PathBundle& paths);

}  // namespace mfgcn
