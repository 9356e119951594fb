#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "mfgcn/measure_flow.hpp"
#include "mfgcn/problem_model.hpp"
#include "mfgcn/sde_engine.hpp"

namespace mfgcn {

struct BsdeSolution;

/// Tabulated feedback alpha(t_k, x, xc) on a per-step rectangular grid
/// (d_I = d_C = 1). Values are bilinearly interpolated; queries outside the
/// grid are clamped to its edge.
struct PolicyTable {
    TimeGrid grid;
    std::size_t nx = 0;
    std::size_t nc = 0;
    std::size_t d_action = 1;
    std::vector<double> x_lo, x_hi;  // per step
    std::vector<double> c_lo, c_hi;  // per step
    std::vector<double> actions;     // [step][ix][ic][d_action], steps 0..n_steps-1

    double x_node(std::size_t step, std::size_t ix) const;
    double c_node(std::size_t step, std::size_t ic) const;
    std::span<const double> at(std::size_t step, std::size_t ix, std::size_t ic) const {
        return {actions.data() + ((step * nx + ix) * nc + ic) * d_action, d_action};
    }
    std::span<double> at(std::size_t step, std::size_t ix, std::size_t ic) {
        return {actions.data() + ((step * nx + ix) * nc + ic) * d_action, d_action};
    }
    void interpolate(std::size_t step, double x, double xc, std::span<double> out) const;
};

/// Feedback control alpha(t, X_t, key_t). Either the closure
/// argmin_a H(t, x, phi_m(t, key), a, Z_hat(t, x, xc)) built from a BSDE
/// solution, or a table produced by Markov projection.
class MarkovPolicy {
public:
    static MarkovPolicy closure(ProblemSpec spec, std::shared_ptr<const BsdeSolution> solution,
                                std::shared_ptr<const ConditionalMeasureFlow> flow,
                                MinimizerOptions minimizer = {});
    static MarkovPolicy table(PolicyTable table, ActionBox box);

    bool is_table() const { return table_ != nullptr; }
    const TimeGrid& grid() const;
    std::size_t d_action() const { return box_.dim(); }
    const ActionBox& action_box() const { return box_; }
    const PolicyTable* table_data() const { return table_.get(); }
    const BsdeSolution* solution() const { return solution_.get(); }
    const ConditionalMeasureFlow* flow() const { return flow_.get(); }

    /// Action at grid step `step` (clamped to [0, n_steps - 1]) for state x
    /// and common trajectory xc_path (rows 0..step). Returns true when the
    /// raw value had to be clamped into the action box.
    bool action(std::size_t step, std::span<const double> x, std::span<const double> xc_path,
                std::span<double> out) const;

private:
    MarkovPolicy() = default;

    ActionBox box_;
    std::shared_ptr<const ProblemSpec> spec_;
    std::shared_ptr<const BsdeSolution> solution_;
    std::shared_ptr<const ConditionalMeasureFlow> flow_;
    MinimizerOptions minimizer_;
    std::shared_ptr<const PolicyTable> table_;
};

}  // namespace mfgcn
