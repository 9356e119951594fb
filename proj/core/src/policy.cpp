#include "mfgcn/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mfgcn/bsde_solver.hpp"

namespace mfgcn {

double PolicyTable::x_node(std::size_t step, std::size_t ix) const {
    if (nx < 2) return x_lo[step];
    return x_lo[step] + (x_hi[step] - x_lo[step]) * static_cast<double>(ix) / static_cast<double>(nx - 1);
}

double PolicyTable::c_node(std::size_t step, std::size_t ic) const {
    if (nc < 2) return c_lo[step];
    return c_lo[step] + (c_hi[step] - c_lo[step]) * static_cast<double>(ic) / static_cast<double>(nc - 1);
}

namespace {

// Cell index and fractional offset of v on a uniform grid, clamped to the grid.
void locate_cell(double v, double lo, double hi, std::size_t n, std::size_t& cell, double& frac) {
    if (n < 2 || !(hi > lo)) {
        cell = 0;
        frac = 0.0;
        return;
    }
    const double s = (std::clamp(v, lo, hi) - lo) / (hi - lo) * static_cast<double>(n - 1);
    cell = std::min(static_cast<std::size_t>(s), n - 2);
    frac = s - static_cast<double>(cell);
}

}  // namespace

void PolicyTable::interpolate(std::size_t step, double x, double xc, std::span<double> out) const {
    std::size_t ix, ic;
    double fx, fc;
    locate_cell(x, x_lo[step], x_hi[step], nx, ix, fx);
    locate_cell(xc, c_lo[step], c_hi[step], nc, ic, fc);
    const std::size_t ix1 = nx > 1 ? ix + 1 : ix, ic1 = nc > 1 ? ic + 1 : ic;
    const auto v00 = at(step, ix, ic), v01 = at(step, ix, ic1);
    const auto v10 = at(step, ix1, ic), v11 = at(step, ix1, ic1);
    for (std::size_t r = 0; r < d_action; ++r)
        out[r] = (1.0 - fx) * ((1.0 - fc) * v00[r] + fc * v01[r]) + fx * ((1.0 - fc) * v10[r] + fc * v11[r]);
}

MarkovPolicy MarkovPolicy::closure(ProblemSpec spec, std::shared_ptr<const BsdeSolution> solution,
                                   std::shared_ptr<const ConditionalMeasureFlow> flow, MinimizerOptions minimizer) {
    if (!solution || !flow) throw std::invalid_argument("closure policy needs a BSDE solution and a flow");
    if (!(solution->grid == flow->grid())) throw std::invalid_argument("closure policy: grids differ");
    MarkovPolicy p;
    p.box_ = spec.action_box();
    p.spec_ = std::make_shared<const ProblemSpec>(std::move(spec));
    p.solution_ = std::move(solution);
    p.flow_ = std::move(flow);
    p.minimizer_ = minimizer;
    return p;
}

MarkovPolicy MarkovPolicy::table(PolicyTable table, ActionBox box) {
    if (table.nx == 0 || table.nc == 0 || table.d_action != box.dim())
        throw std::invalid_argument("policy table shape does not match the action box");
    const std::size_t ns = table.grid.n_steps;
    if (table.actions.size() != ns * table.nx * table.nc * table.d_action || table.x_lo.size() != ns ||
        table.x_hi.size() != ns || table.c_lo.size() != ns || table.c_hi.size() != ns)
        throw std::invalid_argument("policy table has the wrong size");
    MarkovPolicy p;
    p.box_ = std::move(box);
    p.table_ = std::make_shared<const PolicyTable>(std::move(table));
    return p;
}

const TimeGrid& MarkovPolicy::grid() const { return table_ ? table_->grid : solution_->grid; }

bool MarkovPolicy::action(std::size_t step, std::span<const double> x, std::span<const double> xc_path,
                          std::span<double> out) const {
    const std::size_t k = std::min(step, grid().n_steps - 1);
    if (table_) {
        if (xc_path.size() < k + 1) throw std::invalid_argument("common trajectory shorter than the step");
        table_->interpolate(k, x[0], xc_path[k], out);
    } else {
        const BoxMinimum m = closure_action(*spec_, *solution_, *flow_, k, x, xc_path, minimizer_);
        std::copy_n(m.action.begin(), box_.dim(), out.begin());
    }
    return box_.clamp(out);
}

}  // namespace mfgcn
