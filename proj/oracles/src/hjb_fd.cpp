#include "mfgcn_oracles/hjb_fd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace mfgcn::oracle {
namespace {

BoxMinimum local_min(const ProblemSpec& spec, double t, double x, double p) {
    const double zero = 0.0;
    const MeasureSummary mu = MeasureSummary::dirac({&zero, 1});
    return minimize_over_box(spec.action_box(), [&](std::span<const double> a) {
        double b = 0.0;
        spec.drift(t, {&x, 1}, mu, a, {&b, 1});
        return spec.running_cost(t, {&x, 1}, mu, a) + b * p;
    });
}

}  // namespace

HjbSolution::HjbSolution(const ProblemSpec& spec, const HjbGrid& grid)
    : spec_(spec), grid_(grid), horizon_(spec.horizon()) {
    if (spec.d_state() != 1 || spec.d_common() != 1 || spec.d_action() != 1)
        throw std::invalid_argument("HJB oracle supports scalar problems only");
    if (grid.nx < 5 || grid.nt < 2 || !(grid.x_max > grid.x_min)) throw std::invalid_argument("bad HJB grid");
    const std::size_t nx = grid.nx;
    dx_ = (grid.x_max - grid.x_min) / static_cast<double>(nx - 1);
    const double dt = horizon_ / static_cast<double>(grid.nt - 1);
    const double s = spec.data().sigma[0], s0 = spec.data().sigma0[0];
    const double diff = 0.5 * (s * s + s0 * s0);

    const auto n = static_cast<Eigen::Index>(nx);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    const double r = dt * diff / (dx_ * dx_);
    for (Eigen::Index i = 1; i + 1 < n; ++i) {
        a(i, i - 1) = -r;
        a(i, i) = 1.0 + 2.0 * r;
        a(i, i + 1) = -r;
    }
    // Boundary rows keep the second difference of the previous time level.
    a(0, 0) = 1.0;
    a(0, 1) = -2.0;
    a(0, 2) = 1.0;
    a(n - 1, n - 1) = 1.0;
    a(n - 1, n - 2) = -2.0;
    a(n - 1, n - 3) = 1.0;
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);

    const double zero = 0.0;
    const MeasureSummary mu = MeasureSummary::dirac({&zero, 1});
    v_.assign(grid.nt, std::vector<double>(nx));
    for (std::size_t i = 0; i < nx; ++i) {
        const double x = grid.x_min + static_cast<double>(i) * dx_;
        v_[grid.nt - 1][i] = spec.terminal_cost({&x, 1}, mu);
    }
    Eigen::VectorXd rhs(n);
    for (std::size_t m = grid.nt - 1; m-- > 0;) {
        const auto& next = v_[m + 1];
        const double t = static_cast<double>(m + 1) * dt;
        const auto p = derivative(next);
        for (std::size_t i = 1; i + 1 < nx; ++i) {
            const double x = grid.x_min + static_cast<double>(i) * dx_;
            rhs[static_cast<Eigen::Index>(i)] = next[i] + dt * local_min(spec, t, x, p[i]).value;
        }
        rhs[0] = next[0] - 2.0 * next[1] + next[2];
        rhs[n - 1] = next[nx - 1] - 2.0 * next[nx - 2] + next[nx - 3];
        const Eigen::VectorXd sol = lu.solve(rhs);
        for (std::size_t i = 0; i < nx; ++i) v_[m][i] = sol[static_cast<Eigen::Index>(i)];
    }
}

std::vector<double> HjbSolution::derivative(const std::vector<double>& row) const {
    const std::size_t nx = row.size();
    std::vector<double> p(nx);
    for (std::size_t i = 1; i + 1 < nx; ++i) p[i] = (row[i + 1] - row[i - 1]) / (2.0 * dx_);
    p[0] = (row[1] - row[0]) / dx_;
    p[nx - 1] = (row[nx - 1] - row[nx - 2]) / dx_;
    return p;
}

std::size_t HjbSolution::time_index(double t) const {
    const double u = std::clamp(t / horizon_, 0.0, 1.0) * static_cast<double>(grid_.nt - 1);
    return static_cast<std::size_t>(std::lround(u));
}

double HjbSolution::interp(const std::vector<double>& row, double x) const {
    const double s = (std::clamp(x, grid_.x_min, grid_.x_max) - grid_.x_min) / dx_;
    const std::size_t i = std::min(static_cast<std::size_t>(s), grid_.nx - 2);
    const double f = s - static_cast<double>(i);
    return (1.0 - f) * row[i] + f * row[i + 1];
}

double HjbSolution::value(double t, double x) const { return interp(v_[time_index(t)], x); }

double HjbSolution::gradient(double t, double x) const { return interp(derivative(v_[time_index(t)]), x); }

double HjbSolution::action(double t, double x) const {
    return local_min(spec_, t, x, gradient(t, x)).action[0];
}

PolicyTable HjbSolution::policy_table(const TimeGrid& tg) const {
    PolicyTable table;
    table.grid = tg;
    table.nx = grid_.nx;
    table.nc = 2;
    table.d_action = 1;
    for (std::size_t k = 0; k < tg.n_steps; ++k) {
        table.x_lo.push_back(grid_.x_min);
        table.x_hi.push_back(grid_.x_max);
        table.c_lo.push_back(-1.0);
        table.c_hi.push_back(1.0);
        const double t = tg.time(k);
        const auto p = derivative(v_[time_index(t)]);
        for (std::size_t i = 0; i < grid_.nx; ++i) {
            const double x = grid_.x_min + static_cast<double>(i) * dx_;
            const double a = local_min(spec_, t, x, p[i]).action[0];
            table.actions.push_back(a);
            table.actions.push_back(a);
        }
    }
    return table;
}

}  // namespace mfgcn::oracle
