#pragma once

#include <cstddef>
#include <vector>

#include "mfgcn/policy.hpp"
#include "mfgcn/problem_model.hpp"
#include "mfgcn/sde_engine.hpp"

namespace mfgcn::oracle {

struct HjbGrid {
    double x_min = -4.0;
    double x_max = 4.0;
    std::size_t nx = 201;
    std::size_t nt = 401;
};

/// Value function of the single-agent problem with the population frozen at
/// a Dirac mass (coefficients must not depend on the measure), d_I = d_C = 1:
///   V_t + (sigma^2 + sigma0^2)/2 V_xx + min_a [f(t,x,a) + b(t,x,a) V_x] = 0,
///   V(T, x) = g(x).
/// Implicit in the diffusion, explicit in the Hamiltonian.
class HjbSolution {
public:
    HjbSolution(const ProblemSpec& spec, const HjbGrid& grid = {});

    double value(double t, double x) const;
    double gradient(double t, double x) const;
    /// argmin_a f + b V_x at (t, x).
    double action(double t, double x) const;

    /// Feedback table on the steps of `grid` (the common state is ignored).
    PolicyTable policy_table(const TimeGrid& grid) const;

    const HjbGrid& grid() const { return grid_; }

private:
    std::size_t time_index(double t) const;
    double interp(const std::vector<double>& row, double x) const;
    std::vector<double> derivative(const std::vector<double>& row) const;

    ProblemSpec spec_;
    HjbGrid grid_;
    double horizon_;
    double dx_;
    std::vector<std::vector<double>> v_;  // [time index][x index]
};

}  // namespace mfgcn::oracle
