#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mfgcn/problem_model.hpp"

namespace mfgcn {

/// Finite-sample carrier for an element of P_p(R^d). Wraps a MeasureSummary
/// and, in one dimension, keeps the atoms sorted for quantile couplings.
class EmpiricalMeasure {
public:
    EmpiricalMeasure() = default;
    EmpiricalMeasure(std::size_t dim, std::vector<double> points, std::vector<double> weights,
                     double p = 2.0);
    explicit EmpiricalMeasure(MeasureSummary summary);

    static EmpiricalMeasure uniform(std::size_t dim, std::vector<double> points, double p = 2.0);
    static EmpiricalMeasure dirac(std::span<const double> point, double p = 2.0);

    const MeasureSummary& summary() const { return summary_; }
    std::size_t dim() const { return summary_.dim(); }
    std::size_t size() const { return summary_.size(); }
    std::span<const double> point(std::size_t i) const { return summary_.point(i); }
    double weight(std::size_t i) const { return summary_.weights()[i]; }

    /// Sorted support and matching weights; only populated when dim() == 1.
    const std::vector<double>& sorted_values() const { return sorted_values_; }
    const std::vector<double>& sorted_weights() const { return sorted_weights_; }

    bool operator==(const EmpiricalMeasure& other) const;

private:
    void build_sorted();

    MeasureSummary summary_;
    std::vector<double> sorted_values_;
    std::vector<double> sorted_weights_;
};

/// Order-q Wasserstein distance on the line via the quantile coupling.
/// Throws std::invalid_argument unless both measures are one-dimensional.
double wasserstein_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, double q);

struct TransportOptions {
    /// Above this combined support size each measure is reduced by
    /// stratified resampling to max_combined_atoms / 2 equal-weight atoms.
    std::size_t max_combined_atoms = 512;
};

/// Exact order-q Wasserstein distance by solving the transport linear program
/// over the coupling polytope (successive shortest paths, Euclidean ground cost).
double lp_transport(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, double q,
                    const TransportOptions& opts = {});

/// min_{pi in Pi(a, b)} sum_ij pi_ij cost_ij for a row-major n x m cost matrix.
/// Supplies and demands are renormalized to unit mass.
double optimal_transport_cost(std::span<const double> supply, std::span<const double> demand,
                              std::span<const double> cost);

/// Kantorovich-Rubinstein norm of mu - nu; equals W_1 on probability measures.
double kr_norm_diff(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

/// Systematic (stratified) resampling to k equal-weight atoms taken in
/// storage order; returns the input unchanged when size() <= k.
EmpiricalMeasure stratified_subsample(const EmpiricalMeasure& mu, std::size_t k);

/// Evaluates (|x-y|^q - R^q)^+ <= 2^q |x|^q 1{|x| >= R/2} + 2^q |y|^q 1{|y| >= R/2}.
bool truncation_bound_check(std::span<const double> x, std::span<const double> y, double radius,
                            double q);

}  // namespace mfgcn
