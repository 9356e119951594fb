#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace mfgcn {

/// Monomials of total degree <= degree in n_vars variables, constant first.
class PolynomialBasis {
public:
    PolynomialBasis() = default;
    PolynomialBasis(std::size_t n_vars, std::size_t degree);

    std::size_t n_vars() const { return n_vars_; }
    std::size_t degree() const { return degree_; }
    std::size_t size() const { return exponents_.size() / (n_vars_ ? n_vars_ : 1); }
    std::span<const unsigned> exponents(std::size_t feature) const {
        return {exponents_.data() + feature * n_vars_, n_vars_};
    }

    /// out[j] = prod_i u_i^{e_ji}; out.size() must equal size().
    void evaluate(std::span<const double> u, std::span<double> out) const;

private:
    std::size_t n_vars_ = 0;
    std::size_t degree_ = 0;
    std::vector<unsigned> exponents_;
};

/// Affine map u = (v - center) / scale. Variables with (near) zero spread get
/// scale 0, which maps them to u = 0.
struct Standardization {
    std::vector<double> center;
    std::vector<double> scale;

    void apply(std::span<const double> v, std::span<double> u) const;
};

/// Accumulates weighted normal equations F^T W F and F^T W Y for several
/// right-hand sides. Partial sums from chunks are merged in a fixed order.
class NormalEquations {
public:
    NormalEquations(std::size_t n_features, std::size_t n_targets);

    void add(std::span<const double> features, std::span<const double> targets, double weight = 1.0);
    void merge(const NormalEquations& other);

    /// Solves (F^T W F / sum w + ridge I) beta = F^T W Y / sum w.
    /// Returns n_features x n_targets coefficients.
    Eigen::MatrixXd solve(double ridge) const;

    double weight_sum() const { return weight_sum_; }

private:
    Eigen::MatrixXd ftf_;
    Eigen::MatrixXd fty_;
    double weight_sum_ = 0.0;
};

}  // namespace mfgcn
