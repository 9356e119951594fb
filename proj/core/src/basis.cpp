#include "mfgcn/basis.hpp"

#include <functional>
#include <stdexcept>

namespace mfgcn {

PolynomialBasis::PolynomialBasis(std::size_t n_vars, std::size_t degree) : n_vars_(n_vars), degree_(degree) {
    if (n_vars == 0) throw std::invalid_argument("polynomial basis needs at least one variable");
    // Graded order: all monomials of degree 0, then 1, ...; within a degree,
    // lexicographic in the exponent vector (first variable highest first).
    std::vector<unsigned> e(n_vars, 0);
    for (std::size_t total = 0; total <= degree; ++total) {
        std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t var, std::size_t left) {
            if (var + 1 == n_vars) {
                e[var] = static_cast<unsigned>(left);
                exponents_.insert(exponents_.end(), e.begin(), e.end());
                return;
            }
            for (std::size_t v = left + 1; v-- > 0;) {
                e[var] = static_cast<unsigned>(v);
                rec(var + 1, left - v);
            }
        };
        rec(0, total);
    }
}

void PolynomialBasis::evaluate(std::span<const double> u, std::span<double> out) const {
    const std::size_t nf = size();
    for (std::size_t f = 0; f < nf; ++f) {
        const unsigned* e = exponents_.data() + f * n_vars_;
        double v = 1.0;
        for (std::size_t i = 0; i < n_vars_; ++i)
            for (unsigned p = 0; p < e[i]; ++p) v *= u[i];
        out[f] = v;
    }
}

void Standardization::apply(std::span<const double> v, std::span<double> u) const {
    for (std::size_t i = 0; i < center.size(); ++i) u[i] = scale[i] > 0.0 ? (v[i] - center[i]) / scale[i] : 0.0;
}

NormalEquations::NormalEquations(std::size_t n_features, std::size_t n_targets)
    : ftf_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_features), static_cast<Eigen::Index>(n_features))),
      fty_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_features), static_cast<Eigen::Index>(n_targets))) {}

void NormalEquations::add(std::span<const double> features, std::span<const double> targets, double weight) {
    const auto nf = static_cast<std::size_t>(ftf_.rows());
    const auto nt = static_cast<std::size_t>(fty_.cols());
    for (std::size_t a = 0; a < nf; ++a) {
        const double wa = weight * features[a];
        for (std::size_t b = a; b < nf; ++b) ftf_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += wa * features[b];
        for (std::size_t t = 0; t < nt; ++t) fty_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(t)) += wa * targets[t];
    }
    weight_sum_ += weight;
}

void NormalEquations::merge(const NormalEquations& other) {
    ftf_ += other.ftf_;
    fty_ += other.fty_;
    weight_sum_ += other.weight_sum_;
}

Eigen::MatrixXd NormalEquations::solve(double ridge) const {
    if (!(weight_sum_ > 0.0)) throw std::invalid_argument("regression without observations");
    Eigen::MatrixXd a = ftf_.selfadjointView<Eigen::Upper>();
    a /= weight_sum_;
    a.diagonal().array() += ridge;
    const Eigen::MatrixXd rhs = fty_ / weight_sum_;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        Eigen::MatrixXd beta = ldlt.solve(rhs);
        if (beta.allFinite()) return beta;
    }
    return a.completeOrthogonalDecomposition().solve(rhs);
}

}  // namespace mfgcn
