#include "mfgcn_oracles/transport_brute.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace mfgcn::oracle {

double permutation_transport_cost(const std::vector<double>& x, const std::vector<double>& y, std::size_t dim,
                                  double q) {
    if (dim == 0 || x.size() != y.size() || x.size() % dim != 0) throw std::invalid_argument("shape mismatch");
    const std::size_t n = x.size() / dim;
    if (n == 0 || n > 9) throw std::invalid_argument("permutation oracle supports 1..9 atoms");
    std::vector<double> cost(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < dim; ++r) s += (x[i * dim + r] - y[j * dim + r]) * (x[i * dim + r] - y[j * dim + r]);
            cost[i * n + j] = std::pow(std::sqrt(s), q);
        }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    double best = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) c += cost[i * n + perm[i]];
        best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / static_cast<double>(n);
}

double permutation_wasserstein(const std::vector<double>& x, const std::vector<double>& y, std::size_t dim,
                               double q) {
    return std::pow(permutation_transport_cost(x, y, dim, q), 1.0 / q);
}

}  // namespace mfgcn::oracle
