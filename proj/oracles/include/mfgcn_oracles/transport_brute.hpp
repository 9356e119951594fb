#pragma once

#include <cstddef>
#include <vector>

namespace mfgcn::oracle {

/// min over permutations pi of (1/n) sum_i |x_i - y_pi(i)|^q for two uniform
/// measures with n atoms each in R^dim (row-major points). Exhaustive, n <= 9.
double permutation_transport_cost(const std::vector<double>& x, const std::vector<double>& y, std::size_t dim,
                                  double q);

/// W_q between uniform measures by exhaustive search over permutations.
double permutation_wasserstein(const std::vector<double>& x, const std::vector<double>& y, std::size_t dim,
                               double q);

}  // namespace mfgcn::oracle
