#include "mfgcn/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace mfgcn {

EmpiricalMeasure::EmpiricalMeasure(std::size_t dim, std::vector<double> points,
                                   std::vector<double> weights, double p)
    : summary_(dim, std::move(points), std::move(weights), p) {
    build_sorted();
}

EmpiricalMeasure::EmpiricalMeasure(MeasureSummary summary) : summary_(std::move(summary)) {
    build_sorted();
}

EmpiricalMeasure EmpiricalMeasure::uniform(std::size_t dim, std::vector<double> points, double p) {
    return EmpiricalMeasure(MeasureSummary::uniform(dim, std::move(points), p));
}

EmpiricalMeasure EmpiricalMeasure::dirac(std::span<const double> point, double p) {
    return EmpiricalMeasure(MeasureSummary::dirac(point, p));
}

void EmpiricalMeasure::build_sorted() {
    sorted_values_.clear();
    sorted_weights_.clear();
    if (summary_.dim() != 1) return;
    const auto& pts = summary_.points();
    const auto& w = summary_.weights();
    std::vector<std::size_t> order(pts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return pts[a] < pts[b] || (pts[a] == pts[b] && a < b);
    });
    sorted_values_.reserve(order.size());
    sorted_weights_.reserve(order.size());
    for (const auto i : order) {
        sorted_values_.push_back(pts[i]);
        sorted_weights_.push_back(w[i]);
    }
}

bool EmpiricalMeasure::operator==(const EmpiricalMeasure& other) const {
    return summary_.dim() == other.summary_.dim() && summary_.points() == other.summary_.points() &&
           summary_.weights() == other.summary_.weights();
}

namespace {

double cost_power(double dist, double q) {
    if (q == 2.0) return dist * dist;
    if (q == 1.0) return dist;
    return std::pow(dist, q);
}

void check_q(double q) {
    if (!(q >= 1.0) || !std::isfinite(q)) throw std::invalid_argument("transport order q must be >= 1");
}

}  // namespace

double wasserstein_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, double q) {
    check_q(q);
    if (mu.dim() != 1 || nu.dim() != 1)
        throw std::invalid_argument("wasserstein_1d requires one-dimensional measures");
    if (mu.size() == 0 || nu.size() == 0) throw std::invalid_argument("wasserstein_1d: empty measure");
    const auto& a = mu.sorted_values();
    const auto& wa = mu.sorted_weights();
    const auto& b = nu.sorted_values();
    const auto& wb = nu.sorted_weights();
    std::size_t i = 0, j = 0;
    double ra = wa[0], rb = wb[0], total = 0.0;
    while (i < a.size() && j < b.size()) {
        const double c = cost_power(std::abs(a[i] - b[j]), q);
        if (ra < rb) {
            total += ra * c;
            rb -= ra;
            if (++i < a.size()) ra = wa[i];
        } else if (rb < ra) {
            total += rb * c;
            ra -= rb;
            if (++j < b.size()) rb = wb[j];
        } else {
            total += ra * c;
            if (++i < a.size()) ra = wa[i];
            if (++j < b.size()) rb = wb[j];
        }
    }
    return std::pow(std::max(total, 0.0), 1.0 / q);
}

double optimal_transport_cost(std::span<const double> supply, std::span<const double> demand,
                              std::span<const double> cost) {
    const std::size_t n = supply.size(), m = demand.size();
    if (n == 0 || m == 0) throw std::invalid_argument("optimal_transport_cost: empty marginal");
    if (cost.size() != n * m) throw std::invalid_argument("optimal_transport_cost: cost has the wrong size");
    const double sa = std::accumulate(supply.begin(), supply.end(), 0.0);
    const double sb = std::accumulate(demand.begin(), demand.end(), 0.0);
    if (!(sa > 0.0) || !(sb > 0.0)) throw std::invalid_argument("optimal_transport_cost: zero mass");
    for (const double c : cost)
        if (!(c >= 0.0) || !std::isfinite(c))
            throw std::invalid_argument("optimal_transport_cost: costs must be finite and non-negative");

    constexpr double kEps = 1e-15;
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> rem_s(n), rem_d(m);
    for (std::size_t i = 0; i < n; ++i) rem_s[i] = supply[i] / sa;
    for (std::size_t j = 0; j < m; ++j) rem_d[j] = demand[j] / sb;
    std::vector<double> flow(n * m, 0.0);
    // Nodes 0..n-1 are sources, n..n+m-1 sinks.
    const std::size_t nn = n + m;
    std::vector<double> pot(nn, 0.0), dist(nn);
    std::vector<std::size_t> prev(nn);
    std::vector<char> done(nn);
    double left = 1.0;

    while (left > kEps) {
        std::fill(dist.begin(), dist.end(), kInf);
        std::fill(done.begin(), done.end(), 0);
        for (std::size_t i = 0; i < n; ++i)
            if (rem_s[i] > kEps) {
                dist[i] = 0.0;
                prev[i] = nn;
            }
        std::size_t target = nn;
        double target_dist = kInf;
        while (true) {
            std::size_t u = nn;
            double best = kInf;
            for (std::size_t v = 0; v < nn; ++v)
                if (!done[v] && dist[v] < best) {
                    best = dist[v];
                    u = v;
                }
            if (u == nn) break;
            done[u] = 1;
            if (u >= n && rem_d[u - n] > kEps) {
                target = u;
                target_dist = best;
                break;
            }
            if (u < n) {
                const double* c = cost.data() + u * m;
                for (std::size_t j = 0; j < m; ++j) {
                    const std::size_t v = n + j;
                    if (done[v]) continue;
                    const double nd = best + c[j] + pot[u] - pot[v];
                    if (nd < dist[v]) {
                        dist[v] = nd;
                        prev[v] = u;
                    }
                }
            } else {
                const std::size_t j = u - n;
                for (std::size_t i = 0; i < n; ++i) {
                    if (done[i] || rem_s[i] > kEps || flow[i * m + j] <= kEps) continue;
                    const double nd = best - cost[i * m + j] + pot[u] - pot[i];
                    if (nd < dist[i]) {
                        dist[i] = nd;
                        prev[i] = u;
                    }
                }
            }
        }
        if (target == nn) break;  // unreachable only through rounding residue
        for (std::size_t v = 0; v < nn; ++v) pot[v] += std::min(dist[v], target_dist);

        double push = rem_d[target - n];
        std::size_t v = target;
        while (prev[v] != nn) {
            const std::size_t u = prev[v];
            if (u >= n) push = std::min(push, flow[v * m + (u - n)]);  // backward edge sink u -> source v
            v = u;
        }
        push = std::min(push, rem_s[v]);
        rem_s[v] -= push;
        rem_d[target - n] -= push;
        v = target;
        while (prev[v] != nn) {
            const std::size_t u = prev[v];
            if (u < n) flow[u * m + (v - n)] += push;
            else flow[v * m + (u - n)] -= push;
            v = u;
        }
        left -= push;
        if (push <= 0.0) break;
    }

    double total = 0.0;
    for (std::size_t k = 0; k < n * m; ++k) total += flow[k] * cost[k];
    return total;
}

EmpiricalMeasure stratified_subsample(const EmpiricalMeasure& mu, std::size_t k) {
    if (k == 0) throw std::invalid_argument("stratified_subsample: k must be positive");
    if (mu.size() <= k) return mu;
    const std::size_t d = mu.dim();
    std::vector<double> pts;
    pts.reserve(k * d);
    double cum = mu.weight(0);
    std::size_t idx = 0;
    for (std::size_t j = 0; j < k; ++j) {
        const double u = (static_cast<double>(j) + 0.5) / static_cast<double>(k);
        while (cum < u && idx + 1 < mu.size()) cum += mu.weight(++idx);
        const auto p = mu.point(idx);
        pts.insert(pts.end(), p.begin(), p.end());
    }
    return EmpiricalMeasure::uniform(d, std::move(pts), mu.summary().p());
}

double lp_transport(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, double q,
                    const TransportOptions& opts) {
    check_q(q);
    if (mu.dim() != nu.dim()) throw std::invalid_argument("lp_transport: dimension mismatch");
    if (mu.size() == 0 || nu.size() == 0) throw std::invalid_argument("lp_transport: empty measure");
    if (mu.size() + nu.size() > opts.max_combined_atoms) {
        const std::size_t k = std::max<std::size_t>(opts.max_combined_atoms / 2, 1);
        return lp_transport(stratified_subsample(mu, k), stratified_subsample(nu, k), q,
                            {mu.size() + nu.size()});
    }
    const std::size_t n = mu.size(), m = nu.size(), d = mu.dim();
    std::vector<double> cost(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        const auto a = mu.point(i);
        for (std::size_t j = 0; j < m; ++j) {
            const auto b = nu.point(j);
            double s = 0.0;
            for (std::size_t r = 0; r < d; ++r) s += (a[r] - b[r]) * (a[r] - b[r]);
            cost[i * m + j] = q == 2.0 ? s : cost_power(std::sqrt(s), q);
        }
    }
    const double total = optimal_transport_cost(mu.summary().weights(), nu.summary().weights(), cost);
    return std::pow(std::max(total, 0.0), 1.0 / q);
}

double kr_norm_diff(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    if (mu.dim() == 1 && nu.dim() == 1) return wasserstein_1d(mu, nu, 1.0);
    return lp_transport(mu, nu, 1.0);
}

bool truncation_bound_check(std::span<const double> x, std::span<const double> y, double radius,
                            double q) {
    check_q(q);
    if (x.size() != y.size()) throw std::invalid_argument("truncation_bound_check: dimension mismatch");
    if (!(radius >= 0.0)) throw std::invalid_argument("truncation_bound_check: radius must be >= 0");
    double dxy = 0.0, nx = 0.0, ny = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        dxy += (x[i] - y[i]) * (x[i] - y[i]);
        nx += x[i] * x[i];
        ny += y[i] * y[i];
    }
    dxy = std::sqrt(dxy);
    nx = std::sqrt(nx);
    ny = std::sqrt(ny);
    const double lhs = std::max(std::pow(dxy, q) - std::pow(radius, q), 0.0);
    const double two_q = std::pow(2.0, q);
    double rhs = 0.0;
    if (nx >= radius / 2.0) rhs += two_q * std::pow(nx, q);
    if (ny >= radius / 2.0) rhs += two_q * std::pow(ny, q);
    return lhs <= rhs + 1e-12 * std::max(1.0, rhs);
}

}  // namespace mfgcn
