#include "mfgcn/measure_flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "mfgcn/girsanov.hpp"
#include "mfgcn/parallel.hpp"

namespace mfgcn {
namespace {

std::vector<std::vector<std::size_t>> compute_past_steps(const TimeGrid& grid, const ConditioningMode& mode) {
    std::vector<std::vector<std::size_t>> past(grid.n_points());
    if (mode.kind == ConditioningMode::Kind::kCurrentValue) return past;
    const auto& times = mode.partition_times;
    if (times.size() < 2) throw std::invalid_argument("partition needs at least the times 0 and T");
    const double tol = 1e-9 * grid.horizon;
    if (std::abs(times.front()) > tol || std::abs(times.back() - grid.horizon) > tol)
        throw std::invalid_argument("partition must start at 0 and end at T");
    std::vector<std::size_t> steps;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (i > 0 && times[i] < times[i - 1]) throw std::invalid_argument("partition times must be nondecreasing");
        steps.push_back(grid.nearest_step(times[i]));
    }
    steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
    for (std::size_t k = 0; k < grid.n_points(); ++k)
        for (const auto s : steps)
            if (s < k) past[k].push_back(s);
    return past;
}

void fill_key(const std::vector<std::size_t>& past, std::size_t step, std::size_t dc,
              std::span<const double> xc_path, double* out) {
    if (xc_path.size() < (step + 1) * dc)
        throw std::invalid_argument("common trajectory shorter than the requested step");
    std::size_t c = 0;
    for (const auto s : past)
        for (std::size_t r = 0; r < dc; ++r) out[c++] = xc_path[s * dc + r];
    for (std::size_t r = 0; r < dc; ++r) out[c++] = xc_path[step * dc + r];
}

// Builds the bin tree of one grid step.
class StepBuilder {
public:
    StepBuilder(const PathBundle& paths, std::span<const double> weights, std::size_t step,
                const std::vector<std::size_t>& past, const FlowOptions& opts, std::size_t n_bins)
        : paths_(paths), weights_(weights), step_(step), opts_(opts), n_bins_(n_bins) {
        const std::size_t dc = paths.d_common;
        n_comp_ = (past.size() + 1) * dc;
        n_past_comp_ = past.size() * dc;
        keys_.resize(paths.n_paths * n_comp_);
        for (std::size_t i = 0; i < paths.n_paths; ++i)
            fill_key(past, step, dc, paths.common_path(i), keys_.data() + i * n_comp_);
    }

    ConditionalMeasureFlow::Step build() {
        std::vector<std::uint32_t> all(paths_.n_paths);
        std::iota(all.begin(), all.end(), 0u);
        out_.root = build_node(all, 0, n_bins_, 0.0, 0.0);
        return std::move(out_);
    }

private:
    double key(std::uint32_t i, std::size_t comp) const { return keys_[i * n_comp_ + comp]; }

    std::size_t target_bins(std::size_t level, std::size_t budget) const {
        if (level < n_past_comp_) return std::max<std::size_t>(1, std::min(opts_.partition_bins, budget));
        const std::size_t remaining = n_comp_ - level;
        if (remaining == 1) return std::max<std::size_t>(budget, 1);
        std::size_t nb = 1;
        auto power = [remaining](std::size_t b) {
            double v = 1.0;
            for (std::size_t r = 0; r < remaining; ++r) v *= static_cast<double>(b);
            return v;
        };
        while (power(nb + 1) <= static_cast<double>(budget)) ++nb;
        return nb;
    }

    std::int64_t build_node(const std::vector<std::uint32_t>& subset, std::size_t level,
                            std::size_t budget, double lo, double hi) {
        if (level == n_comp_) return make_leaf(subset, lo, hi);

        std::vector<std::uint32_t> sorted = subset;
        std::sort(sorted.begin(), sorted.end(), [&](std::uint32_t a, std::uint32_t b) {
            const double ka = key(a, level), kb = key(b, level);
            return ka < kb || (ka == kb && a < b);
        });
        const double vmin = key(sorted.front(), level), vmax = key(sorted.back(), level);
        std::vector<double> edges;
        const std::size_t nb = target_bins(level, budget);
        if (nb > 1 && vmin < vmax) edges = quantile_edges(sorted, level, nb);

        // Interval counts under the right-open rule, then merge small intervals.
        auto interval = [&](double v) {
            return static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
        };
        std::vector<std::size_t> counts(edges.size() + 1, 0);
        for (const auto i : sorted) ++counts[interval(key(i, level))];
        while (counts.size() > 1) {
            std::size_t small = 0;
            for (std::size_t c = 1; c < counts.size(); ++c)
                if (counts[c] < counts[small]) small = c;
            if (counts[small] >= opts_.min_bin_count) break;
            std::size_t other;
            if (small == 0) other = 1;
            else if (small + 1 == counts.size()) other = small - 1;
            else other = counts[small + 1] < counts[small - 1] ? small + 1 : small - 1;
            const std::size_t left = std::min(small, other);
            counts[left] += counts[left + 1];
            counts.erase(counts.begin() + static_cast<std::ptrdiff_t>(left + 1));
            edges.erase(edges.begin() + static_cast<std::ptrdiff_t>(left));
        }

        const bool last_level = level + 1 == n_comp_;
        const std::size_t n_int = edges.size() + 1;
        const std::size_t child_budget = std::max<std::size_t>(1, budget / n_int);
        std::vector<std::vector<std::uint32_t>> parts(n_int);
        for (const auto i : subset) parts[interval(key(i, level))].push_back(i);

        auto bounds = [&](std::size_t c, double& clo, double& chi) {
            if (!last_level) {
                clo = lo;
                chi = hi;
                return;
            }
            double pmin = std::numeric_limits<double>::infinity(), pmax = -pmin;
            for (const auto i : parts[c]) {
                pmin = std::min(pmin, key(i, level));
                pmax = std::max(pmax, key(i, level));
            }
            clo = c == 0 ? pmin : edges[c - 1];
            chi = c + 1 == n_int ? pmax : edges[c];
        };

        if (n_int == 1) {
            double clo, chi;
            bounds(0, clo, chi);
            return build_node(parts[0], level + 1, child_budget, clo, chi);
        }
        const auto id = static_cast<std::int64_t>(out_.nodes.size());
        out_.nodes.push_back({level, edges, {}});
        std::vector<std::int64_t> children(n_int);
        for (std::size_t c = 0; c < n_int; ++c) {
            double clo, chi;
            bounds(c, clo, chi);
            children[c] = build_node(parts[c], level + 1, child_budget, clo, chi);
        }
        out_.nodes[static_cast<std::size_t>(id)].child = std::move(children);
        return id;
    }

    // Edges at the midpoint between consecutive distinct values straddling
    // each j/nb weighted quantile.
    std::vector<double> quantile_edges(const std::vector<std::uint32_t>& sorted, std::size_t level,
                                       std::size_t nb) const {
        double total = 0.0;
        for (const auto i : sorted) total += weights_[i];
        std::vector<double> edges;
        double cum = 0.0;
        std::size_t pos = 0;
        for (std::size_t j = 1; j < nb; ++j) {
            const double target = total * static_cast<double>(j) / static_cast<double>(nb);
            // The slack keeps exact ties (equal weights) from flipping with rounding.
            while (pos < sorted.size() && cum + weights_[sorted[pos]] < target - 1e-12 * total)
                cum += weights_[sorted[pos++]];
            std::size_t p = std::min(pos, sorted.size() - 1);
            while (p + 1 < sorted.size() && key(sorted[p], level) == key(sorted[p + 1], level)) ++p;
            if (p + 1 >= sorted.size()) break;
            const double e = 0.5 * (key(sorted[p], level) + key(sorted[p + 1], level));
            if (edges.empty() || e > edges.back()) edges.push_back(e);
        }
        return edges;
    }

    std::int64_t make_leaf(const std::vector<std::uint32_t>& subset, double lo, double hi) {
        const std::size_t d = paths_.d_state;
        std::vector<double> pts;
        std::vector<double> w;
        pts.reserve(subset.size() * d);
        w.reserve(subset.size());
        for (const auto i : subset) {
            const auto x = paths_.state(i, step_);
            pts.insert(pts.end(), x.begin(), x.end());
            w.push_back(weights_[i]);
        }
        FlowBin bin;
        bin.lo = lo;
        bin.hi = hi;
        bin.measure = EmpiricalMeasure(d, std::move(pts), std::move(w), opts_.p);
        out_.bins.push_back(std::move(bin));
        return ~static_cast<std::int64_t>(out_.bins.size() - 1);
    }

    const PathBundle& paths_;
    std::span<const double> weights_;
    std::size_t step_;
    const FlowOptions& opts_;
    std::size_t n_bins_;
    std::size_t n_comp_ = 1;
    std::size_t n_past_comp_ = 0;
    std::vector<double> keys_;
    ConditionalMeasureFlow::Step out_;
};

}  // namespace

ConditionalMeasureFlow::ConditionalMeasureFlow(TimeGrid grid, std::size_t d_state, std::size_t d_common,
                                               FlowOptions options, std::vector<Step> steps)
    : grid_(grid), d_state_(d_state), d_common_(d_common), options_(std::move(options)),
      steps_(std::move(steps)) {
    if (steps_.size() != grid_.n_points())
        throw std::invalid_argument("measure flow needs one bin tree per grid point");
    for (const auto& s : steps_)
        if (s.bins.empty()) throw std::invalid_argument("measure flow step without bins");
    past_ = compute_past_steps(grid_, options_.mode);
}

ConditionalMeasureFlow ConditionalMeasureFlow::from_bins(const TimeGrid& grid,
                                                         const std::vector<std::vector<double>>& edges,
                                                         std::vector<std::vector<EmpiricalMeasure>> bins,
                                                         FlowOptions options) {
    if (edges.size() != grid.n_points() || bins.size() != grid.n_points())
        throw std::invalid_argument("from_bins: one entry per grid point required");
    options.mode = ConditioningMode::current_value();
    std::vector<Step> steps(grid.n_points());
    std::size_t d_state = 0;
    for (std::size_t k = 0; k < grid.n_points(); ++k) {
        const auto& e = edges[k];
        if (bins[k].size() != e.size() + 1) throw std::invalid_argument("from_bins: edges/bins size mismatch");
        for (std::size_t j = 1; j < e.size(); ++j)
            if (!(e[j] > e[j - 1])) throw std::invalid_argument("from_bins: edges must increase");
        for (std::size_t b = 0; b < bins[k].size(); ++b) {
            if (d_state == 0) d_state = bins[k][b].dim();
            if (bins[k][b].dim() != d_state || bins[k][b].size() == 0)
                throw std::invalid_argument("from_bins: inconsistent bin measures");
            FlowBin fb;
            fb.lo = b == 0 ? (e.empty() ? 0.0 : e.front()) : e[b - 1];
            fb.hi = b == e.size() ? (e.empty() ? 0.0 : e.back()) : e[b];
            fb.measure = std::move(bins[k][b]);
            steps[k].bins.push_back(std::move(fb));
        }
        if (e.empty()) {
            steps[k].root = ~std::int64_t{0};
        } else {
            Node node;
            node.component = 0;
            node.edges = e;
            for (std::size_t b = 0; b <= e.size(); ++b) node.child.push_back(~static_cast<std::int64_t>(b));
            steps[k].nodes.push_back(std::move(node));
            steps[k].root = 0;
        }
    }
    return ConditionalMeasureFlow(grid, d_state, 1, std::move(options), std::move(steps));
}

std::vector<double> ConditionalMeasureFlow::key(std::size_t step, std::span<const double> xc_path) const {
    std::vector<double> k((past_.at(step).size() + 1) * d_common_);
    fill_key(past_[step], step, d_common_, xc_path, k.data());
    return k;
}

std::size_t ConditionalMeasureFlow::locate_key(std::size_t step, std::span<const double> key) const {
    const Step& s = steps_.at(step);
    std::int64_t id = s.root;
    while (id >= 0) {
        const Node& node = s.nodes[static_cast<std::size_t>(id)];
        if (node.component >= key.size()) throw std::invalid_argument("conditioning key too short");
        const double v = key[node.component];
        const auto j = std::upper_bound(node.edges.begin(), node.edges.end(), v) - node.edges.begin();
        id = node.child[static_cast<std::size_t>(j)];
    }
    return static_cast<std::size_t>(~id);
}

std::size_t ConditionalMeasureFlow::locate(std::size_t step, std::span<const double> xc_path) const {
    thread_local std::vector<double> buf;
    buf.resize((past_.at(step).size() + 1) * d_common_);
    fill_key(past_[step], step, d_common_, xc_path, buf.data());
    return locate_key(step, buf);
}

void ConditionalMeasureFlow::attach_cloud(std::shared_ptr<const PathBundle> cloud,
                                          std::vector<std::vector<double>> weights) {
    cloud_ = std::move(cloud);
    cloud_weights_ = std::move(weights);
}

bool ConditionalMeasureFlow::same_bins(const ConditionalMeasureFlow& other) const {
    if (!(grid_ == other.grid_) || steps_.size() != other.steps_.size()) return false;
    for (std::size_t k = 0; k < steps_.size(); ++k) {
        const auto& a = steps_[k];
        const auto& b = other.steps_[k];
        if (a.root != b.root || a.nodes.size() != b.nodes.size() || a.bins.size() != b.bins.size()) return false;
        // Components are compared by their offset from the current value, so a
        // key whose extra components never split a bin matches the shorter key.
        const std::size_t la = (past_[k].size() + 1) * d_common_, lb = (other.past_[k].size() + 1) * other.d_common_;
        for (std::size_t n = 0; n < a.nodes.size(); ++n)
            if (la - a.nodes[n].component != lb - b.nodes[n].component || a.nodes[n].edges != b.nodes[n].edges ||
                a.nodes[n].child != b.nodes[n].child)
                return false;
        for (std::size_t j = 0; j < a.bins.size(); ++j)
            if (!(a.bins[j].measure == b.bins[j].measure)) return false;
    }
    return true;
}

ConditionalMeasureFlow estimate_conditional_flow(std::shared_ptr<const PathBundle> paths,
                                                 std::vector<std::vector<double>> step_weights,
                                                 const FlowOptions& options) {
    if (!paths || paths->n_paths == 0) throw std::invalid_argument("estimate_conditional_flow: no paths");
    const PathBundle& pb = *paths;
    const std::size_t np = pb.grid.n_points();
    if (step_weights.size() != np) throw std::invalid_argument("estimate_conditional_flow: need weights per grid point");
    if (options.min_bin_count == 0) throw std::invalid_argument("min_bin_count must be positive");
    if (options.n_bins == 0) throw std::invalid_argument("n_bins must be positive");
    for (auto& w : step_weights) {
        if (w.size() != pb.n_paths) throw std::invalid_argument("estimate_conditional_flow: weight size mismatch");
        double s = 0.0;
        for (const double v : w) {
            if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("particle weights must be finite and >= 0");
            s += v;
        }
        if (!(s > 0.0)) throw std::invalid_argument("particle weights sum to zero");
        for (double& v : w) v /= s;
    }

    std::vector<std::string> warnings;
    std::size_t n_bins = options.n_bins;
    const std::size_t cap = std::max<std::size_t>(1, pb.n_paths / options.min_bin_count);
    if (n_bins > cap) {
        warnings.push_back("n_bins reduced from " + std::to_string(n_bins) + " to " + std::to_string(cap) +
                           " so that bins can hold min_bin_count particles");
        n_bins = cap;
    }
    const auto past = compute_past_steps(pb.grid, options.mode);
    std::vector<ConditionalMeasureFlow::Step> steps(np);
    parallel_chunks(
        np,
        [&](std::size_t, std::size_t begin, std::size_t end) {
            for (std::size_t k = begin; k < end; ++k)
                steps[k] = StepBuilder(pb, step_weights[k], k, past[k], options, n_bins).build();
        },
        1);
    ConditionalMeasureFlow flow(pb.grid, pb.d_state, pb.d_common, options, std::move(steps));
    for (auto& w : warnings) flow.add_warning(std::move(w));
    flow.attach_cloud(std::move(paths), std::move(step_weights));
    return flow;
}

ConditionalMeasureFlow estimate_conditional_flow(std::shared_ptr<const PathBundle> paths,
                                                 const FlowOptions& options) {
    if (!paths) throw std::invalid_argument("estimate_conditional_flow: no paths");
    std::vector<std::vector<double>> w(paths->grid.n_points(), std::vector<double>(paths->n_paths, 1.0));
    return estimate_conditional_flow(std::move(paths), std::move(w), options);
}

ConditionalMeasureFlow estimate_conditional_flow(std::shared_ptr<const PathBundle> paths,
                                                 const GirsanovWeights& weights,
                                                 const FlowOptions& options) {
    if (!paths) throw std::invalid_argument("estimate_conditional_flow: no paths");
    if (weights.n_paths != paths->n_paths || !(weights.grid == paths->grid))
        throw std::invalid_argument("estimate_conditional_flow: weights do not match the paths");
    std::vector<std::vector<double>> w(paths->grid.n_points());
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = weights.at_step(k);
    return estimate_conditional_flow(std::move(paths), std::move(w), options);
}

namespace {

bool same_cloud(const ConditionalMeasureFlow& a, const ConditionalMeasureFlow& b) {
    if (!a.cloud() || !b.cloud()) return false;
    if (a.cloud().get() == b.cloud().get()) return true;
    return a.cloud()->fingerprint() == b.cloud()->fingerprint();
}

PathBundle concatenate(const PathBundle& a, const PathBundle& b) {
    if (!(a.grid == b.grid) || a.d_state != b.d_state || a.d_common != b.d_common)
        throw std::invalid_argument("cannot pool particle clouds with different shapes");
    PathBundle out;
    out.grid = a.grid;
    out.n_paths = a.n_paths + b.n_paths;
    out.d_state = a.d_state;
    out.d_common = a.d_common;
    out.x = a.x;
    out.x.insert(out.x.end(), b.x.begin(), b.x.end());
    out.xc = a.xc;
    out.xc.insert(out.xc.end(), b.xc.begin(), b.xc.end());
    out.label = PathLabel::kPooled;
    out.seed = a.seed;
    return out;
}

}  // namespace

ConditionalMeasureFlow mix_flows(const ConditionalMeasureFlow& a, const ConditionalMeasureFlow& b,
                                 double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("mixing weight must lie in [0, 1]");
    if (!a.cloud() || !b.cloud()) throw std::invalid_argument("mixing requires flows estimated from particles");
    if (!(a.grid() == b.grid())) throw std::invalid_argument("mixing flows on different grids");
    const std::size_t np = a.grid().n_points();
    if (same_cloud(a, b)) {
        std::vector<std::vector<double>> w(np);
        for (std::size_t k = 0; k < np; ++k) {
            const auto& wa = a.cloud_weights()[k];
            const auto& wb = b.cloud_weights()[k];
            w[k].resize(wa.size());
            for (std::size_t i = 0; i < wa.size(); ++i) w[k][i] = wa[i] + lambda * (wb[i] - wa[i]);
        }
        return estimate_conditional_flow(a.cloud(), std::move(w), a.options());
    }
    auto pooled = std::make_shared<const PathBundle>(concatenate(*a.cloud(), *b.cloud()));
    std::vector<std::vector<double>> w(np);
    for (std::size_t k = 0; k < np; ++k) {
        const auto& wa = a.cloud_weights()[k];
        const auto& wb = b.cloud_weights()[k];
        w[k].reserve(wa.size() + wb.size());
        for (const double v : wa) w[k].push_back((1.0 - lambda) * v);
        for (const double v : wb) w[k].push_back(lambda * v);
    }
    return estimate_conditional_flow(std::move(pooled), std::move(w), a.options());
}

const EmpiricalMeasure& lookup_measure(const ConditionalMeasureFlow& flow, double t,
                                       std::span<const double> key) {
    const std::size_t k = flow.grid().nearest_step(t);
    return flow.measure(k, flow.locate_key(k, key));
}

std::vector<std::uint32_t> assign_bins(const ConditionalMeasureFlow& flow, const PathBundle& paths) {
    if (!(flow.grid() == paths.grid) || flow.d_common() != paths.d_common)
        throw std::invalid_argument("assign_bins: flow and paths do not match");
    const std::size_t np = paths.grid.n_points();
    std::vector<std::uint32_t> out(paths.n_paths * np);
    parallel_chunks(paths.n_paths, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto xc = paths.common_path(i);
            for (std::size_t k = 0; k < np; ++k)
                out[i * np + k] = static_cast<std::uint32_t>(flow.locate(k, xc));
        }
    });
    return out;
}

double flow_distance(const ConditionalMeasureFlow& a, const ConditionalMeasureFlow& b, double q,
                     const PathBundle* eval) {
    if (!(q >= 1.0)) throw std::invalid_argument("flow_distance: q must be >= 1");
    if (!(a.grid() == b.grid()) || a.d_state() != b.d_state() || a.d_common() != b.d_common())
        throw std::invalid_argument("flow_distance: flows are not comparable");

    std::shared_ptr<const PathBundle> pooled;
    if (!eval) {
        if (!a.cloud() || !b.cloud())
            throw std::invalid_argument("flow_distance: evaluation paths required for flows without particles");
        if (same_cloud(a, b)) {
            eval = a.cloud().get();
        } else {
            const bool a_first = a.cloud()->fingerprint() <= b.cloud()->fingerprint();
            pooled = std::make_shared<const PathBundle>(a_first ? concatenate(*a.cloud(), *b.cloud())
                                                                : concatenate(*b.cloud(), *a.cloud()));
            eval = pooled.get();
        }
    }
    if (!(eval->grid == a.grid()) || eval->d_common != a.d_common())
        throw std::invalid_argument("flow_distance: evaluation paths do not match the flows");

    const std::size_t np = a.grid().n_points();
    const auto bins_a = assign_bins(a, *eval);
    const auto bins_b = assign_bins(b, *eval);

    // W_q^2 between bin measures, cached per (step, bin_a, bin_b).
    std::vector<std::vector<double>> cache(np);
    for (std::size_t k = 0; k < np; ++k)
        cache[k].assign(a.n_bins(k) * b.n_bins(k), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < eval->n_paths; ++i)
        for (std::size_t k = 0; k < np; ++k) cache[k][bins_a[i * np + k] * b.n_bins(k) + bins_b[i * np + k]] = 0.0;
    parallel_chunks(
        np,
        [&](std::size_t, std::size_t begin, std::size_t end) {
            for (std::size_t k = begin; k < end; ++k)
                for (std::size_t ia = 0; ia < a.n_bins(k); ++ia)
                    for (std::size_t ib = 0; ib < b.n_bins(k); ++ib) {
                        double& c = cache[k][ia * b.n_bins(k) + ib];
                        if (std::isnan(c)) continue;
                        const auto& ma = a.measure(k, ia);
                        const auto& mb = b.measure(k, ib);
                        const double w = a.d_state() == 1 ? wasserstein_1d(ma, mb, q) : lp_transport(ma, mb, q);
                        c = w * w;
                    }
        },
        1);

    const double dt = a.grid().dt();
    double total = 0.0;
    for (std::size_t i = 0; i < eval->n_paths; ++i) {
        double integral = 0.0;
        for (std::size_t k = 0; k < np; ++k) {
            const double wk = (k == 0 || k + 1 == np) ? 0.5 * dt : dt;
            integral += wk * cache[k][bins_a[i * np + k] * b.n_bins(k) + bins_b[i * np + k]];
        }
        total += q == 2.0 ? integral : std::pow(integral, q / 2.0);
    }
    return std::pow(total / static_cast<double>(eval->n_paths), 1.0 / q);
}

}  // namespace mfgcn
