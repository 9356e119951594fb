#include "mfgcn/csv_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace mfgcn {
namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    return in;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double to_double(const std::string& s, const std::filesystem::path& path, std::size_t line) {
    double v = 0.0;
    std::string t = s;
    if (!t.empty() && t.back() == '\r') t.pop_back();
    const char* end = t.data() + t.size();
    const auto [ptr, ec] = std::from_chars(t.data(), end, v);
    if (ec != std::errc() || ptr != end)
        throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": invalid number '" + s + "'");
    return v;
}

// Weighted quantile at level u: smallest value whose cumulative weight reaches u.
double weighted_quantile(const std::vector<double>& values, const std::vector<double>& weights, double u) {
    double cum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        cum += weights[i];
        if (cum >= u - 1e-12) return values[i];
    }
    return values.back();
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw std::runtime_error("format_double failed");
    return std::string(buf, ptr);
}

void write_residuals_csv(const std::filesystem::path& path, const std::vector<IterationRecord>& history) {
    auto out = open_out(path);
    out << "iter,residual,y0,y0_stderr,damping\n";
    for (const auto& r : history)
        out << r.iter << ',' << format_double(r.residual) << ',' << format_double(r.y0) << ','
            << format_double(r.y0_stderr) << ',' << format_double(r.damping) << '\n';
}

void write_flow_csv(const std::filesystem::path& path, const ConditionalMeasureFlow& flow) {
    auto out = open_out(path);
    out << "step,t,bin_index,bin_lo,bin_hi,coord";
    for (std::size_t j = 0; j < kFlowQuantiles; ++j) out << ",q" << (j < 10 ? "0" : "") << j;
    out << '\n';
    const std::size_t d = flow.d_state();
    for (std::size_t k = 0; k < flow.grid().n_points(); ++k) {
        for (std::size_t b = 0; b < flow.n_bins(k); ++b) {
            const FlowBin& bin = flow.bin(k, b);
            const auto& mu = bin.measure;
            for (std::size_t c = 0; c < d; ++c) {
                std::vector<double> vals(mu.size()), w(mu.size());
                std::vector<std::size_t> order(mu.size());
                std::iota(order.begin(), order.end(), std::size_t{0});
                std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t bb) {
                    return mu.point(a)[c] < mu.point(bb)[c];
                });
                for (std::size_t i = 0; i < order.size(); ++i) {
                    vals[i] = mu.point(order[i])[c];
                    w[i] = mu.weight(order[i]);
                }
                out << k << ',' << format_double(flow.grid().time(k)) << ',' << b << ',' << format_double(bin.lo)
                    << ',' << format_double(bin.hi) << ',' << c;
                for (std::size_t j = 0; j < kFlowQuantiles; ++j) {
                    const double u = static_cast<double>(j) / static_cast<double>(kFlowQuantiles - 1);
                    out << ',' << format_double(j == 0 ? vals.front() : weighted_quantile(vals, w, u));
                }
                out << '\n';
            }
        }
    }
}

std::vector<FlowCsvRow> read_flow_csv_rows(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty flow file");
    std::vector<FlowCsvRow> rows;
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty() || line == "\r") continue;
        const auto f = split(line);
        if (f.size() != 6 + kFlowQuantiles)
            throw std::runtime_error(path.string() + ":" + std::to_string(n) + ": expected " +
                                     std::to_string(6 + kFlowQuantiles) + " fields");
        FlowCsvRow r;
        r.step = static_cast<std::size_t>(to_double(f[0], path, n));
        r.t = to_double(f[1], path, n);
        r.bin_index = static_cast<std::size_t>(to_double(f[2], path, n));
        r.bin_lo = to_double(f[3], path, n);
        r.bin_hi = to_double(f[4], path, n);
        r.coord = static_cast<std::size_t>(to_double(f[5], path, n));
        for (std::size_t j = 0; j < kFlowQuantiles; ++j) r.quantiles[j] = to_double(f[6 + j], path, n);
        rows.push_back(r);
    }
    return rows;
}

ConditionalMeasureFlow read_flow_csv(const std::filesystem::path& path) {
    const auto rows = read_flow_csv_rows(path);
    if (rows.empty()) throw std::runtime_error(path.string() + ": no flow rows");
    std::map<std::size_t, std::vector<const FlowCsvRow*>> by_step;
    for (const auto& r : rows) {
        if (r.coord != 0) throw std::runtime_error(path.string() + ": only one-dimensional states can be read back");
        by_step[r.step].push_back(&r);
    }
    const std::size_t n_steps = by_step.rbegin()->first;
    if (by_step.size() != n_steps + 1 || n_steps == 0)
        throw std::runtime_error(path.string() + ": flow file must cover every grid step");
    const TimeGrid grid(by_step.rbegin()->second.front()->t, n_steps);
    std::vector<std::vector<double>> edges(grid.n_points());
    std::vector<std::vector<EmpiricalMeasure>> bins(grid.n_points());
    for (auto& [k, list] : by_step) {
        std::sort(list.begin(), list.end(), [](auto* a, auto* b) { return a->bin_index < b->bin_index; });
        for (std::size_t b = 0; b < list.size(); ++b) {
            if (list[b]->bin_index != b) throw std::runtime_error(path.string() + ": bin indices are not contiguous");
            if (b + 1 < list.size()) edges[k].push_back(list[b]->bin_hi);
            bins[k].push_back(EmpiricalMeasure::uniform(
                1, std::vector<double>(list[b]->quantiles.begin(), list[b]->quantiles.end())));
        }
    }
    return ConditionalMeasureFlow::from_bins(grid, edges, std::move(bins));
}

void write_policy_csv(const std::filesystem::path& path, const PolicyTable& table) {
    auto out = open_out(path);
    out << "t,x,xc";
    if (table.d_action == 1) out << ",action";
    else
        for (std::size_t r = 0; r < table.d_action; ++r) out << ",action_" << r;
    out << '\n';
    for (std::size_t k = 0; k < table.grid.n_steps; ++k)
        for (std::size_t ix = 0; ix < table.nx; ++ix)
            for (std::size_t ic = 0; ic < table.nc; ++ic) {
                out << format_double(table.grid.time(k)) << ',' << format_double(table.x_node(k, ix)) << ','
                    << format_double(table.c_node(k, ic));
                for (const double a : table.at(k, ix, ic)) out << ',' << format_double(a);
                out << '\n';
            }
}

PolicyTable read_policy_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty policy file");
    const std::size_t n_cols = split(line).size();
    if (n_cols < 4) throw std::runtime_error(path.string() + ": policy file needs t,x,xc,action columns");
    const std::size_t da = n_cols - 3;
    std::vector<std::vector<double>> rows;
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty() || line == "\r") continue;
        const auto f = split(line);
        if (f.size() != n_cols) throw std::runtime_error(path.string() + ":" + std::to_string(n) + ": wrong field count");
        std::vector<double> r;
        for (const auto& s : f) r.push_back(to_double(s, path, n));
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw std::runtime_error(path.string() + ": no policy rows");
    std::vector<double> times;
    for (const auto& r : rows)
        if (times.empty() || r[0] != times.back()) times.push_back(r[0]);
    const std::size_t ns = times.size();
    if (rows.size() % ns != 0) throw std::runtime_error(path.string() + ": ragged policy grid");
    const std::size_t per_step = rows.size() / ns;
    std::size_t nc = 1;
    while (nc < per_step && rows[nc][1] == rows[0][1]) ++nc;
    if (per_step % nc != 0) throw std::runtime_error(path.string() + ": ragged policy grid");
    const double dt = ns > 1 ? times[1] - times[0] : 1.0;

    PolicyTable t;
    t.grid = TimeGrid(dt * static_cast<double>(ns), ns);
    t.nx = per_step / nc;
    t.nc = nc;
    t.d_action = da;
    t.actions.resize(ns * per_step * da);
    for (std::size_t k = 0; k < ns; ++k) {
        const auto& first = rows[k * per_step];
        const auto& last = rows[(k + 1) * per_step - 1];
        t.x_lo.push_back(first[1]);
        t.x_hi.push_back(last[1]);
        t.c_lo.push_back(first[2]);
        t.c_hi.push_back(last[2]);
        for (std::size_t j = 0; j < per_step; ++j)
            for (std::size_t r = 0; r < da; ++r) t.actions[(k * per_step + j) * da + r] = rows[k * per_step + j][3 + r];
    }
    return t;
}

void write_bsde_csv(const std::filesystem::path& path, const BsdeSolution& solution) {
    auto out = open_out(path);
    const std::size_t nf = solution.basis.size();
    out << "step,t,y_residual_variance,z_residual_variance";
    for (std::size_t f = 0; f < nf; ++f) out << ",y_coef_" << f;
    for (std::size_t j = 0; j < solution.d_state; ++j)
        for (std::size_t f = 0; f < nf; ++f) out << ",z" << j << "_coef_" << f;
    out << '\n';
    for (std::size_t k = 0; k < solution.steps.size(); ++k) {
        const auto& s = solution.steps[k];
        out << k << ',' << format_double(solution.grid.time(k)) << ',' << format_double(s.y_residual_variance) << ','
            << format_double(s.z_residual_variance);
        for (const double c : s.y_coef) out << ',' << format_double(c);
        for (const double c : s.z_coef) out << ',' << format_double(c);
        out << '\n';
    }
}

void write_manifest(const std::filesystem::path& path, const std::vector<std::pair<std::string, std::string>>& entries) {
    auto out = open_out(path);
    for (const auto& [k, v] : entries) out << k << '=' << v << '\n';
}

}  // namespace mfgcn
