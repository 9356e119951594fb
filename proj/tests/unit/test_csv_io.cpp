#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "mfgcn/csv_io.hpp"

using namespace mfgcn;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "mfgcn_csv_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST(FormatDouble, RoundTrips) {
    for (const double v : {0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0, 123456789.0}) {
        const std::string s = format_double(v);
        EXPECT_EQ(std::stod(s), v) << s;
    }
    EXPECT_EQ(format_double(0.5), "0.5");
    EXPECT_EQ(format_double(2.0), "2");
}

TEST(ResidualsCsv, HeaderAndNoWallTime) {
    const auto p = temp_file("residuals.csv");
    write_residuals_csv(p, {{0, 0.25, 1.5, 0.01, 1.0, 123.0}, {1, 0.125, 1.25, 0.01, 0.5, 99.0}});
    EXPECT_EQ(slurp(p), "iter,residual,y0,y0_stderr,damping\n0,0.25,1.5,0.01,1\n1,0.125,1.25,0.01,0.5\n");
}

TEST(FlowCsv, QuantilesRoundTrip) {
    const auto paths = std::make_shared<const PathBundle>(
        simulate_driftless_state(make_family("lq"), generate_noise(2000, TimeGrid(1.0, 5), 1)));
    const auto flow = estimate_conditional_flow(paths, FlowOptions{});
    const auto p = temp_file("flow.csv");
    write_flow_csv(p, flow);
    const auto rows = read_flow_csv_rows(p);
    std::size_t expected = 0;
    for (std::size_t k = 0; k <= 5; ++k) expected += flow.n_bins(k);
    ASSERT_EQ(rows.size(), expected);
    for (const auto& r : rows) {
        const auto& sorted = flow.measure(r.step, r.bin_index).sorted_values();
        EXPECT_EQ(r.quantiles.front(), sorted.front());
        EXPECT_EQ(r.quantiles.back(), sorted.back());
        for (std::size_t j = 1; j < kFlowQuantiles; ++j) EXPECT_LE(r.quantiles[j - 1], r.quantiles[j]);
    }
    const auto rebuilt = read_flow_csv(p);
    const auto p2 = temp_file("flow2.csv");
    write_flow_csv(p2, rebuilt);
    const auto again = read_flow_csv_rows(p2);
    ASSERT_EQ(again.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(again[i].quantiles, rows[i].quantiles);
        EXPECT_EQ(again[i].step, rows[i].step);
        EXPECT_EQ(again[i].bin_index, rows[i].bin_index);
    }
}

TEST(PolicyCsv, RoundTrip) {
    PolicyTable t;
    t.grid = TimeGrid(1.0, 3);
    t.nx = 3;
    t.nc = 2;
    t.x_lo = {-1.0, -2.0, -3.0};
    t.x_hi = {1.0, 2.0, 3.0};
    t.c_lo = {-0.5, -0.5, -0.5};
    t.c_hi = {0.5, 0.5, 0.75};
    for (std::size_t i = 0; i < 3 * 3 * 2; ++i) t.actions.push_back(std::sin(static_cast<double>(i)));
    const auto p = temp_file("policy.csv");
    write_policy_csv(p, t);
    const PolicyTable r = read_policy_csv(p);
    EXPECT_EQ(r.nx, 3u);
    EXPECT_EQ(r.nc, 2u);
    EXPECT_EQ(r.actions, t.actions);
    EXPECT_EQ(r.x_lo, t.x_lo);
    EXPECT_EQ(r.c_hi, t.c_hi);
    EXPECT_TRUE(r.grid == t.grid);
}

TEST(Manifest, KeyValueLines) {
    const auto p = temp_file("manifest.txt");
    write_manifest(p, {{"seed", "7"}, {"family", "lq"}});
    EXPECT_EQ(slurp(p), "seed=7\nfamily=lq\n");
}
