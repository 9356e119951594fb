#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mfgcn/bsde_solver.hpp"
#include "mfgcn/equilibrium.hpp"
#include "mfgcn/measure_flow.hpp"
#include "mfgcn/policy.hpp"

namespace mfgcn {

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double v);

inline constexpr std::size_t kFlowQuantiles = 33;

/// iter,residual,y0,y0_stderr,damping
void write_residuals_csv(const std::filesystem::path& path, const std::vector<IterationRecord>& history);

/// step,t,bin_index,bin_lo,bin_hi,coord,q00..q32: weighted quantiles at
/// levels j/32 of each coordinate of each bin measure.
void write_flow_csv(const std::filesystem::path& path, const ConditionalMeasureFlow& flow);

struct FlowCsvRow {
    std::size_t step = 0;
    double t = 0.0;
    std::size_t bin_index = 0;
    double bin_lo = 0.0;
    double bin_hi = 0.0;
    std::size_t coord = 0;
    std::array<double, kFlowQuantiles> quantiles{};
};

std::vector<FlowCsvRow> read_flow_csv_rows(const std::filesystem::path& path);

/// Rebuilds a current-value flow (d_I = d_C = 1) from a flow CSV, each bin
/// carrying its 33 quantiles as equally weighted atoms. Lossy by design.
ConditionalMeasureFlow read_flow_csv(const std::filesystem::path& path);

/// t,x,xc,action (action_0.. for d_A > 1) at every node of a tabulated policy.
void write_policy_csv(const std::filesystem::path& path, const PolicyTable& table);
PolicyTable read_policy_csv(const std::filesystem::path& path);

/// step,t,y_residual_variance,z_residual_variance,y_coef_*,z_coef_*
void write_bsde_csv(const std::filesystem::path& path, const BsdeSolution& solution);

/// Flat key=value lines.
void write_manifest(const std::filesystem::path& path,
                    const std::vector<std::pair<std::string, std::string>>& entries);

}  // namespace mfgcn
