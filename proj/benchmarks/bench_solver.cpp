#include <benchmark/benchmark.h>

#include <memory>

#include "mfgcn/bsde_solver.hpp"
#include "mfgcn/equilibrium.hpp"

namespace {

void BM_MinimizeHamiltonian(benchmark::State& state) {
    const auto spec = mfgcn::make_family("lq");
    const auto mu = mfgcn::MeasureSummary::uniform(1, {-0.5, 0.0, 0.5});
    const double x = 0.3, z = 0.4;
    for (auto _ : state) benchmark::DoNotOptimize(mfgcn::minimize_hamiltonian(spec, 0.5, {&x, 1}, mu, {&z, 1}));
}
BENCHMARK(BM_MinimizeHamiltonian);

void BM_GenerateNoise(benchmark::State& state) {
    const mfgcn::TimeGrid grid(1.0, 50);
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(mfgcn::generate_noise(n, grid, 7));
    state.SetItemsProcessed(state.iterations() * state.range(0) * 50);
}
BENCHMARK(BM_GenerateNoise)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_SolveBsde(benchmark::State& state) {
    const auto spec = mfgcn::make_family("lq");
    const auto sample = mfgcn::make_estimation_sample(spec, static_cast<std::size_t>(state.range(0)), 50, 3);
    const auto flow = mfgcn::estimate_conditional_flow(sample.paths, mfgcn::FlowOptions{});
    for (auto _ : state) benchmark::DoNotOptimize(mfgcn::solve_bsde(spec, flow, *sample.paths, *sample.noise));
}
BENCHMARK(BM_SolveBsde)->Arg(2000)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace
