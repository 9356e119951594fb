#include <benchmark/benchmark.h>

#include <vector>

#include "mfgcn/rng.hpp"
#include "mfgcn/transport.hpp"

namespace {

std::vector<double> normal_points(std::size_t n, std::uint32_t path) {
    const mfgcn::CounterRng rng(42);
    std::vector<double> v(n);
    for (std::uint32_t i = 0; i < n; ++i) v[i] = rng.normal(mfgcn::Stream::kProbe, path, i, 0);
    return v;
}

void BM_Wasserstein1d(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto mu = mfgcn::EmpiricalMeasure::uniform(1, normal_points(n, 0));
    const auto nu = mfgcn::EmpiricalMeasure::uniform(1, normal_points(n, 1));
    for (auto _ : state) benchmark::DoNotOptimize(mfgcn::wasserstein_1d(mu, nu, 2.0));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Wasserstein1d)->RangeMultiplier(4)->Range(64, 16384)->Complexity();

void BM_LpTransport2d(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto mu = mfgcn::EmpiricalMeasure::uniform(2, normal_points(2 * n, 2));
    const auto nu = mfgcn::EmpiricalMeasure::uniform(2, normal_points(2 * n, 3));
    for (auto _ : state) benchmark::DoNotOptimize(mfgcn::lp_transport(mu, nu, 1.0));
}
BENCHMARK(BM_LpTransport2d)->RangeMultiplier(2)->Range(16, 256);

}  // namespace
