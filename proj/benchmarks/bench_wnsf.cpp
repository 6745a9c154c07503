#include <benchmark/benchmark.h>

#include "wnsf/analysis.hpp"
#include "wnsf/arx.hpp"
#include "wnsf/estimator.hpp"
#include "wnsf/harness.hpp"

using namespace wnsf;

namespace {

const ModelStructure kMs{2, 2, 0, 0};

TimeSeriesDataset closed_loop_data(std::size_t N) {
    return generate_run_data(scenario_defaults(Scenario::fig1_closedloop), 0, N).data;
}

void BM_EstimateArx(benchmark::State& state) {
    const auto N = static_cast<std::size_t>(state.range(0));
    const auto n = static_cast<std::size_t>(state.range(1));
    const auto data = closed_loop_data(N);
    for (auto _ : state) benchmark::DoNotOptimize(estimate_arx(data, n));
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(N));
}
BENCHMARK(BM_EstimateArx)->Args({3000, 50})->Args({10000, 50})->Args({5000, 200})->Unit(benchmark::kMillisecond);

void BM_Step3(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto eta = estimate_arx(closed_loop_data(10000), n);
    const auto s2 = step2_ls(eta, kMs);
    for (auto _ : state) benchmark::DoNotOptimize(step3_wls(eta, s2.theta, kMs));
}
BENCHMARK(BM_Step3)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_FullyParametric(benchmark::State& state) {
    const auto eta = estimate_arx(closed_loop_data(10000), 100);
    const ModelStructure ms{2, 2, static_cast<int>(state.range(0)), static_cast<int>(state.range(0))};
    for (auto _ : state) benchmark::DoNotOptimize(fully_parametric_wnsf(eta, ms, {1, 1e-4}));
}
BENCHMARK(BM_FullyParametric)->Arg(1)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_ComputeM(benchmark::State& state) {
    const auto cfg = scenario_defaults(Scenario::fig1_closedloop);
    const LoopSystem sys{cfg.G, cfg.H.rational(), cfg.K, cfg.lambda_r, cfg.sigma2};
    const auto grid = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(compute_M(sys, kMs, grid));
}
BENCHMARK(BM_ComputeM)->Arg(1 << 10)->Arg(1 << 14)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
