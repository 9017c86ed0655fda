#include <benchmark/benchmark.h>

#include "unibias/dynamics.hpp"
#include "unibias/network.hpp"
#include "unibias/stats.hpp"
#include "unibias/theory.hpp"

using namespace unibias;

namespace {

FusionConfig net_config(int L, int L_f, int width, Activation act = Activation::Linear) {
    FusionConfig c;
    c.L = L;
    c.L_f = L_f;
    c.width = width;
    c.activation = act;
    c.init.scale = 0.01;
    return c;
}

}  // namespace

static void BM_GdStepCorrelation(benchmark::State& state) {
    const auto stats = build_correlations(DatasetSpec::scalar(2, 1, 0.3, 1, 1));
    FusionNetwork net = init_network(net_config(static_cast<int>(state.range(0)), 2, static_cast<int>(state.range(1))));
    for (auto _ : state) benchmark::DoNotOptimize(gd_step_correlation(net, stats, 1e-4));
}
BENCHMARK(BM_GdStepCorrelation)->Args({2, 100})->Args({4, 100})->Args({4, 500});

static void BM_GdStepSamplesRelu(benchmark::State& state) {
    const auto samples = sample_dataset(DatasetSpec::scalar(1, 0.5, 0.0, 1, 1), state.range(0), 1);
    FusionNetwork net = init_network(net_config(2, 1, 100, Activation::Relu));
    for (auto _ : state) benchmark::DoNotOptimize(gd_step_samples(net, samples, 1e-4, LossKind::Mse));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GdStepSamplesRelu)->Arg(512)->Arg(2048);

static void BM_IntegralI(benchmark::State& state) {
    const int L_f = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(integral_I(5, L_f, 0.5));
}
BENCHMARK(BM_IntegralI)->Arg(3)->Arg(4);

static void BM_IntegralFusion2(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(integral_I_fusion2(4, 0.5));
}
BENCHMARK(BM_IntegralFusion2);

static void BM_RatioDeep(benchmark::State& state) {
    const auto stats = build_correlations(DatasetSpec::scalar(2, 1, 0.3, 1, 1));
    for (auto _ : state) benchmark::DoNotOptimize(ratio_deep(stats, DepthSpec::uniform(4, 3), 0.1));
}
BENCHMARK(BM_RatioDeep);

static void BM_RatioUnequal(benchmark::State& state) {
    const auto stats_u = build_correlations(DatasetSpec::scalar(1, 0.5, 0.0, 1, 1));
    const DepthSpec d = DepthSpec::unequal(3, 4, 1);
    for (auto _ : state) benchmark::DoNotOptimize(ratio_unequal(stats_u, d, 0.1));
}
BENCHMARK(BM_RatioUnequal);
BENCHMARK_MAIN();
