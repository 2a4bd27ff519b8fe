#include <benchmark/benchmark.h>

#include <vector>

#include "qrac/agents.hpp"
#include "qrac/distributional.hpp"
#include "qrac/envs.hpp"
#include "qrac/nn.hpp"
#include "qrac/rng.hpp"

using namespace qrac;

static void BM_ForwardBackward(benchmark::State& state) {
    Rng rng(1);
    auto params = nn::make_params({{4, 64, nn::Activation::Relu},
                                   {64, 64, nn::Activation::Relu},
                                   {64, 64, nn::Activation::Relu},
                                   {64, 2, nn::Activation::Linear}},
                                  rng);
    std::vector<double> input{0.1, -0.2, 0.05, 0.3};
    auto grads = nn::zero_grads_like(params);
    for (auto _ : state) {
        nn::ForwardCache cache;
        auto out = nn::forward(params, input, &cache);
        benchmark::DoNotOptimize(out);
        nn::backward_range(params, cache, std::vector<double>{1.0, -1.0}, grads);
    }
}
BENCHMARK(BM_ForwardBackward);

static void BM_CartPoleStep(benchmark::State& state) {
    auto env = envs::make_env("cartpole", 0);
    env->reset(0);
    int t = 0;
    for (auto _ : state) {
        auto step = env->step(t++ % 2);
        benchmark::DoNotOptimize(step);
        if (step.done || step.truncated) env->reset();
    }
}
BENCHMARK(BM_CartPoleStep);

static void BM_QuantileHuber(benchmark::State& state) {
    const auto n = static_cast<int>(state.range(0));
    Rng rng(2);
    std::vector<double> atoms(static_cast<std::size_t>(n)), targets(static_cast<std::size_t>(n));
    for (auto& a : atoms) a = rng.uniform(-5.0, 5.0);
    for (auto& t : targets) t = rng.uniform(-5.0, 5.0);
    const auto tau = dist::quantile_midpoints(n);
    for (auto _ : state) {
        auto result = dist::quantile_huber_loss(atoms, targets, tau, 1.0);
        benchmark::DoNotOptimize(result);
    }
}
BENCHMARK(BM_QuantileHuber)->Arg(16)->Arg(64)->Arg(128);

static void BM_Wasserstein1(benchmark::State& state) {
    Rng rng(3);
    dist::QuantileDistribution a, b;
    a.atoms.resize(64);
    b.atoms.resize(64);
    for (auto& v : a.atoms) v = rng.uniform(-5.0, 5.0);
    for (auto& v : b.atoms) v = rng.uniform(-5.0, 5.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(dist::wasserstein1(a, b));
    }
}
BENCHMARK(BM_Wasserstein1);

BENCHMARK_MAIN();
