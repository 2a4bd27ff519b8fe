#include <doctest.h>

#include <limits>
#include <stdexcept>
#include <span>
#include <utility>
#include <vector>

#include "qrac/envs.hpp"
#include "qrac/nn.hpp"
#include "qrac/rng.hpp"
#include "qrac/rollout.hpp"

using namespace qrac;

namespace {

// Policy with a deterministic dependence on both observation and stream.
int mixing_policy(std::span<const double> obs, Rng& rng) {
    const double u = rng.next_double();
    return (obs[0] + u > 0.75) ? 1 : 0;
}

bool segments_equal(const rollout::RolloutSegment& a, const rollout::RolloutSegment& b) {
    return a.worker_id == b.worker_id && a.observations == b.observations &&
           a.actions == b.actions && a.rewards == b.rewards && a.dones == b.dones &&
           a.truncateds == b.truncateds && a.final_observation == b.final_observation;
}

} // namespace

TEST_CASE("single worker reproduces a hand-rolled environment loop") {
    const std::uint64_t seed = 17;
    rollout::WorkerPool pool("chainworld", 1, seed, 5);
    const auto segments = pool.collect(mixing_policy, 5);
    REQUIRE(segments.size() == 1);

    // Reference loop with the same seeding convention: env seed + worker id,
    // policy stream from the same worker seed.
    auto env = envs::make_env("chainworld", seed + 0, 5);
    Rng rng((seed + 0) ^ 0x9e3779b97f4a7c15ull);
    auto obs = env->reset();
    rollout::RolloutSegment expected;
    expected.worker_id = 0;
    for (int t = 0; t < 5; ++t) {
        const int action = mixing_policy(obs, rng);
        const auto step = env->step(action);
        expected.observations.push_back(obs);
        expected.actions.push_back(action);
        expected.rewards.push_back(step.reward);
        expected.dones.push_back(step.done ? 1 : 0);
        expected.truncateds.push_back(step.truncated ? 1 : 0);
        expected.final_observation = step.observation;
        obs = step.observation;
        if (step.done || step.truncated) break;
    }
    CHECK(segments_equal(segments[0], expected));
}

TEST_CASE("parallel and sequential schedulers are bit-identical") {
    rollout::WorkerPool sequential("cartpole", 4, 99);
    rollout::WorkerPool parallel("cartpole", 4, 99);
    for (int round = 0; round < 5; ++round) {
        const auto a = sequential.collect(mixing_policy, 20, /*parallel=*/false);
        const auto b = parallel.collect(mixing_policy, 20, /*parallel=*/true);
        REQUIRE(a.size() == 4);
        REQUIRE(b.size() == 4);
        for (std::size_t w = 0; w < 4; ++w) CHECK(segments_equal(a[w], b[w]));
    }
}

TEST_CASE("workers with distinct seeds produce distinct trajectories") {
    rollout::WorkerPool pool("cartpole", 4, 7);
    const auto segments = pool.collect(mixing_policy, 30);
    bool any_different = false;
    for (std::size_t w = 1; w < segments.size(); ++w) {
        if (segments[w].observations != segments[0].observations) any_different = true;
        CHECK(segments[w].worker_id == static_cast<int>(w));
    }
    CHECK(any_different);
}

TEST_CASE("episode end cuts the segment and the environment resets") {
    // Always-forward on a length-3 chain finishes in exactly 3 steps.
    rollout::WorkerPool pool("chainworld", 1, 0, 3);
    const auto forward = [](std::span<const double>, Rng&) { return 0; };
    const auto first = pool.collect(forward, 5);
    REQUIRE(first.size() == 1);
    CHECK(first[0].size() == 3);
    CHECK(first[0].terminal());
    CHECK(first[0].dones[0] == 0);
    CHECK(first[0].dones[1] == 0);
    CHECK(first[0].dones[2] == 1);

    const auto second = pool.collect(forward, 5);
    CHECK(second[0].observations[0][0] == 1.0); // back at the one-hot start
    CHECK(second[0].size() == 3);
}

TEST_CASE("segments shorter than n_steps only happen on episode end") {
    rollout::WorkerPool pool("cartpole", 2, 3);
    for (int round = 0; round < 20; ++round) {
        for (const auto& seg : pool.collect(mixing_policy, 10)) {
            if (seg.size() < 10) CHECK((seg.terminal() || seg.truncated()));
        }
    }
}

namespace {

// Tiny parameter set plus a gradient function whose output is a deterministic
// function of the segment, for exercising the update path with exact oracles.
nn::ParameterSet tiny_params() {
    Rng rng(5);
    return nn::make_params({{2, 3, nn::Activation::Linear}}, rng);
}

nn::GradientSet segment_fingerprint_grads(const nn::ParameterSet& params,
                                          const rollout::RolloutSegment& seg) {
    auto grads = nn::zero_grads_like(params);
    double acc = 0.5 + seg.worker_id;
    for (double r : seg.rewards) acc += r;
    for (std::size_t i = 0; i < grads.layers[0].weights.size(); ++i) {
        grads.layers[0].weights[i] = acc * (static_cast<double>(i) + 1.0) * 0.01;
    }
    for (std::size_t i = 0; i < grads.layers[0].bias.size(); ++i) {
        grads.layers[0].bias[i] = -acc * 0.02;
    }
    return grads;
}

} // namespace

TEST_CASE("identical segments average to the single-segment gradient") {
    auto params_multi = tiny_params();
    auto params_single = tiny_params();
    rollout::WorkerPool pool("chainworld", 1, 1, 4);
    auto segment = pool.collect(mixing_policy, 4)[0];
    auto twin = segment;

    const rollout::SegmentGradFn grad_fn = [&](const rollout::RolloutSegment& seg) {
        return std::make_pair(1.0, segment_fingerprint_grads(params_multi, seg));
    };
    auto adam_multi = nn::make_adam_state(params_multi);
    auto adam_single = nn::make_adam_state(params_single);
    rollout::synchronous_update({segment, twin}, grad_fn, params_multi, adam_multi, 0.5, 1e-3);
    rollout::synchronous_update({segment}, grad_fn, params_single, adam_single, 0.5, 1e-3);
    CHECK(params_multi.layers[0].weights == params_single.layers[0].weights);
    CHECK(params_multi.layers[0].bias == params_single.layers[0].bias);
}

TEST_CASE("four-segment average matches an independent accumulation oracle") {
    auto params = tiny_params();
    rollout::WorkerPool pool("cartpole", 4, 23);
    const auto segments = pool.collect(mixing_policy, 6);

    // Oracle: accumulate each segment's gradient independently, divide by 4,
    // clip, and take the same Adam step on a copy.
    auto expected_params = params;
    auto expected_grads = nn::zero_grads_like(params);
    for (const auto& seg : segments) {
        nn::axpy(expected_grads, 1.0, segment_fingerprint_grads(params, seg));
    }
    nn::scale(expected_grads, 1.0 / 4.0);
    nn::clip_global_norm(expected_grads, 0.5);
    auto expected_adam = nn::make_adam_state(expected_params);
    nn::adam_step(expected_params, expected_grads, expected_adam, 1e-3);

    const rollout::SegmentGradFn grad_fn = [&](const rollout::RolloutSegment& seg) {
        return std::make_pair(0.0, segment_fingerprint_grads(params, seg));
    };
    auto adam = nn::make_adam_state(params);
    const auto result = rollout::synchronous_update(segments, grad_fn, params, adam, 0.5, 1e-3);
    CHECK(result.grad_norm == doctest::Approx(nn::global_norm(expected_grads)).epsilon(1e-12));
    for (std::size_t i = 0; i < params.layers[0].weights.size(); ++i) {
        CHECK(params.layers[0].weights[i] ==
              doctest::Approx(expected_params.layers[0].weights[i]).epsilon(1e-12));
    }
}

TEST_CASE("non-finite averaged gradients abort the update") {
    auto params = tiny_params();
    rollout::WorkerPool pool("chainworld", 1, 2, 3);
    const auto segments = pool.collect(mixing_policy, 3);
    const rollout::SegmentGradFn bad_fn = [&](const rollout::RolloutSegment&) {
        auto grads = nn::zero_grads_like(params);
        grads.layers[0].weights[0] = std::numeric_limits<double>::quiet_NaN();
        return std::make_pair(0.0, grads);
    };
    auto adam = nn::make_adam_state(params);
    CHECK_THROWS_AS(rollout::synchronous_update(segments, bad_fn, params, adam, 0.5, 1e-3),
                    std::runtime_error);
}
