#include "qrac/rollout.hpp"

#include <stdexcept>
#include <thread>

namespace qrac::rollout {

WorkerPool::WorkerPool(const std::string& env_id, int num_workers, std::uint64_t global_seed,
                       int chain_length) {
    if (num_workers < 1) throw std::invalid_argument("num_workers must be >= 1");
    workers_.reserve(static_cast<std::size_t>(num_workers));
    for (int w = 0; w < num_workers; ++w) {
        Worker worker;
        worker.id = w;
        const std::uint64_t worker_seed = global_seed + static_cast<std::uint64_t>(w);
        worker.env = envs::make_env(env_id, worker_seed, chain_length);
        worker.rng = Rng(worker_seed ^ 0x9e3779b97f4a7c15ull);
        worker.observation = worker.env->reset();
        workers_.push_back(std::move(worker));
    }
}

const envs::EnvSpec& WorkerPool::env_spec() const { return workers_.front().env->spec(); }

RolloutSegment WorkerPool::run_worker(Worker& worker, const PolicyFn& policy, int n_steps) {
    RolloutSegment segment;
    segment.worker_id = worker.id;
    for (int t = 0; t < n_steps; ++t) {
        const int action = policy(worker.observation, worker.rng);
        envs::StepResult step = worker.env->step(action);
        segment.observations.push_back(worker.observation);
        segment.actions.push_back(action);
        segment.rewards.push_back(step.reward);
        segment.dones.push_back(step.done ? 1 : 0);
        segment.truncateds.push_back(step.truncated ? 1 : 0);
        worker.observation = step.observation;
        if (step.done || step.truncated) {
            segment.final_observation = worker.observation;
            worker.observation = worker.env->reset();
            return segment;
        }
    }
    segment.final_observation = worker.observation;
    return segment;
}

std::vector<RolloutSegment> WorkerPool::collect(const PolicyFn& policy, int n_steps,
                                                bool parallel) {
    if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
    std::vector<RolloutSegment> segments(workers_.size());
    if (parallel && workers_.size() > 1) {
        std::vector<std::thread> threads;
        threads.reserve(workers_.size());
        for (std::size_t w = 0; w < workers_.size(); ++w) {
            threads.emplace_back([&, w] { segments[w] = run_worker(workers_[w], policy, n_steps); });
        }
        for (auto& t : threads) t.join();
    } else {
        for (std::size_t w = 0; w < workers_.size(); ++w) {
            segments[w] = run_worker(workers_[w], policy, n_steps);
        }
    }
    return segments;
}

UpdateResult synchronous_update(const std::vector<RolloutSegment>& segments,
                                const SegmentGradFn& segment_grads, nn::ParameterSet& params,
                                nn::AdamState& adam, double grad_clip, double lr) {
    if (segments.empty()) throw std::invalid_argument("no segments to update from");
    nn::GradientSet averaged = nn::zero_grads_like(params);
    double loss_sum = 0.0;
    // Accumulation in worker order keeps the update bit-exact regardless of
    // how the segments were collected.
    for (const auto& segment : segments) {
        auto [loss, grads] = segment_grads(segment);
        loss_sum += loss;
        nn::axpy(averaged, 1.0, grads);
    }
    const double inv = 1.0 / static_cast<double>(segments.size());
    nn::scale(averaged, inv);
    if (!nn::all_finite(averaged)) {
        throw std::runtime_error("non-finite averaged gradient");
    }
    nn::clip_global_norm(averaged, grad_clip);
    nn::adam_step(params, averaged, adam, lr);
    return {loss_sum * inv, nn::global_norm(averaged)};
}

} // namespace qrac::rollout
