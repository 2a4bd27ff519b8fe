#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "qrac/envs.hpp"
#include "qrac/nn.hpp"
#include "qrac/rng.hpp"

namespace qrac::rollout {

// One worker's n-step slice of experience. dones/truncateds are per-step;
// done may be true only at the last filled index. final_observation is the
// state after the last step (bootstrap point when the segment did not
// terminate).
struct RolloutSegment {
    int worker_id = 0;
    std::vector<std::vector<double>> observations;
    std::vector<int> actions;
    std::vector<double> rewards;
    std::vector<std::uint8_t> dones;
    std::vector<std::uint8_t> truncateds;
    std::vector<double> final_observation;

    std::size_t size() const { return actions.size(); }
    bool terminal() const { return !dones.empty() && dones.back() != 0; }
    bool truncated() const { return !truncateds.empty() && truncateds.back() != 0; }
};

using PolicyFn = std::function<int(std::span<const double> observation, Rng& rng)>;

// Fixed set of workers, each owning a private environment and random stream
// seeded as global_seed + worker_id.
class WorkerPool {
  public:
    WorkerPool(const std::string& env_id, int num_workers, std::uint64_t global_seed,
               int chain_length = 5);

    int num_workers() const { return static_cast<int>(workers_.size()); }
    const envs::EnvSpec& env_spec() const;

    // Every worker advances its environment up to n_steps under the given
    // policy (a pure function of the parameter snapshot captured in it).
    // Episodes ending mid-segment cut the segment short; the environment is
    // reset before the next collect. Results are bit-identical whether
    // workers run sequentially or on separate threads.
    std::vector<RolloutSegment> collect(const PolicyFn& policy, int n_steps,
                                        bool parallel = false);

  private:
    struct Worker {
        int id = 0;
        std::unique_ptr<envs::Env> env;
        Rng rng;
        std::vector<double> observation;
    };

    RolloutSegment run_worker(Worker& worker, const PolicyFn& policy, int n_steps);

    std::vector<Worker> workers_;
};

// Per-segment loss/gradient evaluator supplied by the agent.
using SegmentGradFn =
    std::function<std::pair<double, nn::GradientSet>(const RolloutSegment& segment)>;

struct UpdateResult {
    double mean_loss = 0.0;
    double grad_norm = 0.0; // after clipping
};

// Barrier update: per-segment gradients averaged in worker order, clipped by
// global norm, then a single Adam step on params.
UpdateResult synchronous_update(const std::vector<RolloutSegment>& segments,
                                const SegmentGradFn& segment_grads, nn::ParameterSet& params,
                                nn::AdamState& adam, double grad_clip, double lr);

} // namespace qrac::rollout
