#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qrac/rng.hpp"

namespace qrac::envs {

struct EnvSpec {
    std::string id;
    int observation_width = 0;
    int action_count = 0;
    int max_episode_steps = 0;
};

struct StepResult {
    std::vector<double> observation;
    double reward = 0.0;
    bool done = false;      // true termination; no bootstrap
    bool truncated = false; // time cap; bootstrap from the final observation
};

// Episodic environment. Single-owner: one instance per worker, movable
// between threads, no shared state.
class Env {
  public:
    virtual ~Env() = default;
    virtual const EnvSpec& spec() const = 0;
    virtual std::vector<double> reset(std::optional<std::uint64_t> seed = std::nullopt) = 0;
    virtual StepResult step(int action) = 0;
    // Conventional per-episode return ceiling / solve bar for the task.
    virtual double max_return() const = 0;
};

// Known ids: "cartpole", "mountaincar", "chainworld". chain_length only
// applies to chainworld. Unknown ids throw std::invalid_argument.
std::unique_ptr<Env> make_env(const std::string& id, std::uint64_t seed, int chain_length = 5);

// Conventional solve threshold for an environment id (195 for cartpole,
// 1 for chainworld, -110 for mountaincar).
double default_solve_threshold(const std::string& id);

} // namespace qrac::envs
