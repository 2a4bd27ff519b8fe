#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qrac/distributional.hpp"
#include "qrac/nn.hpp"
#include "qrac/rng.hpp"
#include "qrac/rollout.hpp"

namespace qrac::agents {

enum class Algo { A2C, QrA2C, QrDqn };

Algo algo_from_string(const std::string& name);
std::string algo_name(Algo algo);

struct AgentConfig {
    Algo algo = Algo::QrA2C;
    double learning_rate = 7e-4;
    int n_steps = 100;
    double gamma = 0.99;
    int num_atoms = 64;
    double grad_clip = 0.5;
    double entropy_coef = 0.01;
    double value_loss_coef = 0.5;
    int num_workers = 1;
    bool shared_trunk = true;
    double kappa = 1.0;
    // qr_dqn only
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    int epsilon_decay_steps = 10000;
    int replay_capacity = 10000;
    int batch_size = 32;
    int target_sync_interval = 500;

    void validate() const; // throws std::invalid_argument naming the field
};

// Actor-critic parameters held as one flat layer list so optimizer state,
// clipping, and snapshots see a single ParameterSet. Wiring:
//   shared:      [trunk x3][policy head][critic head]
//   non-shared:  [actor trunk x3][policy head][critic trunk x3][critic head]
// Both heads read the 64-wide trunk features; the critic head is 1-wide for
// a2c and num_atoms-wide for qr_a2c.
struct ActorCriticNetwork {
    nn::ParameterSet params;
    bool shared = true;
    int obs_width = 0;
    int action_count = 0;
    int critic_width = 1;
    int trunk_layers = 3;

    std::size_t policy_head_index() const { return static_cast<std::size_t>(trunk_layers); }
    std::size_t critic_trunk_index() const {
        return static_cast<std::size_t>(trunk_layers) + 1;
    }
    std::size_t critic_head_index() const {
        return shared ? static_cast<std::size_t>(trunk_layers) + 1
                      : 2 * static_cast<std::size_t>(trunk_layers) + 1;
    }
};

ActorCriticNetwork make_actor_critic(int obs_width, int action_count, const AgentConfig& config,
                                     Rng& rng, std::vector<int> trunk_widths = {64, 64, 64});

std::vector<double> softmax(std::span<const double> logits);
double entropy(std::span<const double> probs);

std::vector<double> policy_probs(const ActorCriticNetwork& net, std::span<const double> obs);
// Critic output: single value for a2c, atom locations for qr_a2c.
std::vector<double> critic_output(const ActorCriticNetwork& net, std::span<const double> obs);
// Scalar baseline V(s): critic value, or mean of critic atoms.
double state_value(const ActorCriticNetwork& net, std::span<const double> obs);

int sample_action(const ActorCriticNetwork& net, std::span<const double> obs, Rng& rng);
// Argmax of policy probabilities; ties break to the lowest action index.
int greedy_action(const ActorCriticNetwork& net, std::span<const double> obs);

// Discounted n-step returns by backward recursion. bootstrap_value must be 0
// when the segment ended in true termination.
std::vector<double> nstep_returns(std::span<const double> rewards, double gamma,
                                  double bootstrap_value);
std::vector<double> advantage(std::span<const double> returns, std::span<const double> baselines);

// Per-step scalar returns for a segment, bootstrapping from the critic at the
// final observation unless the episode truly terminated.
std::vector<double> segment_returns(const ActorCriticNetwork& net,
                                    const rollout::RolloutSegment& segment, double gamma);
// Per-step distributional target samples, bootstrapping atom-by-atom.
std::vector<std::vector<double>> segment_distributional_targets(
    const ActorCriticNetwork& net, const rollout::RolloutSegment& segment, double gamma);

struct LossResult {
    double loss = 0.0;
    nn::GradientSet grads;
};

// A2C objective: policy gradient with advantages treated as constants, plus
// entropy bonus and squared-error critic term. The overloads taking explicit
// baselines keep the advantage values fixed (the default recomputes them
// from the critic, which is what training uses).
LossResult a2c_loss(const ActorCriticNetwork& net, const rollout::RolloutSegment& segment,
                    std::span<const double> returns, const AgentConfig& config);
LossResult a2c_loss(const ActorCriticNetwork& net, const rollout::RolloutSegment& segment,
                    std::span<const double> returns, const AgentConfig& config,
                    std::span<const double> baselines);

// Same actor term with baseline = mean of critic atoms; critic term is the
// quantile-Huber loss against per-step distributional target samples.
LossResult qr_a2c_loss(const ActorCriticNetwork& net, const rollout::RolloutSegment& segment,
                       const std::vector<std::vector<double>>& target_samples,
                       const AgentConfig& config);
LossResult qr_a2c_loss(const ActorCriticNetwork& net, const rollout::RolloutSegment& segment,
                       const std::vector<std::vector<double>>& target_samples,
                       const AgentConfig& config, std::span<const double> baselines);

// --- QR-DQN baseline ---

struct QrDqnNetwork {
    nn::ParameterSet params; // trunk x3 + linear head of action_count * num_atoms
    int obs_width = 0;
    int action_count = 0;
    int num_atoms = 0;
};

QrDqnNetwork make_qr_dqn(int obs_width, int action_count, int num_atoms, Rng& rng,
                         std::vector<int> trunk_widths = {64, 64, 64});

// Quantile atoms for every action at a state, flattened [action][atom].
std::vector<double> qr_dqn_quantiles(const QrDqnNetwork& net, std::span<const double> obs);

// Epsilon-greedy over mean atom values; ties break to the lowest index.
int qr_dqn_act(const QrDqnNetwork& net, std::span<const double> obs, double epsilon, Rng& rng);

struct Transition {
    std::vector<double> state;
    int action = 0;
    double reward = 0.0;
    std::vector<double> next_state;
    bool done = false;
};

class ReplayBuffer {
  public:
    explicit ReplayBuffer(int capacity);
    void add(Transition t);
    std::size_t size() const { return storage_.size(); }
    // Uniform sample with replacement.
    std::vector<const Transition*> sample(int batch_size, Rng& rng) const;

  private:
    std::vector<Transition> storage_;
    std::size_t capacity_;
    std::size_t next_ = 0;
};

// One quantile-regression Q-learning step over a batch: greedy action under
// the target network picks the bootstrap atoms, terminal transitions cut the
// bootstrap, loss is the mean quantile-Huber over the batch.
LossResult qr_dqn_update(const QrDqnNetwork& net, const QrDqnNetwork& target_net,
                         std::span<const Transition* const> batch, double gamma, double kappa);

} // namespace qrac::agents
