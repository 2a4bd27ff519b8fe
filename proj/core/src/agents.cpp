#include "qrac/agents.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace qrac::agents {

Algo algo_from_string(const std::string& name) {
    if (name == "a2c") return Algo::A2C;
    if (name == "qr_a2c") return Algo::QrA2C;
    if (name == "qr_dqn") return Algo::QrDqn;
    throw std::invalid_argument("unknown algo: " + name);
}

std::string algo_name(Algo algo) {
    switch (algo) {
        case Algo::A2C: return "a2c";
        case Algo::QrA2C: return "qr_a2c";
        case Algo::QrDqn: return "qr_dqn";
    }
    return "?";
}

void AgentConfig::validate() const {
    auto fail = [](const char* field) {
        throw std::invalid_argument(std::string("invalid config field: ") + field);
    };
    if (!(learning_rate > 0.0)) fail("learning_rate");
    if (n_steps < 1) fail("n_steps");
    if (!(gamma >= 0.0 && gamma <= 1.0)) fail("gamma");
    if (num_atoms < 1) fail("num_atoms");
    if (!(grad_clip > 0.0)) fail("grad_clip");
    if (entropy_coef < 0.0) fail("entropy_coef");
    if (value_loss_coef < 0.0) fail("value_loss_coef");
    if (num_workers < 1) fail("num_workers");
    if (!(kappa > 0.0)) fail("kappa");
    if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0)) fail("epsilon_start");
    if (!(epsilon_end >= 0.0 && epsilon_end <= epsilon_start)) fail("epsilon_end");
    if (epsilon_decay_steps < 1) fail("epsilon_decay_steps");
    if (batch_size < 1) fail("batch_size");
    if (replay_capacity < batch_size) fail("replay_capacity");
    if (target_sync_interval < 1) fail("target_sync_interval");
}

ActorCriticNetwork make_actor_critic(int obs_width, int action_count, const AgentConfig& config,
                                     Rng& rng, std::vector<int> trunk_widths) {
    if (trunk_widths.empty()) throw std::invalid_argument("trunk must have at least one layer");
    ActorCriticNetwork net;
    net.shared = config.shared_trunk;
    net.obs_width = obs_width;
    net.action_count = action_count;
    net.critic_width = config.algo == Algo::QrA2C ? config.num_atoms : 1;
    net.trunk_layers = static_cast<int>(trunk_widths.size());

    std::vector<nn::LayerSpec> specs;
    auto push_trunk = [&] {
        int in = obs_width;
        for (int w : trunk_widths) {
            specs.push_back({in, w, nn::Activation::Relu});
            in = w;
        }
    };
    push_trunk();
    specs.push_back({trunk_widths.back(), action_count, nn::Activation::SoftmaxLogits});
    if (!net.shared) push_trunk();
    specs.push_back({trunk_widths.back(), net.critic_width, nn::Activation::Linear});
    net.params = nn::make_params(specs, rng);
    return net;
}

std::vector<double> softmax(std::span<const double> logits) {
    const double zmax = *std::max_element(logits.begin(), logits.end());
    std::vector<double> probs(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - zmax);
        sum += probs[i];
    }
    for (auto& p : probs) p /= sum;
    return probs;
}

double entropy(std::span<const double> probs) {
    double h = 0.0;
    for (double p : probs) {
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

std::vector<double> policy_probs(const ActorCriticNetwork& net, std::span<const double> obs) {
    auto features = nn::forward_range(net.params, 0, static_cast<std::size_t>(net.trunk_layers), obs);
    auto logits = nn::forward_range(net.params, net.policy_head_index(), 1, features);
    return softmax(logits);
}

std::vector<double> critic_output(const ActorCriticNetwork& net, std::span<const double> obs) {
    std::vector<double> features;
    if (net.shared) {
        features =
            nn::forward_range(net.params, 0, static_cast<std::size_t>(net.trunk_layers), obs);
    } else {
        features = nn::forward_range(net.params, net.critic_trunk_index(),
                                     static_cast<std::size_t>(net.trunk_layers), obs);
    }
    return nn::forward_range(net.params, net.critic_head_index(), 1, features);
}

double state_value(const ActorCriticNetwork& net, std::span<const double> obs) {
    const auto out = critic_output(net, obs);
    double sum = 0.0;
    for (double v : out) sum += v;
    return sum / static_cast<double>(out.size());
}

int sample_action(const ActorCriticNetwork& net, std::span<const double> obs, Rng& rng) {
    const auto probs = policy_probs(net, obs);
    const double u = rng.next_double();
    double acc = 0.0;
    for (std::size_t a = 0; a < probs.size(); ++a) {
        acc += probs[a];
        if (u < acc) return static_cast<int>(a);
    }
    return static_cast<int>(probs.size()) - 1;
}

int greedy_action(const ActorCriticNetwork& net, std::span<const double> obs) {
    const auto probs = policy_probs(net, obs);
    int best = 0;
    for (std::size_t a = 1; a < probs.size(); ++a) {
        if (probs[a] > probs[best]) best = static_cast<int>(a);
    }
    return best;
}

std::vector<double> nstep_returns(std::span<const double> rewards, double gamma,
                                  double bootstrap_value) {
    std::vector<double> returns(rewards.size());
    double acc = bootstrap_value;
    for (std::size_t t = rewards.size(); t-- > 0;) {
        acc = rewards[t] + gamma * acc;
        returns[t] = acc;
    }
    return returns;
}

std::vector<double> advantage(std::span<const double> returns, std::span<const double> baselines) {
    if (returns.size() != baselines.size()) {
        throw std::invalid_argument("returns/baselines length mismatch");
    }
    std::vector<double> adv(returns.size());
    for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = returns[i] - baselines[i];
    return adv;
}

std::vector<double> segment_returns(const ActorCriticNetwork& net,
                                    const rollout::RolloutSegment& segment, double gamma) {
    const double bootstrap =
        segment.terminal() ? 0.0 : state_value(net, segment.final_observation);
    return nstep_returns(segment.rewards, gamma, bootstrap);
}

std::vector<std::vector<double>> segment_distributional_targets(
    const ActorCriticNetwork& net, const rollout::RolloutSegment& segment, double gamma) {
    std::vector<double> tail(static_cast<std::size_t>(net.critic_width), 0.0);
    if (!segment.terminal()) tail = critic_output(net, segment.final_observation);
    std::vector<std::vector<double>> targets(segment.size());
    for (std::size_t t = segment.size(); t-- > 0;) {
        for (auto& v : tail) v = segment.rewards[t] + gamma * v;
        targets[t] = tail;
    }
    return targets;
}

namespace {

// Shared actor-critic backward pass. The per-step hook fills the critic-head
// output gradient and adds its loss contribution; the actor term is common.
struct StepGrad {
    std::vector<double> dlogits;
    std::vector<double> dcritic;
};

LossResult actor_critic_loss(
    const ActorCriticNetwork& net, const rollout::RolloutSegment& segment,
    std::span<const double> baselines, std::span<const double> returns, const AgentConfig& config,
    const std::function<double(std::size_t t, std::span<const double> critic_out,
                               std::vector<double>& dcritic)>& critic_term) {
    const std::size_t n = segment.size();
    if (n == 0) throw std::invalid_argument("empty segment");
    const double inv_n = 1.0 / static_cast<double>(n);
    const auto trunk_count = static_cast<std::size_t>(net.trunk_layers);

    LossResult result;
    result.grads = nn::zero_grads_like(net.params);

    for (std::size_t t = 0; t < n; ++t) {
        const auto& obs = segment.observations[t];
        nn::ForwardCache actor_trunk_cache, policy_cache, critic_trunk_cache, critic_cache;
        const auto h_actor = nn::forward_range(net.params, 0, trunk_count, obs, &actor_trunk_cache);
        const auto logits =
            nn::forward_range(net.params, net.policy_head_index(), 1, h_actor, &policy_cache);
        std::vector<double> h_critic;
        if (net.shared) {
            h_critic = h_actor;
        } else {
            h_critic = nn::forward_range(net.params, net.critic_trunk_index(), trunk_count, obs,
                                         &critic_trunk_cache);
        }
        const auto critic_out =
            nn::forward_range(net.params, net.critic_head_index(), 1, h_critic, &critic_cache);

        const auto probs = softmax(logits);
        const double h = entropy(probs);
        const int action = segment.actions[t];
        const double adv = returns[t] - baselines[t]; // stop-gradient constant

        result.loss += -inv_n * (std::log(probs[static_cast<std::size_t>(action)]) * adv +
                                 config.entropy_coef * h);

        std::vector<double> dlogits(probs.size());
        for (std::size_t k = 0; k < probs.size(); ++k) {
            const double indicator = static_cast<int>(k) == action ? 1.0 : 0.0;
            dlogits[k] = inv_n * (adv * (probs[k] - indicator) +
                                  config.entropy_coef * probs[k] * (std::log(probs[k]) + h));
        }

        std::vector<double> dcritic(critic_out.size(), 0.0);
        result.loss += critic_term(t, critic_out, dcritic);

        auto dh_actor = nn::backward_range(net.params, policy_cache, dlogits, result.grads);
        auto dh_critic = nn::backward_range(net.params, critic_cache, dcritic, result.grads);
        if (net.shared) {
            for (std::size_t i = 0; i < dh_actor.size(); ++i) dh_actor[i] += dh_critic[i];
            nn::backward_range(net.params, actor_trunk_cache, dh_actor, result.grads);
        } else {
            nn::backward_range(net.params, actor_trunk_cache, dh_actor, result.grads);
            nn::backward_range(net.params, critic_trunk_cache, dh_critic, result.grads);
        }
    }
    if (!std::isfinite(result.loss)) throw std::runtime_error("non-finite loss");
    return result;
}

} // namespace

LossResult a2c_loss(const ActorCriticNetwork& net, const rollout::RolloutSegment& segment,
                    std::span<const double> returns, const AgentConfig& config) {
    // Baselines re-derived from the same network so advantages are consistent
    // with the critic outputs used in the squared-error term.
    std::vector<double> baselines(segment.size());
    for (std::size_t t = 0; t < segment.size(); ++t) {
        baselines[t] = state_value(net, segment.observations[t]);
    }
    return a2c_loss(net, segment, returns, config, baselines);
}

LossResult a2c_loss(const ActorCriticNetwork& net, const rollout::RolloutSegment& segment,
                    std::span<const double> returns, const AgentConfig& config,
                    std::span<const double> baselines) {
    const double inv_n = 1.0 / static_cast<double>(segment.size());
    return actor_critic_loss(
        net, segment, baselines, returns, config,
        [&](std::size_t t, std::span<const double> critic_out, std::vector<double>& dcritic) {
            const double residual = returns[t] - critic_out[0];
            dcritic[0] = -2.0 * config.value_loss_coef * inv_n * residual;
            return config.value_loss_coef * inv_n * residual * residual;
        });
}

LossResult qr_a2c_loss(const ActorCriticNetwork& net, const rollout::RolloutSegment& segment,
                       const std::vector<std::vector<double>>& target_samples,
                       const AgentConfig& config) {
    std::vector<double> baselines(segment.size());
    for (std::size_t t = 0; t < segment.size(); ++t) {
        baselines[t] = state_value(net, segment.observations[t]);
    }
    return qr_a2c_loss(net, segment, target_samples, config, baselines);
}

LossResult qr_a2c_loss(const ActorCriticNetwork& net, const rollout::RolloutSegment& segment,
                       const std::vector<std::vector<double>>& target_samples,
                       const AgentConfig& config, std::span<const double> baselines) {
    const std::size_t n = segment.size();
    if (target_samples.size() != n) {
        throw std::invalid_argument("target sample count does not match segment length");
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    const auto midpoints = dist::quantile_midpoints(net.critic_width);
    std::vector<double> returns(n);
    for (std::size_t t = 0; t < n; ++t) {
        double sum = 0.0;
        for (double s : target_samples[t]) sum += s;
        returns[t] = sum / static_cast<double>(target_samples[t].size());
    }
    return actor_critic_loss(
        net, segment, baselines, returns, config,
        [&](std::size_t t, std::span<const double> critic_out, std::vector<double>& dcritic) {
            const auto qh =
                dist::quantile_huber_loss(critic_out, target_samples[t], midpoints, config.kappa);
            for (std::size_t i = 0; i < dcritic.size(); ++i) {
                dcritic[i] = config.value_loss_coef * inv_n * qh.grad_atoms[i];
            }
            return config.value_loss_coef * inv_n * qh.loss;
        });
}

// --- QR-DQN ---

QrDqnNetwork make_qr_dqn(int obs_width, int action_count, int num_atoms, Rng& rng,
                         std::vector<int> trunk_widths) {
    QrDqnNetwork net;
    net.obs_width = obs_width;
    net.action_count = action_count;
    net.num_atoms = num_atoms;
    std::vector<nn::LayerSpec> specs;
    int in = obs_width;
    for (int w : trunk_widths) {
        specs.push_back({in, w, nn::Activation::Relu});
        in = w;
    }
    specs.push_back({in, action_count * num_atoms, nn::Activation::Linear});
    net.params = nn::make_params(specs, rng);
    return net;
}

std::vector<double> qr_dqn_quantiles(const QrDqnNetwork& net, std::span<const double> obs) {
    return nn::forward(net.params, obs);
}

namespace {

int greedy_by_mean(std::span<const double> quantiles, int action_count, int num_atoms) {
    int best = 0;
    double best_mean = 0.0;
    for (int a = 0; a < action_count; ++a) {
        double mean = 0.0;
        for (int i = 0; i < num_atoms; ++i) {
            mean += quantiles[static_cast<std::size_t>(a) * num_atoms + i];
        }
        mean /= num_atoms;
        if (a == 0 || mean > best_mean) {
            best = a;
            best_mean = mean;
        }
    }
    return best;
}

} // namespace

int qr_dqn_act(const QrDqnNetwork& net, std::span<const double> obs, double epsilon, Rng& rng) {
    if (epsilon > 0.0 && rng.next_double() < epsilon) {
        return rng.next_int(net.action_count);
    }
    const auto quantiles = qr_dqn_quantiles(net, obs);
    return greedy_by_mean(quantiles, net.action_count, net.num_atoms);
}

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(static_cast<std::size_t>(capacity)) {
    if (capacity < 1) throw std::invalid_argument("replay capacity must be >= 1");
    storage_.reserve(capacity_);
}

void ReplayBuffer::add(Transition t) {
    if (storage_.size() < capacity_) {
        storage_.push_back(std::move(t));
    } else {
        storage_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
}

std::vector<const Transition*> ReplayBuffer::sample(int batch_size, Rng& rng) const {
    if (storage_.empty()) throw std::logic_error("sampling from empty replay buffer");
    std::vector<const Transition*> batch(static_cast<std::size_t>(batch_size));
    for (auto& slot : batch) {
        slot = &storage_[static_cast<std::size_t>(rng.next_int(static_cast<int>(storage_.size())))];
    }
    return batch;
}

LossResult qr_dqn_update(const QrDqnNetwork& net, const QrDqnNetwork& target_net,
                         std::span<const Transition* const> batch, double gamma, double kappa) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    const int n_atoms = net.num_atoms;
    const auto midpoints = dist::quantile_midpoints(n_atoms);
    const double inv_batch = 1.0 / static_cast<double>(batch.size());

    LossResult result;
    result.grads = nn::zero_grads_like(net.params);
    for (const Transition* transition : batch) {
        std::vector<double> targets(static_cast<std::size_t>(n_atoms), transition->reward);
        if (!transition->done) {
            const auto next_quantiles = qr_dqn_quantiles(target_net, transition->next_state);
            const int a_star = greedy_by_mean(next_quantiles, net.action_count, n_atoms);
            for (int i = 0; i < n_atoms; ++i) {
                targets[static_cast<std::size_t>(i)] +=
                    gamma * next_quantiles[static_cast<std::size_t>(a_star) * n_atoms + i];
            }
        }
        nn::ForwardCache cache;
        const auto quantiles = nn::forward(net.params, transition->state, &cache);
        const std::size_t offset = static_cast<std::size_t>(transition->action) * n_atoms;
        const std::span<const double> predicted(quantiles.data() + offset,
                                                static_cast<std::size_t>(n_atoms));
        const auto qh = dist::quantile_huber_loss(predicted, targets, midpoints, kappa);
        result.loss += inv_batch * qh.loss;
        std::vector<double> dout(quantiles.size(), 0.0);
        for (int i = 0; i < n_atoms; ++i) {
            dout[offset + static_cast<std::size_t>(i)] = inv_batch * qh.grad_atoms[i];
        }
        nn::backward_range(net.params, cache, dout, result.grads);
    }
    if (!std::isfinite(result.loss)) throw std::runtime_error("non-finite loss");
    return result;
}

} // namespace qrac::agents
