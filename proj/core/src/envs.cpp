#include "qrac/envs.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace qrac::envs {

namespace {

class EpisodicEnv : public Env {
  public:
    explicit EpisodicEnv(std::uint64_t seed) : rng_(seed) {}

    std::vector<double> reset(std::optional<std::uint64_t> seed) final {
        if (seed) rng_.seed(*seed);
        step_count_ = 0;
        finished_ = false;
        return reset_state();
    }

    StepResult step(int action) final {
        if (finished_) throw std::logic_error("step after episode end");
        if (action < 0 || action >= spec().action_count) {
            throw std::logic_error("action index out of range");
        }
        StepResult result = advance(action);
        ++step_count_;
        if (!result.done && step_count_ >= spec().max_episode_steps) {
            result.truncated = true;
        }
        finished_ = result.done || result.truncated;
        return result;
    }

  protected:
    virtual std::vector<double> reset_state() = 0;
    virtual StepResult advance(int action) = 0;

    Rng rng_;

  private:
    int step_count_ = 0;
    bool finished_ = true;
};

// Pole-on-cart with the standard constants and Euler integration; reward 1
// per step, terminating at |angle| > 12 degrees or |position| > 2.4.
class CartPoleEnv final : public EpisodicEnv {
  public:
    explicit CartPoleEnv(std::uint64_t seed) : EpisodicEnv(seed) {
        spec_ = {"cartpole", 4, 2, 200};
    }

    const EnvSpec& spec() const override { return spec_; }
    double max_return() const override { return 200.0; }

  protected:
    std::vector<double> reset_state() override {
        for (auto& v : state_) v = rng_.uniform(-0.05, 0.05);
        return {state_[0], state_[1], state_[2], state_[3]};
    }

    StepResult advance(int action) override {
        constexpr double gravity = 9.8;
        constexpr double mass_cart = 1.0;
        constexpr double mass_pole = 0.1;
        constexpr double total_mass = mass_cart + mass_pole;
        constexpr double half_length = 0.5;
        constexpr double polemass_length = mass_pole * half_length;
        constexpr double force_mag = 10.0;
        constexpr double tau = 0.02;
        constexpr double theta_limit = 12.0 * 2.0 * M_PI / 360.0;
        constexpr double x_limit = 2.4;

        double x = state_[0], x_dot = state_[1], theta = state_[2], theta_dot = state_[3];
        const double force = action == 1 ? force_mag : -force_mag;
        const double cos_t = std::cos(theta);
        const double sin_t = std::sin(theta);
        const double temp =
            (force + polemass_length * theta_dot * theta_dot * sin_t) / total_mass;
        const double theta_acc =
            (gravity * sin_t - cos_t * temp) /
            (half_length * (4.0 / 3.0 - mass_pole * cos_t * cos_t / total_mass));
        const double x_acc = temp - polemass_length * theta_acc * cos_t / total_mass;

        x += tau * x_dot;
        x_dot += tau * x_acc;
        theta += tau * theta_dot;
        theta_dot += tau * theta_acc;
        state_ = {x, x_dot, theta, theta_dot};

        StepResult result;
        result.observation = {x, x_dot, theta, theta_dot};
        result.reward = 1.0;
        result.done = x < -x_limit || x > x_limit || theta < -theta_limit || theta > theta_limit;
        return result;
    }

  private:
    EnvSpec spec_;
    std::array<double, 4> state_{};
};

// Underpowered car in a valley; reward -1 per step until position reaches
// the 0.5 goal. Standard dynamics, 200-step cap.
class MountainCarEnv final : public EpisodicEnv {
  public:
    explicit MountainCarEnv(std::uint64_t seed) : EpisodicEnv(seed) {
        spec_ = {"mountaincar", 2, 3, 200};
    }

    const EnvSpec& spec() const override { return spec_; }
    double max_return() const override { return -110.0; }

  protected:
    std::vector<double> reset_state() override {
        position_ = rng_.uniform(-0.6, -0.4);
        velocity_ = 0.0;
        return {position_, velocity_};
    }

    StepResult advance(int action) override {
        constexpr double force = 0.001;
        constexpr double gravity = 0.0025;
        velocity_ += (action - 1) * force - std::cos(3.0 * position_) * gravity;
        velocity_ = std::clamp(velocity_, -0.07, 0.07);
        position_ += velocity_;
        position_ = std::clamp(position_, -1.2, 0.6);
        if (position_ <= -1.2 && velocity_ < 0.0) velocity_ = 0.0;

        StepResult result;
        result.observation = {position_, velocity_};
        result.reward = -1.0;
        result.done = position_ >= 0.5;
        return result;
    }

  private:
    EnvSpec spec_;
    double position_ = 0.0;
    double velocity_ = 0.0;
};

// Length-L corridor: positions 0..L, start at 0, single reward 1 at the far
// end. Action 0 steps forward, action 1 steps back (floored at 0). Sparse
// stand-in for MountainCar in fast tests.
class ChainWorldEnv final : public EpisodicEnv {
  public:
    ChainWorldEnv(std::uint64_t seed, int length) : EpisodicEnv(seed), length_(length) {
        if (length_ < 1) throw std::invalid_argument("chain length must be >= 1");
        spec_ = {"chainworld", length_ + 1, 2, 4 * length_};
    }

    const EnvSpec& spec() const override { return spec_; }
    double max_return() const override { return 1.0; }

  protected:
    std::vector<double> reset_state() override {
        position_ = 0;
        return observe();
    }

    StepResult advance(int action) override {
        position_ += action == 0 ? 1 : -1;
        position_ = std::clamp(position_, 0, length_);
        StepResult result;
        result.observation = observe();
        result.done = position_ == length_;
        result.reward = result.done ? 1.0 : 0.0;
        return result;
    }

  private:
    std::vector<double> observe() const {
        std::vector<double> obs(static_cast<std::size_t>(length_) + 1, 0.0);
        obs[static_cast<std::size_t>(position_)] = 1.0;
        return obs;
    }

    EnvSpec spec_;
    int length_;
    int position_ = 0;
};

} // namespace

std::unique_ptr<Env> make_env(const std::string& id, std::uint64_t seed, int chain_length) {
    if (id == "cartpole") return std::make_unique<CartPoleEnv>(seed);
    if (id == "mountaincar") return std::make_unique<MountainCarEnv>(seed);
    if (id == "chainworld") return std::make_unique<ChainWorldEnv>(seed, chain_length);
    throw std::invalid_argument("unknown environment id: " + id);
}

double default_solve_threshold(const std::string& id) {
    if (id == "cartpole") return 195.0;
    if (id == "mountaincar") return -110.0;
    if (id == "chainworld") return 1.0;
    throw std::invalid_argument("unknown environment id: " + id);
}

} // namespace qrac::envs
