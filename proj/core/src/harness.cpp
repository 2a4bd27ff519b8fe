#include "qrac/harness.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "qrac/distributional.hpp"
#include "qrac/rollout.hpp"

namespace qrac::harness {

namespace fs = std::filesystem;

double ExperimentConfig::resolved_solve_threshold() const {
    if (solve_threshold) return *solve_threshold;
    return envs::default_solve_threshold(env_id);
}

void ExperimentConfig::validate() const {
    auto fail = [](const char* field) {
        throw std::invalid_argument(std::string("invalid config field: ") + field);
    };
    if (total_updates < 0) fail("total_updates");
    if (eval_interval < 1) fail("eval_interval");
    if (eval_episodes < 1) fail("eval_episodes");
    if (chain_length < 1) fail("chain_length");
    if (run_label.empty()) fail("run_label");
    agent.validate();
    envs::default_solve_threshold(env_id); // throws on unknown env id
}

void apply_override(ExperimentConfig& config, const std::string& key, const std::string& value) {
    auto parse_long = [&](long& out) {
        std::size_t used = 0;
        out = std::stol(value, &used);
        if (used != value.size()) throw std::invalid_argument("bad value for " + key);
    };
    auto parse_int = [&](int& out) {
        long v;
        parse_long(v);
        out = static_cast<int>(v);
    };
    auto parse_double = [&](double& out) {
        std::size_t used = 0;
        out = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument("bad value for " + key);
    };
    auto parse_bool = [&](bool& out) {
        if (value == "true" || value == "1") {
            out = true;
        } else if (value == "false" || value == "0") {
            out = false;
        } else {
            throw std::invalid_argument("bad value for " + key);
        }
    };

    if (key == "algo") {
        config.agent.algo = agents::algo_from_string(value);
    } else if (key == "env") {
        config.env_id = value;
    } else if (key == "chain_length") {
        parse_int(config.chain_length);
    } else if (key == "total_updates") {
        parse_long(config.total_updates);
    } else if (key == "eval_interval") {
        parse_int(config.eval_interval);
    } else if (key == "eval_episodes") {
        parse_int(config.eval_episodes);
    } else if (key == "solve_threshold") {
        double v;
        parse_double(v);
        config.solve_threshold = v;
    } else if (key == "seed") {
        long v;
        parse_long(v);
        config.seed = static_cast<std::uint64_t>(v);
    } else if (key == "output_dir") {
        config.output_dir = value;
    } else if (key == "run_label") {
        config.run_label = value;
    } else if (key == "parallel_workers") {
        parse_bool(config.parallel_workers);
    } else if (key == "deterministic_timing") {
        parse_bool(config.deterministic_timing);
    } else if (key == "learning_rate") {
        parse_double(config.agent.learning_rate);
    } else if (key == "n_steps") {
        parse_int(config.agent.n_steps);
    } else if (key == "gamma") {
        parse_double(config.agent.gamma);
    } else if (key == "num_atoms") {
        parse_int(config.agent.num_atoms);
    } else if (key == "grad_clip") {
        parse_double(config.agent.grad_clip);
    } else if (key == "entropy_coef") {
        parse_double(config.agent.entropy_coef);
    } else if (key == "value_loss_coef") {
        parse_double(config.agent.value_loss_coef);
    } else if (key == "num_workers") {
        parse_int(config.agent.num_workers);
    } else if (key == "shared_trunk") {
        parse_bool(config.agent.shared_trunk);
    } else if (key == "kappa") {
        parse_double(config.agent.kappa);
    } else if (key == "epsilon_start") {
        parse_double(config.agent.epsilon_start);
    } else if (key == "epsilon_end") {
        parse_double(config.agent.epsilon_end);
    } else if (key == "epsilon_decay_steps") {
        parse_int(config.agent.epsilon_decay_steps);
    } else if (key == "replay_capacity") {
        parse_int(config.agent.replay_capacity);
    } else if (key == "batch_size") {
        parse_int(config.agent.batch_size);
    } else if (key == "target_sync_interval") {
        parse_int(config.agent.target_sync_interval);
    } else {
        throw std::invalid_argument("unknown config key: " + key);
    }
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    ExperimentConfig config;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
            if (blank) continue;
            throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                        ": expected key = value");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        apply_override(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return config;
}

std::string output_root() {
    if (const char* root = std::getenv("QRAC_OUTPUT_ROOT")) return root;
    return "runs";
}

namespace {

std::uint64_t eval_seed_base(std::uint64_t seed, long update_index) {
    return seed * 0x9e3779b97f4a7c15ull + static_cast<std::uint64_t>(update_index) * 131071u + 1u;
}

double run_greedy_episode(envs::Env& env, const std::function<int(std::span<const double>)>& policy,
                          std::uint64_t seed) {
    auto obs = env.reset(seed);
    double ret = 0.0;
    while (true) {
        const auto step = env.step(policy(obs));
        ret += step.reward;
        if (step.done || step.truncated) return ret;
        obs = step.observation;
    }
}

} // namespace

EvalStats evaluate_policy(const std::function<int(std::span<const double>)>& policy,
                          const std::string& env_id, int chain_length, int episodes,
                          std::uint64_t seed_base) {
    auto env = envs::make_env(env_id, seed_base, chain_length);
    std::vector<double> returns(static_cast<std::size_t>(episodes));
    for (int ep = 0; ep < episodes; ++ep) {
        returns[static_cast<std::size_t>(ep)] =
            run_greedy_episode(*env, policy, seed_base + static_cast<std::uint64_t>(ep));
    }
    EvalStats stats;
    for (double r : returns) stats.mean += r;
    stats.mean /= episodes;
    double var = 0.0;
    for (double r : returns) var += (r - stats.mean) * (r - stats.mean);
    stats.stddev = std::sqrt(var / episodes);
    return stats;
}

namespace {

class MetricsWriter {
  public:
    MetricsWriter(const std::string& path, const ExperimentConfig& config)
        : out_(path), config_(config), start_(std::chrono::steady_clock::now()) {
        if (!out_) throw std::runtime_error("cannot open metrics file: " + path);
        out_ << kMetricsHeader << "\n";
        out_.flush();
    }

    void row(long update, const EvalStats& stats) {
        double wallclock = 0.0;
        if (!config_.deterministic_timing) {
            wallclock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
                            .count();
        }
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%ld,%.6f,%.6f,%.3f,%s,%s,%d,%d,%llu", update, stats.mean,
                      stats.stddev, wallclock, agents::algo_name(config_.agent.algo).c_str(),
                      config_.env_id.c_str(), config_.agent.num_atoms,
                      config_.agent.shared_trunk ? 1 : 0,
                      static_cast<unsigned long long>(config_.seed));
        out_ << buf << "\n";
        out_.flush();
    }

  private:
    std::ofstream out_;
    const ExperimentConfig& config_;
    std::chrono::steady_clock::time_point start_;
};

struct RunState {
    RunResult result;
    MetricsWriter* metrics = nullptr;
    const ExperimentConfig* config = nullptr;

    void record_eval(long update, const EvalStats& stats) {
        metrics->row(update, stats);
        if (!result.first_solve_update &&
            stats.mean >= config->resolved_solve_threshold()) {
            result.first_solve_update = update;
        }
        result.final_mean_test_reward = stats.mean;
        result.final_stddev_test_reward = stats.stddev;
    }
};

void run_actor_critic(const ExperimentConfig& config, RunState& state,
                      nn::ParameterSet& params_out) {
    const auto& agent_cfg = config.agent;
    rollout::WorkerPool pool(config.env_id, agent_cfg.num_workers, config.seed,
                             config.chain_length);
    const auto& env_spec = pool.env_spec();
    Rng init_rng(config.seed ^ 0xa5a5a5a5a5a5a5a5ull);
    agents::ActorCriticNetwork net = make_actor_critic(
        env_spec.observation_width, env_spec.action_count, agent_cfg, init_rng);
    nn::AdamState adam = nn::make_adam_state(net.params);

    const rollout::PolicyFn policy = [&net](std::span<const double> obs, Rng& rng) {
        return agents::sample_action(net, obs, rng);
    };
    const rollout::SegmentGradFn grad_fn = [&](const rollout::RolloutSegment& segment) {
        if (agent_cfg.algo == agents::Algo::A2C) {
            const auto returns = agents::segment_returns(net, segment, agent_cfg.gamma);
            auto loss = agents::a2c_loss(net, segment, returns, agent_cfg);
            return std::make_pair(loss.loss, std::move(loss.grads));
        }
        const auto targets =
            agents::segment_distributional_targets(net, segment, agent_cfg.gamma);
        auto loss = agents::qr_a2c_loss(net, segment, targets, agent_cfg);
        return std::make_pair(loss.loss, std::move(loss.grads));
    };

    for (long update = 1; update <= config.total_updates; ++update) {
        const auto segments =
            pool.collect(policy, agent_cfg.n_steps, config.parallel_workers);
        rollout::synchronous_update(segments, grad_fn, net.params, adam, agent_cfg.grad_clip,
                                    agent_cfg.learning_rate);
        if (update % config.eval_interval == 0) {
            const auto stats = evaluate_policy(
                [&net](std::span<const double> obs) { return agents::greedy_action(net, obs); },
                config.env_id, config.chain_length, config.eval_episodes,
                eval_seed_base(config.seed, update));
            state.record_eval(update, stats);
        }
    }
    params_out = std::move(net.params);
}

void run_qr_dqn(const ExperimentConfig& config, RunState& state, nn::ParameterSet& params_out) {
    const auto& agent_cfg = config.agent;
    auto env = envs::make_env(config.env_id, config.seed, config.chain_length);
    const auto& env_spec = env->spec();
    Rng init_rng(config.seed ^ 0xa5a5a5a5a5a5a5a5ull);
    agents::QrDqnNetwork online = agents::make_qr_dqn(
        env_spec.observation_width, env_spec.action_count, agent_cfg.num_atoms, init_rng);
    agents::QrDqnNetwork target = online;
    nn::AdamState adam = nn::make_adam_state(online.params);
    agents::ReplayBuffer replay(agent_cfg.replay_capacity);
    Rng act_rng(config.seed ^ 0x5c5c5c5c5c5c5c5cull);
    Rng sample_rng(config.seed ^ 0x3c3c3c3c3c3c3c3cull);

    auto obs = env->reset();
    long env_steps = 0;
    for (long update = 1; update <= config.total_updates; ++update) {
        for (int s = 0; s < agent_cfg.n_steps; ++s) {
            const double frac =
                std::min(1.0, static_cast<double>(env_steps) / agent_cfg.epsilon_decay_steps);
            const double eps = agent_cfg.epsilon_start +
                               frac * (agent_cfg.epsilon_end - agent_cfg.epsilon_start);
            const int action = agents::qr_dqn_act(online, obs, eps, act_rng);
            const auto step = env->step(action);
            replay.add({obs, action, step.reward, step.observation, step.done});
            ++env_steps;
            if (step.done || step.truncated) {
                obs = env->reset();
            } else {
                obs = step.observation;
            }
        }
        if (replay.size() >= static_cast<std::size_t>(agent_cfg.batch_size)) {
            const auto batch = replay.sample(agent_cfg.batch_size, sample_rng);
            auto loss = agents::qr_dqn_update(online, target, batch, agent_cfg.gamma,
                                              agent_cfg.kappa);
            if (!nn::all_finite(loss.grads)) throw std::runtime_error("non-finite gradient");
            nn::clip_global_norm(loss.grads, agent_cfg.grad_clip);
            nn::adam_step(online.params, loss.grads, adam, agent_cfg.learning_rate);
        }
        if (update % agent_cfg.target_sync_interval == 0) target.params = online.params;
        if (update % config.eval_interval == 0) {
            Rng greedy_rng(0); // unused at epsilon = 0
            const auto stats = evaluate_policy(
                [&](std::span<const double> o) {
                    return agents::qr_dqn_act(online, o, 0.0, greedy_rng);
                },
                config.env_id, config.chain_length, config.eval_episodes,
                eval_seed_base(config.seed, update));
            state.record_eval(update, stats);
        }
    }
    params_out = std::move(online.params);
}

} // namespace

RunResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    const std::string run_dir =
        config.output_dir.empty() ? output_root() + "/" + config.run_label : config.output_dir;
    fs::create_directories(run_dir);

    RunState state;
    state.config = &config;
    state.result.run_dir = run_dir;
    state.result.metrics_path = run_dir + "/metrics.csv";
    state.result.params_path = run_dir + "/params.qrps";

    MetricsWriter metrics(state.result.metrics_path, config);
    state.metrics = &metrics;

    nn::ParameterSet final_params;
    if (config.agent.algo == agents::Algo::QrDqn) {
        run_qr_dqn(config, state, final_params);
    } else {
        run_actor_critic(config, state, final_params);
    }
    save_parameters(final_params, state.result.params_path);
    return state.result;
}

EvalStats evaluate_snapshot(const ExperimentConfig& config, const std::string& params_path,
                            int episodes, std::uint64_t seed) {
    auto env = envs::make_env(config.env_id, seed, config.chain_length);
    const auto& env_spec = env->spec();
    nn::ParameterSet params = load_parameters(params_path);
    if (config.agent.algo == agents::Algo::QrDqn) {
        Rng rng(0);
        agents::QrDqnNetwork net = agents::make_qr_dqn(
            env_spec.observation_width, env_spec.action_count, config.agent.num_atoms, rng);
        net.params = std::move(params);
        Rng greedy_rng(0);
        return evaluate_policy(
            [&](std::span<const double> o) { return agents::qr_dqn_act(net, o, 0.0, greedy_rng); },
            config.env_id, config.chain_length, episodes, eval_seed_base(seed, 0));
    }
    Rng rng(0);
    agents::ActorCriticNetwork net = agents::make_actor_critic(
        env_spec.observation_width, env_spec.action_count, config.agent, rng);
    net.params = std::move(params);
    return evaluate_policy(
        [&](std::span<const double> o) { return agents::greedy_action(net, o); }, config.env_id,
        config.chain_length, episodes, eval_seed_base(seed, 0));
}

// --- plotting ---

namespace {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

std::string series_label(const std::string& path) {
    fs::path p(path);
    std::string stem = p.stem().string();
    if (stem == "metrics" && p.has_parent_path()) {
        return p.parent_path().filename().string();
    }
    return stem;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    return fields;
}

Series load_series(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open metrics CSV: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty metrics CSV: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto expected = split_csv(kMetricsHeader);
    const auto got = split_csv(line);
    for (std::size_t i = 0; i < std::max(expected.size(), got.size()); ++i) {
        const std::string want = i < expected.size() ? expected[i] : "<none>";
        const std::string have = i < got.size() ? got[i] : "<none>";
        if (want != have) {
            throw std::runtime_error("metrics schema mismatch in " + path + ": column " +
                                     std::to_string(i + 1) + " is '" + have + "', expected '" +
                                     want + "'");
        }
    }
    Series series;
    series.label = series_label(path);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_csv(line);
        series.x.push_back(std::stod(fields[0]));
        series.y.push_back(std::stod(fields[1]));
    }
    return series;
}

constexpr double kPlotX0 = 60.0;
constexpr double kPlotY0 = 20.0;
constexpr double kPlotW = 560.0;
constexpr double kPlotH = 400.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

} // namespace

void emit_plot(const std::vector<std::string>& csv_paths, const std::string& out_path) {
    if (csv_paths.empty()) throw std::invalid_argument("emit_plot needs at least one CSV");
    std::vector<Series> series;
    series.reserve(csv_paths.size());
    for (const auto& path : csv_paths) series.push_back(load_series(path));

    double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
    bool first = true;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (first) {
                xmin = xmax = s.x[i];
                ymin = ymax = s.y[i];
                first = false;
            }
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    }
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) ymax = ymin + 1.0;

    auto px = [&](double x) { return kPlotX0 + (x - xmin) / (xmax - xmin) * kPlotW; };
    auto py = [&](double y) { return kPlotY0 + (1.0 - (y - ymin) / (ymax - ymin)) * kPlotH; };

    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write SVG: " + out_path);
    char buf[256];
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
           "viewBox=\"0 0 640 480\">\n";
    out << "<rect x=\"0\" y=\"0\" width=\"640\" height=\"480\" fill=\"white\"/>\n";
    out << "<line x1=\"60\" y1=\"420\" x2=\"620\" y2=\"420\" stroke=\"black\"/>\n";
    out << "<line x1=\"60\" y1=\"20\" x2=\"60\" y2=\"420\" stroke=\"black\"/>\n";
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"60\" y=\"438\" font-size=\"12\">%g</text>"
                  "<text x=\"620\" y=\"438\" font-size=\"12\" text-anchor=\"end\">%g</text>\n",
                  xmin, xmax);
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"55\" y=\"420\" font-size=\"12\" text-anchor=\"end\">%g</text>"
                  "<text x=\"55\" y=\"28\" font-size=\"12\" text-anchor=\"end\">%g</text>\n",
                  ymin, ymax);
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"340\" y=\"460\" font-size=\"12\" text-anchor=\"middle\">update"
                  "</text>\n");
    out << buf;
    for (std::size_t si = 0; si < series.size(); ++si) {
        const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < series[si].x.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px(series[si].x[i]),
                          py(series[si].y[i]));
            out << buf;
        }
        out << "\"/>\n";
        const double ly = 34.0 + 16.0 * static_cast<double>(si);
        std::snprintf(buf, sizeof(buf),
                      "<rect x=\"70\" y=\"%.0f\" width=\"10\" height=\"10\" fill=\"%s\"/>"
                      "<text x=\"84\" y=\"%.0f\" font-size=\"12\">%s</text>\n",
                      ly - 9.0, color, ly, series[si].label.c_str());
        out << buf;
    }
    out << "</svg>\n";
}

// --- snapshots ---

static_assert(std::endian::native == std::endian::little,
              "snapshot format assumes a little-endian host");

void save_parameters(const nn::ParameterSet& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write snapshot: " + path);
    out.write("QRPS", 4);
    const std::uint32_t version = 1;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::uint32_t layer_count = static_cast<std::uint32_t>(params.layers.size());
    out.write(reinterpret_cast<const char*>(&layer_count), sizeof(layer_count));
    for (const auto& layer : params.layers) {
        const std::uint32_t in = static_cast<std::uint32_t>(layer.in);
        const std::uint32_t out_w = static_cast<std::uint32_t>(layer.out);
        const std::uint8_t act = static_cast<std::uint8_t>(layer.activation);
        out.write(reinterpret_cast<const char*>(&in), sizeof(in));
        out.write(reinterpret_cast<const char*>(&out_w), sizeof(out_w));
        out.write(reinterpret_cast<const char*>(&act), sizeof(act));
        out.write(reinterpret_cast<const char*>(layer.weights.data()),
                  static_cast<std::streamsize>(layer.weights.size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(layer.bias.data()),
                  static_cast<std::streamsize>(layer.bias.size() * sizeof(double)));
    }
}

nn::ParameterSet load_parameters(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open snapshot: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "QRPS") {
        throw std::runtime_error("bad snapshot magic in " + path);
    }
    std::uint32_t version = 0, layer_count = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(&layer_count), sizeof(layer_count));
    if (version != 1) throw std::runtime_error("unsupported snapshot version in " + path);
    nn::ParameterSet params;
    params.layers.resize(layer_count);
    for (auto& layer : params.layers) {
        std::uint32_t in_w = 0, out_w = 0;
        std::uint8_t act = 0;
        in.read(reinterpret_cast<char*>(&in_w), sizeof(in_w));
        in.read(reinterpret_cast<char*>(&out_w), sizeof(out_w));
        in.read(reinterpret_cast<char*>(&act), sizeof(act));
        layer.in = static_cast<int>(in_w);
        layer.out = static_cast<int>(out_w);
        layer.activation = static_cast<nn::Activation>(act);
        layer.weights.resize(static_cast<std::size_t>(in_w) * out_w);
        layer.bias.resize(out_w);
        in.read(reinterpret_cast<char*>(layer.weights.data()),
                static_cast<std::streamsize>(layer.weights.size() * sizeof(double)));
        in.read(reinterpret_cast<char*>(layer.bias.data()),
                static_cast<std::streamsize>(layer.bias.size() * sizeof(double)));
        if (!in) throw std::runtime_error("truncated snapshot: " + path);
    }
    return params;
}

} // namespace qrac::harness
