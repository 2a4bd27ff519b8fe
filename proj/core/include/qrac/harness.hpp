#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qrac/agents.hpp"
#include "qrac/envs.hpp"
#include "qrac/nn.hpp"

namespace qrac::harness {

struct ExperimentConfig {
    agents::AgentConfig agent;
    std::string env_id = "cartpole";
    int chain_length = 5;
    long total_updates = 1000;
    int eval_interval = 20;
    int eval_episodes = 20;
    std::optional<double> solve_threshold; // env-conventional bar when unset
    std::uint64_t seed = 0;
    std::string output_dir; // default: <output root>/<run_label>
    std::string run_label = "run";
    bool parallel_workers = false;
    // When set, the wallclock_s CSV column is written as 0.000 so re-runs of
    // the same config and seed are byte-identical.
    bool deterministic_timing = false;

    double resolved_solve_threshold() const;
    void validate() const;
};

// Flat key = value text file; '#' starts a comment. Unknown keys are startup
// errors naming the key.
ExperimentConfig load_config(const std::string& path);
void apply_override(ExperimentConfig& config, const std::string& key, const std::string& value);

struct EvalReport {
    long update_index = 0;
    double mean_test_reward = 0.0;
    double stddev_test_reward = 0.0;
    std::optional<long> first_solve_update;
};

// Mean/stddev of undiscounted returns of a deterministic policy over freshly
// seeded episodes.
struct EvalStats {
    double mean = 0.0;
    double stddev = 0.0;
};
EvalStats evaluate_policy(const std::function<int(std::span<const double>)>& policy,
                          const std::string& env_id, int chain_length, int episodes,
                          std::uint64_t seed_base);

inline constexpr const char* kMetricsHeader =
    "update,mean_test_reward,stddev_test_reward,wallclock_s,algo,env,atoms,shared,seed";

struct RunResult {
    std::optional<long> first_solve_update;
    double final_mean_test_reward = 0.0;
    double final_stddev_test_reward = 0.0;
    std::string run_dir;
    std::string metrics_path;
    std::string params_path;
};

// Full training run: total_updates synchronous updates with greedy evaluation
// every eval_interval updates, metrics appended to metrics.csv as they are
// produced, final parameters snapshotted to params.qrps.
RunResult run_experiment(const ExperimentConfig& config);

// Greedy evaluation of a parameter snapshot under the given config.
EvalStats evaluate_snapshot(const ExperimentConfig& config, const std::string& params_path,
                            int episodes, std::uint64_t seed);

// Learning-curve SVG: one polyline per CSV (x = update, y = mean test
// reward), legend from run labels. Plot area: x in [60, 620], y in [20, 420].
void emit_plot(const std::vector<std::string>& csv_paths, const std::string& out_path);

// Parameter snapshots: "QRPS" magic, u32 version, u32 layer count, then per
// layer u32 in/out widths, u8 activation, f64 weights and biases,
// little-endian throughout.
void save_parameters(const nn::ParameterSet& params, const std::string& path);
nn::ParameterSet load_parameters(const std::string& path);

// QRAC_OUTPUT_ROOT, or "runs" when unset.
std::string output_root();

} // namespace qrac::harness
