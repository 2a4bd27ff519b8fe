#include <cstdio>
#include <exception>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qrac/harness.hpp"

namespace {

using qrac::harness::ExperimentConfig;

struct Overrides {
    std::string config_path;
    std::vector<std::string> sets; // key=value pairs
};

ExperimentConfig resolve_config(const Overrides& overrides) {
    ExperimentConfig config;
    if (!overrides.config_path.empty()) {
        config = qrac::harness::load_config(overrides.config_path);
    }
    for (const auto& kv : overrides.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("expected key=value, got: " + kv);
        }
        qrac::harness::apply_override(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return config;
}

void add_common_overrides(CLI::App* cmd, Overrides& overrides) {
    cmd->add_option("--config", overrides.config_path, "flat key = value config file");
    auto push = [&overrides](const std::string& key) {
        return [&overrides, key](const std::string& value) {
            overrides.sets.push_back(key + "=" + value);
        };
    };
    cmd->add_option_function<std::string>("--algo", push("algo"), "a2c | qr_a2c | qr_dqn");
    cmd->add_option_function<std::string>("--env", push("env"),
                                          "cartpole | mountaincar | chainworld");
    cmd->add_option_function<std::string>("--seed", push("seed"), "global seed");
    cmd->add_option_function<std::string>("--atoms", push("num_atoms"), "critic atom count");
    cmd->add_option_function<std::string>("--updates", push("total_updates"), "total updates");
    cmd->add_option_function<std::string>("--workers", push("num_workers"), "worker count");
    cmd->add_option_function<std::string>("--shared", push("shared_trunk"),
                                          "share trunk (true/false)");
    cmd->add_option_function<std::string>("--lr", push("learning_rate"), "learning rate");
    cmd->add_option_function<std::string>("--n-steps", push("n_steps"), "segment length");
    cmd->add_option_function<std::string>("--out", push("output_dir"), "run directory");
    cmd->add_option_function<std::string>("--label", push("run_label"), "run label");
    cmd->add_option_function<std::string>(
        "--set", [&overrides](const std::string& kv) { overrides.sets.push_back(kv); },
        "extra key=value override (repeatable)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"distributional advantage actor-critic laboratory"};
    app.require_subcommand(1);

    Overrides train_over, eval_over, sweep_over;
    std::string eval_params;
    int eval_episodes = 20;
    std::vector<std::string> plot_inputs;
    std::string plot_out = "plot.svg";
    std::string sweep_atoms = "16,32,64,128";
    std::string sweep_shared = "both";
    int sweep_seeds = 1;

    auto* train = app.add_subcommand("train", "run a training experiment");
    add_common_overrides(train, train_over);

    auto* evaluate = app.add_subcommand("evaluate", "greedy-evaluate a parameter snapshot");
    add_common_overrides(evaluate, eval_over);
    evaluate->add_option("--params", eval_params, "snapshot file")->required();
    evaluate->add_option("--episodes", eval_episodes, "evaluation episodes");

    auto* plot = app.add_subcommand("plot", "render learning curves as SVG");
    plot->add_option("--out", plot_out, "output SVG path");
    plot->add_option("csvs", plot_inputs, "metrics CSV files")->required();

    auto* sweep = app.add_subcommand("sweep", "atom / shared-trunk grid of training runs");
    add_common_overrides(sweep, sweep_over);
    sweep->add_option("--sweep-atoms", sweep_atoms, "comma-separated atom counts");
    sweep->add_option("--sweep-shared", sweep_shared, "shared | nonshared | both");
    sweep->add_option("--sweep-seeds", sweep_seeds, "seeds per cell");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            const auto config = resolve_config(train_over);
            const auto result = qrac::harness::run_experiment(config);
            std::printf("run dir: %s\n", result.run_dir.c_str());
            std::printf("final mean/stddev test reward: %.2f / %.2f\n",
                        result.final_mean_test_reward, result.final_stddev_test_reward);
            if (result.first_solve_update) {
                std::printf("first solve at update %ld\n", *result.first_solve_update);
            } else {
                std::printf("not solved within %ld updates\n", config.total_updates);
            }
        } else if (evaluate->parsed()) {
            const auto config = resolve_config(eval_over);
            const auto stats = qrac::harness::evaluate_snapshot(config, eval_params,
                                                                eval_episodes, config.seed);
            std::printf("mean/stddev test reward over %d episodes: %.2f / %.2f\n", eval_episodes,
                        stats.mean, stats.stddev);
        } else if (plot->parsed()) {
            qrac::harness::emit_plot(plot_inputs, plot_out);
            std::printf("wrote %s\n", plot_out.c_str());
        } else if (sweep->parsed()) {
            std::vector<int> atom_counts;
            std::stringstream ss(sweep_atoms);
            std::string tok;
            while (std::getline(ss, tok, ',')) atom_counts.push_back(std::stoi(tok));
            std::vector<bool> shared_modes;
            if (sweep_shared == "shared" || sweep_shared == "both") shared_modes.push_back(true);
            if (sweep_shared == "nonshared" || sweep_shared == "both") {
                shared_modes.push_back(false);
            }
            if (shared_modes.empty()) throw std::invalid_argument("bad --sweep-shared value");

            std::vector<std::string> csvs;
            for (int atoms : atom_counts) {
                for (bool shared : shared_modes) {
                    for (int seed = 0; seed < sweep_seeds; ++seed) {
                        auto config = resolve_config(sweep_over);
                        config.agent.num_atoms = atoms;
                        config.agent.shared_trunk = shared;
                        config.seed = static_cast<std::uint64_t>(seed);
                        config.run_label = config.run_label + "_atoms" + std::to_string(atoms) +
                                           (shared ? "_shared" : "_nonshared") + "_seed" +
                                           std::to_string(seed);
                        config.output_dir.clear();
                        const auto result = qrac::harness::run_experiment(config);
                        std::printf("%s: final %.2f\n", config.run_label.c_str(),
                                    result.final_mean_test_reward);
                        csvs.push_back(result.metrics_path);
                    }
                }
            }
            const std::string svg = qrac::harness::output_root() + "/sweep.svg";
            qrac::harness::emit_plot(csvs, svg);
            std::printf("wrote %s\n", svg.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
