#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rmt/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"RMT: reinforcement mid-training on a desk-scale language model"};
    app.require_subcommand(1);

    std::string config_path, checkpoint_path, resume_path, out_override;
    std::size_t position = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run config file")->required();
        cmd->add_option("--out", out_override, "override output directory");
    };

    CLI::App* profile = app.add_subcommand("profile", "entropy profile and difficulty buckets");
    add_common(profile);

    CLI::App* train = app.add_subcommand("train", "run the unified RL+NTP training loop");
    add_common(train);
    train->add_option("--resume", resume_path, "checkpoint to resume from");

    CLI::App* eval = app.add_subcommand("eval", "accuracy by difficulty bucket on held-out data");
    add_common(eval);
    eval->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();

    CLI::App* inspect = app.add_subcommand("inspect", "dump one rollout group");
    add_common(inspect);
    inspect->add_option("--checkpoint", checkpoint_path, "trainer checkpoint (optional)");
    inspect->add_option("--position", position, "flat eligible-position index")->required();

    CLI11_PARSE(app, argc, argv);

    rmt::RunConfig cfg;
    try {
        cfg = rmt::RunConfig::parse_file(config_path);
        if (!out_override.empty()) cfg.out_dir = out_override;
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (profile->parsed()) return rmt::run_profile(cfg);
        if (train->parsed()) return rmt::run_train(cfg, resume_path);
        if (eval->parsed()) return rmt::run_eval(cfg, checkpoint_path);
        if (inspect->parsed()) return rmt::run_inspect(cfg, checkpoint_path, position);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
