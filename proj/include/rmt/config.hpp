#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "rmt/model.hpp"

namespace rmt {

// Flat key = value run configuration. Unknown keys are rejected so typos
// surface at load time; every value is validated against its module's
// preconditions, and failures name the offending key.
struct RunConfig {
    // data
    std::string corpus_dir;
    std::string out_dir = "runs/default";
    double eval_fraction = 0.1;       // held-out share of sequences

    // Optional base-model checkpoint. When set, the policy starts from these
    // parameters and the frozen reference snapshot is taken from them too.
    std::string init_checkpoint;

    // model
    std::size_t context_length = 256;
    std::size_t embed_dim = 128;
    std::size_t num_layers = 2;
    std::size_t num_heads = 4;

    // budget schedule
    long initial_budget = 800;        // B0
    long min_budget = 1;              // B_min
    double budget_decay = 0.2;        // gamma
    double max_length_reward = 1.0;   // r_max

    // curriculum
    std::array<double, 3> curriculum_start = {0.6, 0.3, 0.1};
    std::array<double, 3> curriculum_end = {0.1, 0.3, 0.6};
    double t1_fraction = 0.3;
    double t2_fraction = 0.7;

    // entropy partition
    double q_easy = 0.33;
    double q_hard = 0.67;
    double rho = 0.05;

    // RL objective
    std::size_t group_size = 8;       // G
    double reward_weight = 0.2;       // w in Eq-style composite reward
    double kl_weight = 0.01;          // beta
    double ntp_weight = 0.1;          // lambda
    double advantage_eps = 1e-8;      // delta
    double temperature = 1.0;
    std::size_t prompt_context_window = 32;  // tokens of tau_<pos kept in the prompt
    std::size_t rollout_margin = 8;          // max_new = 2*B_t + margin

    // loop
    std::size_t rl_tokens_per_step = 128;
    std::size_t ntp_batch_size = 128;
    std::size_t epochs = 10;
    double learning_rate = 1e-6;
    std::uint64_t seed = 0;
    std::size_t checkpoint_every = 100;
    std::size_t eval_positions = 2000;

    // ablations
    bool disable_dtb = false;
    bool disable_cas = false;
    bool disable_ntp = false;

    ModelConfig model_config(std::size_t vocab_size) const;
    void validate() const;           // throws std::invalid_argument naming the key
    std::string serialize() const;   // every key, in a fixed order

    static RunConfig parse_file(const std::string& path);
    static RunConfig parse_text(const std::string& text);
};

// Stable seed derivation: FNV-1a 64 over (master seed, module name, step).
// Every module's randomness hangs off this, so single-module reruns are
// reproducible in isolation.
std::uint64_t derive_seed(std::uint64_t master, const std::string& module_name,
                          std::uint64_t step);

}  // namespace rmt
