#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "rmt/config.hpp"
#include "rmt/corpus.hpp"
#include "rmt/entropy.hpp"
#include "rmt/model.hpp"
#include "rmt/optim.hpp"
#include "rmt/schedule.hpp"

namespace rmt {

struct RolloutSample {
    TokenSeq tokens;           // raw generation, including <eor> if emitted
    ParsedResponse parsed;
    double match_reward = 0.0;   // 1 iff first prediction token == target
    double length_reward = 0.0;
    double composite_reward = 0.0;
    double advantage = 0.0;
    std::vector<double> log_probs;  // per-token, under the sampling policy
};

struct RolloutGroup {
    Position target;
    TokenId ground_truth = 0;
    long budget = 0;
    TokenSeq prompt;
    std::vector<RolloutSample> samples;  // exactly G
};

struct TrainStepReport {
    long step = 0;
    double rl_loss = 0.0;
    double ntp_loss = 0.0;
    double combined_loss = 0.0;
    double mean_reasoning_len = 0.0;
    double max_reasoning_len = 0.0;
    double mean_match_rate = 0.0;
    double mean_kl = 0.0;
    std::array<std::size_t, 3> bucket_counts = {0, 0, 0};  // realized sampling
    long budget = 0;
    DifficultyDist curriculum = {0, 0, 0};
    bool committed = true;      // false when the optimizer rejected the step
    std::string error;

    std::string to_json() const;
};

// A_i = (r_i - mean) / (std + delta), population standard deviation.
std::vector<double> compute_advantages(const std::vector<double>& rewards,
                                       double delta);

// Differentiable RL loss over rollout groups (negated objective):
//   -(1/M) sum_groups (1/G) sum_i [ A_i * log pi(o_i | prompt) - beta * KL_i ]
// Advantages are constants; gradient flows through log pi and the KL only.
struct RlLossResult {
    Tensor loss;      // scalar
    double mean_kl = 0.0;
};
RlLossResult rl_loss(const Model& policy, const Model& reference,
                     const std::vector<RolloutGroup>& groups, double beta);

// Masked teacher-forced cross-entropy over a batch of sequences; positions
// in the current RL token set are excluded. Normalized by the unmasked
// count. A fully masked batch yields a detached zero with a warning flag.
struct NtpLossResult {
    Tensor loss;
    std::size_t unmasked_positions = 0;
};
NtpLossResult ntp_loss(const Model& policy,
                       const std::vector<const TokenSeq*>& batch,
                       const std::vector<std::vector<bool>>& masks);

class Trainer {
public:
    Trainer(RunConfig config, const Vocab& vocab, TokenCorpus train_corpus);

    // Precomputed via the frozen reference snapshot; must run before steps.
    void prepare_partition();
    void set_partition(DifficultyBuckets buckets, TokenPartition partition);

    long total_steps() const { return total_steps_; }
    const Model& policy() const { return policy_; }
    const Model& reference() const { return reference_; }
    const TokenPartition& partition() const { return partition_; }
    const DifficultyBuckets& buckets() const { return buckets_; }
    const BudgetSchedule& budget_schedule() const { return budget_sched_; }
    const CurriculumSchedule& curriculum_schedule() const { return curriculum_sched_; }

    RolloutGroup generate_rollouts(const Position& target, long budget,
                                   std::uint64_t seed) const;

    // One transactional training step: any failure leaves parameters and
    // optimizer state untouched and is reported in the step record.
    TrainStepReport train_step(long t);

    // Instrumentation for the mask-exclusivity property: positions that
    // contributed to each objective during the last committed step.
    const std::vector<Position>& last_rl_positions() const { return last_rl_positions_; }
    const std::vector<Position>& last_ntp_positions() const { return last_ntp_positions_; }

    void save_policy(const std::string& path) const { policy_.save(path); }
    void save_reference(const std::string& path) const { reference_.save(path); }

    // Full training state: policy parameters plus optimizer moments and the
    // next step index, so a resumed run continues bit-identically.
    void save_state(const std::string& path, long next_step) const;
    // Returns the next step index stored in the checkpoint.
    long load_state(const std::string& path);

private:
    RunConfig cfg_;
    const Vocab& vocab_;
    TokenCorpus corpus_;
    Model policy_;
    Model reference_;
    AdamOptimizer optimizer_;
    DifficultyBuckets buckets_;
    TokenPartition partition_;
    BudgetSchedule budget_sched_;
    CurriculumSchedule curriculum_sched_;
    long total_steps_ = 0;
    std::vector<Position> last_rl_positions_;
    std::vector<Position> last_ntp_positions_;

    void finalize_schedules();
    TokenSeq prompt_for(const Position& target, long budget) const;
};

// Splits a corpus into train/eval by sequence, deterministically by seed.
std::pair<TokenCorpus, TokenCorpus> split_corpus(const TokenCorpus& corpus,
                                                 double eval_fraction,
                                                 std::uint64_t seed);

}  // namespace rmt
