#include "rmt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace rmt {

namespace {

// Joint snapshot of policy data so a failed step can roll back bit-exactly.
std::map<std::string, std::vector<double>> snapshot(const ParamMap& params) {
    std::map<std::string, std::vector<double>> out;
    for (const auto& [name, t] : params) out[name] = t.data();
    return out;
}

void restore(ParamMap& params, const std::map<std::string, std::vector<double>>& snap) {
    for (auto& [name, t] : params) t.mutable_data() = snap.at(name);
}

}  // namespace

std::string TrainStepReport::to_json() const {
    nlohmann::json j;
    j["step"] = step;
    j["rl_loss"] = rl_loss;
    j["ntp_loss"] = ntp_loss;
    j["combined_loss"] = combined_loss;
    j["mean_reasoning_len"] = mean_reasoning_len;
    j["max_reasoning_len"] = max_reasoning_len;
    j["mean_match_rate"] = mean_match_rate;
    j["mean_kl"] = mean_kl;
    j["bucket_counts"] = {bucket_counts[0], bucket_counts[1], bucket_counts[2]};
    j["budget"] = budget;
    j["curriculum"] = {curriculum[0], curriculum[1], curriculum[2]};
    j["committed"] = committed;
    if (!error.empty()) j["error"] = error;
    return j.dump();
}

std::vector<double> compute_advantages(const std::vector<double>& rewards,
                                       double delta) {
    if (rewards.size() < 2)
        throw std::invalid_argument("compute_advantages: need at least 2 rewards");
    const double n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= n;  // population std, matching the group definition
    const double sd = std::sqrt(var);
    std::vector<double> out(rewards.size());
    for (std::size_t i = 0; i < rewards.size(); ++i)
        out[i] = (rewards[i] - mean) / (sd + delta);
    return out;
}

RlLossResult rl_loss(const Model& policy, const Model& reference,
                     const std::vector<RolloutGroup>& groups, double beta) {
    if (groups.empty()) throw std::invalid_argument("rl_loss: no rollout groups");
    RlLossResult result;
    Tensor objective = Tensor::scalar(0.0);
    std::size_t kl_terms = 0;
    double kl_accum = 0.0;
    for (const auto& group : groups) {
        Tensor group_term = Tensor::scalar(0.0);
        for (const auto& s : group.samples) {
            // One policy forward per sample serves both the log-likelihood
            // and the KL term.
            if (s.advantage == 0.0 && beta == 0.0) continue;
            TokenSeq full = group.prompt;
            full.insert(full.end(), s.tokens.begin(), s.tokens.end());
            Tensor rows = slice_rows(policy.forward(full), group.prompt.size() - 1,
                                     full.size() - 1);
            Tensor lp = log_softmax_rows(rows);
            Tensor term = Tensor::scalar(0.0);
            if (s.advantage != 0.0)
                term = scale(sum(gather_rows(lp, s.tokens)), s.advantage);
            if (beta != 0.0) {
                Tensor ref_rows = slice_rows(reference.forward(full),
                                             group.prompt.size() - 1, full.size() - 1);
                Tensor ref_lp_const(ref_rows.shape(),
                                    log_softmax_rows(ref_rows).data(), false);
                Tensor kl = scale(sum(mul(softmax_rows(rows), sub(lp, ref_lp_const))),
                                  1.0 / static_cast<double>(s.tokens.size()));
                kl_accum += kl.item();
                ++kl_terms;
                term = sub(term, scale(kl, beta));
            }
            group_term = add(group_term, term);
        }
        objective = add(objective,
                        scale(group_term, 1.0 / static_cast<double>(group.samples.size())));
    }
    objective = scale(objective, 1.0 / static_cast<double>(groups.size()));
    result.loss = scale(objective, -1.0);
    if (!all_finite(result.loss))
        throw std::runtime_error("rl_loss: non-finite loss value");
    result.mean_kl = kl_terms ? kl_accum / static_cast<double>(kl_terms) : 0.0;
    return result;
}

NtpLossResult ntp_loss(const Model& policy,
                       const std::vector<const TokenSeq*>& batch,
                       const std::vector<std::vector<bool>>& masks) {
    if (batch.size() != masks.size())
        throw std::invalid_argument("ntp_loss: batch/mask size mismatch");
    NtpLossResult result;
    Tensor total = Tensor::scalar(0.0);
    std::size_t count = 0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const TokenSeq& seq = *batch[b];
        const auto& mask = masks[b];
        if (mask.size() != seq.size())
            throw std::invalid_argument("ntp_loss: mask length mismatch for sequence " +
                                        std::to_string(b));
        TokenSeq targets(seq.begin() + 1, seq.end());
        std::vector<double> mask_vals(targets.size());
        std::size_t unmasked = 0;
        for (std::size_t pos = 1; pos < seq.size(); ++pos) {
            mask_vals[pos - 1] = mask[pos] ? 1.0 : 0.0;
            if (mask[pos]) ++unmasked;
        }
        if (unmasked == 0) continue;
        Tensor logits = policy.forward(seq);
        Tensor rows = slice_rows(logits, 0, seq.size() - 1);
        Tensor per_pos = gather_rows(log_softmax_rows(rows), targets);
        Tensor mask_const({targets.size()}, std::move(mask_vals), false);
        total = sub(total, sum(mul(per_pos, mask_const)));
        count += unmasked;
    }
    result.unmasked_positions = count;
    if (count == 0) {
        result.loss = Tensor::scalar(0.0);
        return result;
    }
    result.loss = scale(total, 1.0 / static_cast<double>(count));
    if (!all_finite(result.loss))
        throw std::runtime_error("ntp_loss: non-finite loss value");
    return result;
}

Trainer::Trainer(RunConfig config, const Vocab& vocab, TokenCorpus train_corpus)
    : cfg_(std::move(config)),
      vocab_(vocab),
      corpus_(std::move(train_corpus)),
      optimizer_([&] {
          AdamOptimizer::Options o;
          o.learning_rate = cfg_.learning_rate;
          return o;
      }()) {
    std::mt19937_64 rng(derive_seed(cfg_.seed, "model-init", 0));
    policy_ = Model(cfg_.model_config(vocab_.size()), rng, /*requires_grad=*/true);
    if (!cfg_.init_checkpoint.empty()) {
        Model base = Model::load(cfg_.init_checkpoint, /*requires_grad=*/false);
        if (base.config().vocab_size != policy_.config().vocab_size ||
            base.config().context_length != policy_.config().context_length ||
            base.config().embed_dim != policy_.config().embed_dim ||
            base.config().num_layers != policy_.config().num_layers ||
            base.config().num_heads != policy_.config().num_heads)
            throw std::runtime_error("trainer: init_checkpoint config mismatch");
        for (auto& [name, p] : policy_.params())
            p.mutable_data() = base.params().at(name).data();
    }
    reference_ = policy_.clone(/*requires_grad=*/false);
}

void Trainer::prepare_partition() {
    EntropyProfile profile = profile_entropy(reference_, corpus_);
    DifficultyBuckets buckets = bucketize(profile, cfg_.q_easy, cfg_.q_hard);
    TokenPartition part = make_partition(buckets, cfg_.rho,
                                         derive_seed(cfg_.seed, "partition", 0));
    set_partition(std::move(buckets), std::move(part));
}

void Trainer::set_partition(DifficultyBuckets buckets, TokenPartition partition) {
    buckets_ = std::move(buckets);
    partition_ = std::move(partition);
    finalize_schedules();
}

void Trainer::finalize_schedules() {
    const std::size_t rl_total = partition_.rl.total();
    if (rl_total == 0)
        throw std::runtime_error("trainer: empty Phi_RL; corpus too small for rho");
    // T = epochs * ceil(|Phi_RL| / rl_tokens_per_step)
    const std::size_t steps_per_epoch =
        (rl_total + cfg_.rl_tokens_per_step - 1) / cfg_.rl_tokens_per_step;
    total_steps_ = static_cast<long>(cfg_.epochs * steps_per_epoch);

    budget_sched_.initial_budget = cfg_.initial_budget;
    budget_sched_.min_budget = cfg_.min_budget;
    budget_sched_.decay = cfg_.budget_decay;
    budget_sched_.total_steps = total_steps_;
    budget_sched_.max_reward = cfg_.max_length_reward;

    curriculum_sched_.start = cfg_.curriculum_start;
    curriculum_sched_.end = cfg_.curriculum_end;
    curriculum_sched_.t1 = static_cast<long>(std::floor(cfg_.t1_fraction * total_steps_));
    curriculum_sched_.t2 = static_cast<long>(std::floor(cfg_.t2_fraction * total_steps_));
    curriculum_sched_.total_steps = total_steps_;
    if (curriculum_sched_.t1 < 1) curriculum_sched_.t1 = 1;
    if (curriculum_sched_.t2 <= curriculum_sched_.t1)
        curriculum_sched_.t2 = curriculum_sched_.t1 + 1;
}

TokenSeq Trainer::prompt_for(const Position& target, long budget) const {
    const TokenSeq& seq = corpus_.sequences[target.seq];
    const std::size_t keep = std::min<std::size_t>(cfg_.prompt_context_window, target.pos);
    TokenSeq context(seq.begin() + static_cast<std::ptrdiff_t>(target.pos - keep),
                     seq.begin() + static_cast<std::ptrdiff_t>(target.pos));
    return build_prompt(vocab_, context, budget);
}

RolloutGroup Trainer::generate_rollouts(const Position& target, long budget,
                                        std::uint64_t seed) const {
    if (target.pos < 1)
        throw std::invalid_argument("generate_rollouts: position must be >= 1");
    RolloutGroup group;
    group.target = target;
    group.ground_truth = corpus_.sequences[target.seq][target.pos];
    group.budget = budget;
    group.prompt = prompt_for(target, budget);

    // Keep the whole rollout inside the attention window so sampling-time
    // probabilities match the teacher-forced pass used by the loss.
    const std::size_t window = cfg_.context_length;
    if (group.prompt.size() + 2 > window)
        throw std::runtime_error("generate_rollouts: prompt does not fit context window");
    const std::size_t room = window - group.prompt.size();
    const std::size_t max_new =
        std::min<std::size_t>(static_cast<std::size_t>(2 * budget) + cfg_.rollout_margin, room);

    std::mt19937_64 seed_rng(seed);
    for (std::size_t i = 0; i < cfg_.group_size; ++i) {
        SampleOptions opts;
        opts.max_new_tokens = max_new;
        opts.temperature = cfg_.temperature;
        opts.seed = seed_rng();
        RolloutSample s;
        s.tokens = sample_response(policy_, group.prompt, opts);
        s.parsed = parse_response(s.tokens);
        const bool match = s.parsed.well_formed && !s.parsed.prediction.empty() &&
                           s.parsed.prediction.front() == group.ground_truth;
        s.match_reward = match ? 1.0 : 0.0;
        s.length_reward =
            length_reward(s.parsed.reasoning_length, budget, cfg_.max_length_reward);
        const double w = cfg_.disable_dtb ? 0.0 : cfg_.reward_weight;
        s.composite_reward = (1.0 - w) * s.match_reward + w * s.length_reward;
        group.samples.push_back(std::move(s));
    }
    std::vector<double> rewards;
    rewards.reserve(group.samples.size());
    for (const auto& s : group.samples) rewards.push_back(s.composite_reward);
    const std::vector<double> adv = compute_advantages(rewards, cfg_.advantage_eps);
    for (std::size_t i = 0; i < adv.size(); ++i) group.samples[i].advantage = adv[i];
    return group;
}

TrainStepReport Trainer::train_step(long t) {
    if (t >= total_steps_)
        throw std::invalid_argument("train_step: step " + std::to_string(t) +
                                    " >= total steps " + std::to_string(total_steps_));
    TrainStepReport report;
    report.step = t;
    report.budget = cfg_.disable_dtb ? cfg_.initial_budget : budget_at(budget_sched_, t);
    report.curriculum = cfg_.disable_cas ? DifficultyDist{1.0 / 3, 1.0 / 3, 1.0 / 3}
                                         : curriculum_at(curriculum_sched_, t);

    const auto snap = snapshot(policy_.params());
    try {
        // --- select RL targets ---
        std::vector<Position> targets =
            sample_batch(partition_.rl, report.curriculum,
                         std::min(cfg_.rl_tokens_per_step, partition_.rl.total()),
                         derive_seed(cfg_.seed, "sample-batch", static_cast<std::uint64_t>(t)));
        for (const Position& pos : targets)
            for (int d = 0; d < 3; ++d) {
                const auto& pool = partition_.rl.by_difficulty[d];
                if (std::binary_search(pool.begin(), pool.end(), pos)) {
                    ++report.bucket_counts[d];
                    break;
                }
            }

        // --- rollouts and rewards ---
        std::vector<RolloutGroup> groups;
        groups.reserve(targets.size());
        std::uint64_t rollout_salt = 0;
        double len_sum = 0.0, len_max = 0.0, match_sum = 0.0;
        for (const Position& pos : targets) {
            RolloutGroup g = generate_rollouts(
                pos, report.budget,
                derive_seed(cfg_.seed, "rollout", static_cast<std::uint64_t>(t) * 1000003ull +
                                                      rollout_salt++));
            for (const auto& s : g.samples) {
                len_sum += static_cast<double>(s.parsed.reasoning_length);
                len_max = std::max(len_max, static_cast<double>(s.parsed.reasoning_length));
                match_sum += s.match_reward;
            }
            groups.push_back(std::move(g));
        }
        const double n_samples = static_cast<double>(targets.size() * cfg_.group_size);
        report.mean_reasoning_len = len_sum / n_samples;
        report.max_reasoning_len = len_max;
        report.mean_match_rate = match_sum / n_samples;

        // --- RL loss ---
        for (auto& [name, p] : policy_.params()) p.zero_grad();
        RlLossResult rl = rl_loss(policy_, reference_, groups, cfg_.kl_weight);
        report.rl_loss = rl.loss.item();
        report.mean_kl = rl.mean_kl;

        // --- NTP batch with current-step masking ---
        Tensor combined = rl.loss;
        last_rl_positions_.clear();
        last_ntp_positions_.clear();
        for (const auto& g : groups) last_rl_positions_.push_back(g.target);
        const double lambda = cfg_.disable_ntp ? 0.0 : cfg_.ntp_weight;
        if (lambda != 0.0) {
            std::mt19937_64 ntp_rng(derive_seed(cfg_.seed, "ntp-batch",
                                                static_cast<std::uint64_t>(t)));
            std::vector<const TokenSeq*> batch;
            std::vector<std::vector<bool>> masks;
            std::vector<std::size_t> chosen_seqs;
            const std::size_t n_batch = std::min(cfg_.ntp_batch_size, corpus_.sequences.size());
            std::vector<std::size_t> idx(corpus_.sequences.size());
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
            std::shuffle(idx.begin(), idx.end(), ntp_rng);
            idx.resize(n_batch);
            std::sort(idx.begin(), idx.end());
            for (std::size_t s : idx) {
                const TokenSeq& seq = corpus_.sequences[s];
                std::vector<bool> mask(seq.size(), true);
                mask[0] = false;  // no target at position 0
                for (const Position& c : last_rl_positions_)
                    if (c.seq == s && c.pos < mask.size()) mask[c.pos] = false;
                for (std::size_t pos = 1; pos < seq.size(); ++pos)
                    if (mask[pos]) last_ntp_positions_.push_back({s, pos});
                batch.push_back(&seq);
                masks.push_back(std::move(mask));
            }
            NtpLossResult ntp = ntp_loss(policy_, batch, masks);
            if (ntp.unmasked_positions == 0)
                report.error = "warning: NTP batch fully masked";
            report.ntp_loss = ntp.loss.item();
            combined = add(combined, scale(ntp.loss, lambda));
        }
        report.combined_loss = report.rl_loss + lambda * report.ntp_loss;

        // --- one joint optimizer step ---
        backward(combined);
        if (!optimizer_.step(policy_.params())) {
            restore(policy_.params(), snap);
            report.committed = false;
            report.error = optimizer_.last_error();
        }
    } catch (const std::exception& e) {
        restore(policy_.params(), snap);
        report.committed = false;
        report.error = e.what();
    }
    return report;
}

void Trainer::save_state(const std::string& path, long next_step) const {
    ParamMap all;
    for (const auto& [name, t] : policy_.params()) all[name] = t;
    auto& opt = const_cast<AdamOptimizer&>(optimizer_);
    for (const auto& [name, m] : opt.moment1()) {
        const auto& shape = policy_.params().at(name).shape();
        all["adam.m." + name] = Tensor(shape, m, false);
    }
    for (const auto& [name, v] : opt.moment2()) {
        const auto& shape = policy_.params().at(name).shape();
        all["adam.v." + name] = Tensor(shape, v, false);
    }
    std::ostringstream extra;
    extra << "next_step=" << next_step << "\n"
          << "opt_step=" << optimizer_.step_count() << "\n";
    save_checkpoint(path, policy_.config().to_header() + extra.str(), all);
}

long Trainer::load_state(const std::string& path) {
    Checkpoint ckpt = load_checkpoint(path, false);
    const ModelConfig cfg = ModelConfig::from_header(ckpt.header);
    if (cfg.vocab_size != policy_.config().vocab_size)
        throw std::runtime_error("load_state: vocab size mismatch");
    long next_step = 0;
    std::int64_t opt_step = 0;
    std::istringstream is(ckpt.header);
    std::string line;
    while (std::getline(is, line)) {
        if (line.rfind("next_step=", 0) == 0) next_step = std::stol(line.substr(10));
        if (line.rfind("opt_step=", 0) == 0) opt_step = std::stoll(line.substr(9));
    }
    for (auto& [name, p] : policy_.params()) {
        auto it = ckpt.params.find(name);
        if (it == ckpt.params.end())
            throw std::runtime_error("load_state: missing parameter '" + name + "'");
        p.mutable_data() = it->second.data();
    }
    optimizer_.moment1().clear();
    optimizer_.moment2().clear();
    for (const auto& [name, t] : ckpt.params) {
        if (name.rfind("adam.m.", 0) == 0) optimizer_.moment1()[name.substr(7)] = t.data();
        if (name.rfind("adam.v.", 0) == 0) optimizer_.moment2()[name.substr(7)] = t.data();
    }
    optimizer_.set_step_count(opt_step);
    return next_step;
}

std::pair<TokenCorpus, TokenCorpus> split_corpus(const TokenCorpus& corpus,
                                                 double eval_fraction,
                                                 std::uint64_t seed) {
    std::vector<std::size_t> order(corpus.sequences.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n_eval = std::max<std::size_t>(
        1, static_cast<std::size_t>(eval_fraction * static_cast<double>(order.size())));
    TokenCorpus train, eval;
    for (std::size_t i = 0; i < order.size(); ++i) {
        auto& dst = i < n_eval ? eval : train;
        dst.sequences.push_back(corpus.sequences[order[i]]);
        dst.doc_ids.push_back(corpus.doc_ids[order[i]]);
    }
    return {std::move(train), std::move(eval)};
}

}  // namespace rmt
