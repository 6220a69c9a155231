#include "rmt/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rmt/entropy.hpp"
#include "rmt/eval.hpp"
#include "rmt/schedule.hpp"
#include "rmt/trainer.hpp"

namespace rmt {

namespace fs = std::filesystem;

namespace {

std::string read_all_documents(const std::string& dir) {
    if (!fs::is_directory(dir))
        throw std::runtime_error("corpus: not a directory: " + dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("corpus: no documents in " + dir);
    std::ostringstream buf;
    for (const auto& f : files) {
        std::ifstream is(f, std::ios::binary);
        buf << is.rdbuf();
    }
    return buf.str();
}

struct RunSetup {
    Vocab vocab;
    TokenCorpus train;
    TokenCorpus held_out;
};

RunSetup load_setup(const RunConfig& cfg) {
    RunSetup s{Vocab::from_text(read_all_documents(cfg.corpus_dir)), {}, {}};
    TokenCorpus full = load_corpus(cfg.corpus_dir, s.vocab, cfg.context_length);
    auto [train, eval] =
        split_corpus(full, cfg.eval_fraction, derive_seed(cfg.seed, "split", 0));
    s.train = std::move(train);
    s.held_out = std::move(eval);
    return s;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << text;
}

}  // namespace

Vocab build_vocab_from_dir(const std::string& dir) {
    return Vocab::from_text(read_all_documents(dir));
}

int run_profile(const RunConfig& cfg) {
    RunSetup setup = load_setup(cfg);
    fs::create_directories(cfg.out_dir);
    setup.vocab.save((fs::path(cfg.out_dir) / "vocab.txt").string());

    Trainer trainer(cfg, setup.vocab, setup.train);
    EntropyProfile profile = profile_entropy(trainer.reference(), setup.train);
    DifficultyBuckets buckets = bucketize(profile, cfg.q_easy, cfg.q_hard);

    save_profile((fs::path(cfg.out_dir) / "profile.bin").string(), profile);
    save_buckets_csv((fs::path(cfg.out_dir) / "buckets.csv").string(), profile, buckets);
    const std::string summary = histogram_summary(profile, buckets);
    write_text(fs::path(cfg.out_dir) / "histogram.txt", summary);
    std::cout << summary;
    return 0;
}

int run_train(const RunConfig& cfg, const std::string& resume_path) {
    RunSetup setup = load_setup(cfg);
    fs::create_directories(cfg.out_dir);
    setup.vocab.save((fs::path(cfg.out_dir) / "vocab.txt").string());
    write_text(fs::path(cfg.out_dir) / "config.resolved", cfg.serialize());

    Trainer trainer(cfg, setup.vocab, setup.train);
    trainer.prepare_partition();
    trainer.save_reference((fs::path(cfg.out_dir) / "ref.rmt1").string());

    long start_step = 0;
    if (!resume_path.empty()) start_step = trainer.load_state(resume_path);

    const fs::path metrics_path = fs::path(cfg.out_dir) / "metrics.jsonl";
    std::ofstream metrics(metrics_path,
                          start_step > 0 ? std::ios::app : std::ios::trunc);
    if (!metrics) throw std::runtime_error("cannot write " + metrics_path.string());

    const long total = trainer.total_steps();
    std::vector<TrainStepReport> tail;
    for (long t = start_step; t < total; ++t) {
        TrainStepReport report = trainer.train_step(t);
        metrics << report.to_json() << "\n";
        metrics.flush();
        if (!report.committed)
            std::cerr << "step " << t << " not committed: " << report.error << "\n";
        if ((t + 1) % static_cast<long>(cfg.checkpoint_every) == 0 || t + 1 == total)
            trainer.save_state(
                (fs::path(cfg.out_dir) / ("ckpt_" + std::to_string(t + 1) + ".rmt1")).string(),
                t + 1);
        if (t >= total - std::max<long>(1, total / 10)) tail.push_back(report);
        if (t % 50 == 0)
            std::cout << "step " << t << "/" << total << " L=" << report.combined_loss
                      << " match=" << report.mean_match_rate
                      << " len=" << report.mean_reasoning_len << " B=" << report.budget
                      << std::endl;
    }
    trainer.save_policy((fs::path(cfg.out_dir) / "policy_final.rmt1").string());

    // Summary over the last 10% of steps.
    double match = 0.0, len = 0.0;
    for (const auto& r : tail) {
        match += r.mean_match_rate;
        len += r.mean_reasoning_len;
    }
    if (!tail.empty()) {
        match /= static_cast<double>(tail.size());
        len /= static_cast<double>(tail.size());
    }
    std::cout << "final window (" << tail.size() << " steps): mean match rate " << match
              << ", mean reasoning length " << len << "\n";
    return 0;
}

int run_eval(const RunConfig& cfg, const std::string& checkpoint_path) {
    RunSetup setup = load_setup(cfg);
    Model policy = Model::load(checkpoint_path, false);
    if (policy.config().vocab_size != setup.vocab.size())
        throw std::runtime_error("eval: checkpoint vocab size " +
                                 std::to_string(policy.config().vocab_size) +
                                 " does not match corpus vocab " +
                                 std::to_string(setup.vocab.size()));

    // Reference snapshot for entropy bucketing of the held-out split.
    const fs::path ref_path = fs::path(cfg.out_dir) / "ref.rmt1";
    Model reference = fs::exists(ref_path)
        ? Model::load(ref_path.string(), false)
        : [&] {
              Trainer t(cfg, setup.vocab, setup.train);
              return t.reference().clone(false);
          }();

    EntropyProfile profile = profile_entropy(reference, setup.held_out);
    DifficultyBuckets buckets = bucketize(profile, cfg.q_easy, cfg.q_hard);

    BucketAccuracy ntp = evaluate_ntp(policy, buckets, setup.held_out);
    std::cout << ntp.to_string("NTP (greedy next token)");

    // NTR at the fully decayed budget.
    const long final_budget =
        std::max(cfg.min_budget,
                 static_cast<long>(std::floor(cfg.initial_budget * cfg.budget_decay)));
    BucketAccuracy ntr =
        evaluate_ntr(policy, buckets, setup.held_out, setup.vocab, final_budget, cfg,
                     cfg.eval_positions, derive_seed(cfg.seed, "eval-ntr", 0));
    std::cout << ntr.to_string("NTR (budget " + std::to_string(final_budget) + ")");
    return 0;
}

int run_inspect(const RunConfig& cfg, const std::string& checkpoint_path,
                std::size_t position_index) {
    RunSetup setup = load_setup(cfg);
    Trainer trainer(cfg, setup.vocab, setup.train);
    // Enumerate eligible positions sequence-major.
    std::vector<Position> eligible;
    for (std::size_t s = 0; s < setup.train.sequences.size(); ++s)
        for (std::size_t pos = 1; pos < setup.train.sequences[s].size(); ++pos)
            eligible.push_back({s, pos});
    if (position_index >= eligible.size())
        throw std::invalid_argument("inspect: position " + std::to_string(position_index) +
                                    " out of range (" + std::to_string(eligible.size()) +
                                    " eligible positions)");
    if (!checkpoint_path.empty()) trainer.load_state(checkpoint_path);

    const Position target = eligible[position_index];
    RolloutGroup group = trainer.generate_rollouts(
        target, cfg.initial_budget, derive_seed(cfg.seed, "inspect", position_index));

    const Vocab& v = setup.vocab;
    std::cout << "target: seq " << target.seq << " pos " << target.pos << " token '"
              << v.detokenize({group.ground_truth}) << "'\n";
    std::cout << "budget: " << group.budget << "\n";
    std::cout << "prompt: " << v.detokenize(group.prompt) << "\n";
    for (std::size_t i = 0; i < group.samples.size(); ++i) {
        const auto& s = group.samples[i];
        std::cout << "--- response " << i << (s.parsed.well_formed ? "" : " (malformed)")
                  << "\n";
        std::cout << "  raw: " << v.detokenize(s.tokens) << "\n";
        std::cout << "  reasoning (" << s.parsed.reasoning_length
                  << " tokens): " << v.detokenize(s.parsed.reasoning) << "\n";
        std::cout << "  prediction: " << v.detokenize(s.parsed.prediction) << "\n";
        std::cout << "  r_pos=" << s.match_reward << " r_len=" << s.length_reward
                  << " w=" << (cfg.disable_dtb ? 0.0 : cfg.reward_weight)
                  << " r=" << s.composite_reward << " A=" << s.advantage << "\n";
    }
    return 0;
}

}  // namespace rmt
