#include "rmt/eval.hpp"

#include <algorithm>
#include <random>
#include <sstream>

namespace rmt {

namespace {

void finalize(BucketAccuracy& acc, const std::array<std::size_t, 3>& correct) {
    double macro = 0.0;
    int nonempty = 0;
    std::size_t total_correct = 0, total = 0;
    for (int d = 0; d < 3; ++d) {
        total_correct += correct[d];
        total += acc.counts[d];
        if (acc.counts[d] == 0) continue;
        acc.accuracy[d] = static_cast<double>(correct[d]) / acc.counts[d];
        macro += acc.accuracy[d];
        ++nonempty;
    }
    acc.macro_average = nonempty ? macro / nonempty : 0.0;
    acc.micro_average = total ? static_cast<double>(total_correct) / total : 0.0;
}

}  // namespace

std::string BucketAccuracy::to_string(const std::string& title) const {
    static const char* kNames[3] = {"easy", "medium", "hard"};
    std::ostringstream os;
    os << title << "\n";
    for (int d = 0; d < 3; ++d)
        os << "  " << kNames[d] << ": " << accuracy[d] << " (" << counts[d]
           << " positions)\n";
    os << "  average (macro): " << macro_average << "\n";
    os << "  average (micro): " << micro_average << "\n";
    return os.str();
}

BucketAccuracy evaluate_ntp(const Model& policy, const DifficultyBuckets& buckets,
                            const TokenCorpus& corpus) {
    BucketAccuracy acc;
    std::array<std::size_t, 3> correct = {0, 0, 0};
    // One forward per sequence yields the greedy prediction at every position.
    std::vector<std::vector<TokenId>> argmax(corpus.sequences.size());
    for (std::size_t s = 0; s < corpus.sequences.size(); ++s) {
        const TokenSeq& seq = corpus.sequences[s];
        Tensor logits = policy.forward(seq);
        argmax[s].resize(seq.size());
        const std::size_t v = policy.config().vocab_size;
        for (std::size_t r = 0; r + 1 < seq.size(); ++r) {
            TokenId best = 0;
            for (std::size_t j = 1; j < v; ++j)
                if (logits.at(r, j) > logits.at(r, best)) best = j;
            argmax[s][r] = best;
        }
    }
    for (std::size_t i = 0; i < buckets.positions.size(); ++i) {
        const Position& pos = buckets.positions[i];
        const int d = static_cast<int>(buckets.labels[i]);
        ++acc.counts[d];
        if (argmax[pos.seq][pos.pos - 1] == corpus.sequences[pos.seq][pos.pos])
            ++correct[d];
    }
    finalize(acc, correct);
    return acc;
}

BucketAccuracy evaluate_ntr(const Model& policy, const DifficultyBuckets& buckets,
                            const TokenCorpus& corpus, const Vocab& vocab,
                            long budget, const RunConfig& cfg,
                            std::size_t max_positions, std::uint64_t seed) {
    BucketAccuracy acc;
    std::array<std::size_t, 3> correct = {0, 0, 0};
    std::vector<std::size_t> order(buckets.positions.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    if (order.size() > max_positions) order.resize(max_positions);

    const std::size_t window = policy.config().context_length;
    for (std::size_t i : order) {
        const Position& pos = buckets.positions[i];
        const TokenSeq& seq = corpus.sequences[pos.seq];
        const std::size_t keep = std::min<std::size_t>(cfg.prompt_context_window, pos.pos);
        TokenSeq context(seq.begin() + static_cast<std::ptrdiff_t>(pos.pos - keep),
                         seq.begin() + static_cast<std::ptrdiff_t>(pos.pos));
        TokenSeq prompt = build_prompt(vocab, context, budget);
        if (prompt.size() + 2 > window) continue;
        SampleOptions opts;
        opts.greedy = true;
        opts.max_new_tokens =
            std::min<std::size_t>(static_cast<std::size_t>(2 * budget) + cfg.rollout_margin,
                                  window - prompt.size());
        ParsedResponse parsed = parse_response(sample_response(policy, prompt, opts));
        const int d = static_cast<int>(buckets.labels[i]);
        ++acc.counts[d];
        if (parsed.well_formed && !parsed.prediction.empty() &&
            parsed.prediction.front() == seq[pos.pos])
            ++correct[d];
    }
    finalize(acc, correct);
    return acc;
}

}  // namespace rmt
