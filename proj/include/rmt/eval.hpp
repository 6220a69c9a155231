#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "rmt/config.hpp"
#include "rmt/corpus.hpp"
#include "rmt/entropy.hpp"
#include "rmt/model.hpp"

namespace rmt {

struct BucketAccuracy {
    std::array<double, 3> accuracy = {0.0, 0.0, 0.0};   // easy, medium, hard
    std::array<std::size_t, 3> counts = {0, 0, 0};
    double macro_average = 0.0;  // mean over nonempty buckets
    double micro_average = 0.0;  // over all positions

    std::string to_string(const std::string& title) const;
};

// Greedy next-token prediction accuracy per difficulty bucket. Buckets come
// from the reference model's entropy profile over the same corpus.
BucketAccuracy evaluate_ntp(const Model& policy, const DifficultyBuckets& buckets,
                            const TokenCorpus& corpus);

// Budgeted reason-then-predict: greedy rollout from the budget prompt,
// parsed, first prediction token compared to the target. Only positions
// whose context fits the prompt window take part; at most max_positions
// are evaluated (seeded subsample).
BucketAccuracy evaluate_ntr(const Model& policy, const DifficultyBuckets& buckets,
                            const TokenCorpus& corpus, const Vocab& vocab,
                            long budget, const RunConfig& cfg,
                            std::size_t max_positions, std::uint64_t seed);

}  // namespace rmt
