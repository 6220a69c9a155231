#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rmt/corpus.hpp"
#include "rmt/model.hpp"

namespace rmt {

// A next-token position: sequence index and position of the target token.
// Eligible positions have pos >= 1 (there must be context to condition on).
struct Position {
    std::size_t seq = 0;
    std::size_t pos = 0;
    friend bool operator==(const Position&, const Position&) = default;
    friend auto operator<=>(const Position&, const Position&) = default;
};

struct EntropyProfile {
    std::vector<Position> positions;   // every eligible position
    std::vector<double> entropy;       // nats, parallel to positions
};

enum class Difficulty : int { kEasy = 0, kMedium = 1, kHard = 2 };

struct DifficultyBuckets {
    double theta_easy = 0.0;   // H <  theta_easy        -> easy
    double theta_hard = 0.0;   // H >= theta_hard        -> hard
    std::vector<Position> positions;
    std::vector<Difficulty> labels;    // parallel to positions
    bool degenerate = false;           // all entropies equal: everything medium
    std::array<std::size_t, 3> counts() const;
};

// Per-bucket candidate pools restricted to the RL side of the partition.
struct CandidatePools {
    std::array<std::vector<Position>, 3> by_difficulty;
    std::size_t total() const {
        return by_difficulty[0].size() + by_difficulty[1].size() +
               by_difficulty[2].size();
    }
};

struct TokenPartition {
    CandidatePools rl;                 // Phi_RL with difficulty labels kept
    std::vector<Position> ntp;         // Phi_NTP, the exact complement
};

// Shannon entropy (nats) of the reference model's next-token distribution
// at every eligible position of every sequence. One forward per sequence.
EntropyProfile profile_entropy(const Model& reference, const TokenCorpus& corpus);

// Thresholds are empirical quantiles of the profile: theta = sorted[floor(q*N)].
DifficultyBuckets bucketize(const EntropyProfile& profile, double q_easy,
                            double q_hard);

// Selects floor(rho * N) positions for Phi_RL by a seeded shuffle, keeping
// their difficulty labels grouped into pools. 0 < rho <= 0.1.
TokenPartition make_partition(const DifficultyBuckets& buckets, double rho,
                              std::uint64_t seed);

// Binary sidecar: per row, u64 seq, u64 pos, f64 entropy.
void save_profile(const std::string& path, const EntropyProfile& profile);
EntropyProfile load_profile(const std::string& path);

// CSV "seq,pos,entropy,label" for audit.
void save_buckets_csv(const std::string& path, const EntropyProfile& profile,
                      const DifficultyBuckets& buckets);

// Text histogram of the entropy distribution plus bucket populations.
std::string histogram_summary(const EntropyProfile& profile,
                              const DifficultyBuckets& buckets, int bins = 20);

}  // namespace rmt
