#include "rmt/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace rmt {

std::array<std::size_t, 3> DifficultyBuckets::counts() const {
    std::array<std::size_t, 3> c = {0, 0, 0};
    for (Difficulty d : labels) ++c[static_cast<int>(d)];
    return c;
}

EntropyProfile profile_entropy(const Model& reference, const TokenCorpus& corpus) {
    if (corpus.sequences.empty())
        throw std::invalid_argument("profile_entropy: empty corpus");
    EntropyProfile profile;
    const std::size_t v = reference.config().vocab_size;
    for (std::size_t s = 0; s < corpus.sequences.size(); ++s) {
        const TokenSeq& seq = corpus.sequences[s];
        Tensor logits = reference.forward(seq);
        // Row pos-1 carries the distribution of the token at pos.
        for (std::size_t pos = 1; pos < seq.size(); ++pos) {
            const std::size_t row = pos - 1;
            double mx = logits.at(row, 0);
            for (std::size_t j = 1; j < v; ++j) mx = std::max(mx, logits.at(row, j));
            double z = 0.0;
            for (std::size_t j = 0; j < v; ++j) z += std::exp(logits.at(row, j) - mx);
            double h = 0.0;
            for (std::size_t j = 0; j < v; ++j) {
                const double p = std::exp(logits.at(row, j) - mx) / z;
                if (p > 0.0) h -= p * std::log(p);
            }
            profile.positions.push_back({s, pos});
            profile.entropy.push_back(std::max(0.0, h));
        }
    }
    return profile;
}

DifficultyBuckets bucketize(const EntropyProfile& profile, double q_easy,
                            double q_hard) {
    if (!(0.0 < q_easy && q_easy < q_hard && q_hard < 1.0))
        throw std::invalid_argument("bucketize: need 0 < q_easy < q_hard < 1");
    if (profile.entropy.empty())
        throw std::invalid_argument("bucketize: empty profile");
    DifficultyBuckets out;
    out.positions = profile.positions;

    std::vector<double> sorted = profile.entropy;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    if (sorted.front() == sorted.back()) {
        // Degenerate: no quantile separates anything; label everything medium.
        std::cerr << "bucketize: all entropies equal (" << sorted.front()
                  << "), labeling every position medium\n";
        out.degenerate = true;
        out.theta_easy = sorted.front();
        out.theta_hard = sorted.front() + 1.0;
        out.labels.assign(n, Difficulty::kMedium);
        return out;
    }
    out.theta_easy = sorted[static_cast<std::size_t>(std::floor(q_easy * n))];
    out.theta_hard = sorted[static_cast<std::size_t>(std::floor(q_hard * n))];
    out.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double h = profile.entropy[i];
        out.labels[i] = h < out.theta_easy    ? Difficulty::kEasy
                        : h < out.theta_hard ? Difficulty::kMedium
                                             : Difficulty::kHard;
    }
    return out;
}

TokenPartition make_partition(const DifficultyBuckets& buckets, double rho,
                              std::uint64_t seed) {
    if (!(rho > 0.0 && rho <= 0.1))
        throw std::invalid_argument("make_partition: rho must be in (0, 0.1], got " +
                                    std::to_string(rho));
    const std::size_t n = buckets.positions.size();
    const std::size_t n_rl = static_cast<std::size_t>(std::floor(rho * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    TokenPartition part;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t idx = order[i];
        if (i < n_rl) {
            part.rl.by_difficulty[static_cast<int>(buckets.labels[idx])].push_back(
                buckets.positions[idx]);
        } else {
            part.ntp.push_back(buckets.positions[idx]);
        }
    }
    for (auto& pool : part.rl.by_difficulty) std::sort(pool.begin(), pool.end());
    std::sort(part.ntp.begin(), part.ntp.end());
    return part;
}

void save_profile(const std::string& path, const EntropyProfile& profile) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("profile: cannot write " + path);
    for (std::size_t i = 0; i < profile.positions.size(); ++i) {
        const std::uint64_t s = profile.positions[i].seq;
        const std::uint64_t p = profile.positions[i].pos;
        const double h = profile.entropy[i];
        os.write(reinterpret_cast<const char*>(&s), 8);
        os.write(reinterpret_cast<const char*>(&p), 8);
        os.write(reinterpret_cast<const char*>(&h), 8);
    }
}

EntropyProfile load_profile(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("profile: cannot read " + path);
    EntropyProfile out;
    char row[24];
    while (is.read(row, 24)) {
        std::uint64_t s, p;
        double h;
        std::memcpy(&s, row, 8);
        std::memcpy(&p, row + 8, 8);
        std::memcpy(&h, row + 16, 8);
        out.positions.push_back({static_cast<std::size_t>(s), static_cast<std::size_t>(p)});
        out.entropy.push_back(h);
    }
    return out;
}

void save_buckets_csv(const std::string& path, const EntropyProfile& profile,
                      const DifficultyBuckets& buckets) {
    static const char* kNames[3] = {"easy", "medium", "hard"};
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("buckets: cannot write " + path);
    os << "seq,pos,entropy,label\n";
    for (std::size_t i = 0; i < profile.positions.size(); ++i)
        os << profile.positions[i].seq << ',' << profile.positions[i].pos << ','
           << profile.entropy[i] << ',' << kNames[static_cast<int>(buckets.labels[i])]
           << '\n';
}

std::string histogram_summary(const EntropyProfile& profile,
                              const DifficultyBuckets& buckets, int bins) {
    std::ostringstream os;
    double lo = profile.entropy[0], hi = profile.entropy[0];
    for (double h : profile.entropy) {
        lo = std::min(lo, h);
        hi = std::max(hi, h);
    }
    const double width = (hi - lo) / std::max(1, bins);
    std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
    for (double h : profile.entropy) {
        std::size_t b = width > 0.0
            ? std::min<std::size_t>(static_cast<std::size_t>((h - lo) / width), bins - 1)
            : 0;
        ++counts[b];
    }
    std::size_t peak = 1;
    for (std::size_t c : counts) peak = std::max(peak, c);
    os << "entropy histogram (" << profile.entropy.size() << " positions, ["
       << lo << ", " << hi << "] nats)\n";
    for (int b = 0; b < bins; ++b) {
        const double left = lo + b * width;
        os << "  " << left << "\t" << counts[b] << "\t";
        const int bar = static_cast<int>(60.0 * counts[b] / peak);
        for (int i = 0; i < bar; ++i) os << '#';
        os << '\n';
    }
    const auto c = buckets.counts();
    os << "buckets: easy=" << c[0] << " medium=" << c[1] << " hard=" << c[2]
       << " (theta_easy=" << buckets.theta_easy
       << ", theta_hard=" << buckets.theta_hard << ")\n";
    return os.str();
}

}  // namespace rmt
