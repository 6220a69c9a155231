#include "rmt/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace rmt {

long budget_at(const BudgetSchedule& sched, long t) {
    if (t < 0 || t > sched.total_steps)
        throw std::invalid_argument("budget_at: step " + std::to_string(t) +
                                    " outside [0, " + std::to_string(sched.total_steps) + "]");
    const double frac = static_cast<double>(t) / static_cast<double>(sched.total_steps);
    const double raw = static_cast<double>(sched.initial_budget) * std::pow(sched.decay, frac);
    return std::max(sched.min_budget, static_cast<long>(std::floor(raw)));
}

double length_reward(std::size_t reasoning_len, long budget, double max_reward) {
    if (budget < 1) throw std::invalid_argument("length_reward: budget must be >= 1");
    const double l = static_cast<double>(reasoning_len);
    const double b = static_cast<double>(budget);
    if (l <= b) return max_reward * l / b;
    if (l <= 2.0 * b) return max_reward * (2.0 * b - l) / b;
    return 0.0;
}

DifficultyDist curriculum_at(const CurriculumSchedule& sched, long t) {
    if (t < 0 || t > sched.total_steps)
        throw std::invalid_argument("curriculum_at: step " + std::to_string(t) +
                                    " outside [0, " + std::to_string(sched.total_steps) + "]");
    if (t < sched.t1) return sched.start;
    if (t >= sched.t2) return sched.end;
    const double interp_factor =
        static_cast<double>(t - sched.t1) / static_cast<double>(sched.t2 - sched.t1);
    DifficultyDist out;
    for (int d = 0; d < 3; ++d)
        out[d] = (1.0 - interp_factor) * sched.start[d] + interp_factor * sched.end[d];
    return out;
}

std::vector<Position> sample_batch(const CandidatePools& pools,
                                   const DifficultyDist& dist, std::size_t n,
                                   std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample_batch: n must be >= 1");
    if (pools.total() == 0)
        throw std::invalid_argument("sample_batch: all candidate pools empty");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    // Working copies; drawn positions are removed (without replacement).
    std::array<std::vector<Position>, 3> pool = pools.by_difficulty;
    std::vector<Position> out;
    const std::size_t want = std::min(n, pools.total());
    out.reserve(want);
    while (out.size() < want) {
        // Mass of the prescribed distribution restricted to nonempty buckets.
        double mass = 0.0;
        for (int d = 0; d < 3; ++d)
            if (!pool[d].empty()) mass += dist[d];
        int chosen = -1;
        if (mass > 0.0) {
            const double u = unif(rng) * mass;
            double acc = 0.0;
            for (int d = 0; d < 3; ++d) {
                if (pool[d].empty()) continue;
                acc += dist[d];
                if (u < acc) { chosen = d; break; }
            }
        }
        if (chosen < 0) {
            // Prescribed mass lives entirely on exhausted buckets; fall back
            // to uniform over whatever is left.
            for (int d = 0; d < 3; ++d)
                if (!pool[d].empty()) { chosen = d; break; }
        }
        auto& bucket = pool[chosen];
        const std::size_t pick =
            static_cast<std::size_t>(unif(rng) * static_cast<double>(bucket.size()));
        const std::size_t idx = std::min(pick, bucket.size() - 1);
        out.push_back(bucket[idx]);
        bucket[idx] = bucket.back();
        bucket.pop_back();
    }
    return out;
}

}  // namespace rmt
