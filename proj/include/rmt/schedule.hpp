#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "rmt/entropy.hpp"

namespace rmt {

struct BudgetSchedule {
    long initial_budget = 800;
    long min_budget = 1;
    double decay = 0.2;  // gamma in (0,1)
    long total_steps = 0;
    double max_reward = 1.0;
};

// B_t = max(B_min, floor(B_0 * gamma^(t/T))). Non-increasing in t.
long budget_at(const BudgetSchedule& sched, long t);

// Triangular reward peaking at the budget: r_max*l/B on [0,B],
// r_max*(2B-l)/B on (B,2B], zero beyond.
double length_reward(std::size_t reasoning_len, long budget, double max_reward);

// Distribution over {easy, medium, hard}.
using DifficultyDist = std::array<double, 3>;

struct CurriculumSchedule {
    DifficultyDist start = {0.6, 0.3, 0.1};  // p^{t1}
    DifficultyDist end = {0.1, 0.3, 0.6};    // p^{t2}
    long t1 = 0;
    long t2 = 0;  // 0 < t1 < t2 < T
    long total_steps = 0;
};

// Piecewise-linear interpolation between the endpoint distributions;
// constant before t1 and after t2. Always sums to 1.
DifficultyDist curriculum_at(const CurriculumSchedule& sched, long t);

// Two-stage draw of n candidate positions: difficulty ~ Categorical(dist),
// then uniform without replacement within that bucket. When a drawn
// difficulty's bucket is exhausted its probability is redistributed
// proportionally over the remaining nonempty buckets. If n covers every
// candidate, all candidates are returned.
std::vector<Position> sample_batch(const CandidatePools& pools,
                                   const DifficultyDist& dist, std::size_t n,
                                   std::uint64_t seed);

}  // namespace rmt
