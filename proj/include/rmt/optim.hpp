#pragma once

#include <map>
#include <string>

#include "rmt/tensor.hpp"

namespace rmt {

// Named parameter set. std::map keeps iteration order stable, which the
// checkpoint format and determinism tests rely on.
using ParamMap = std::map<std::string, Tensor>;

// Adam with bias correction, plus a plain-descent mode used by exact unit
// tests (param -= lr * grad, no moments).
class AdamOptimizer {
public:
    struct Options {
        double learning_rate = 1e-6;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        bool plain_descent = false;
    };

    explicit AdamOptimizer(Options opts);

    // Applies one update using each parameter's accumulated .grad.
    // If any gradient is non-finite the step is rejected: returns false,
    // parameters and moments untouched, and last_error() explains which
    // parameter was bad.
    bool step(ParamMap& params);

    const std::string& last_error() const { return last_error_; }
    std::int64_t step_count() const { return step_count_; }
    void set_step_count(std::int64_t n) { step_count_ = n; }
    const Options& options() const { return opts_; }

    // Moment accumulators, exposed so checkpoints can carry optimizer
    // state across resume.
    std::map<std::string, std::vector<double>>& moment1() { return moment1_; }
    std::map<std::string, std::vector<double>>& moment2() { return moment2_; }

private:
    Options opts_;
    std::int64_t step_count_ = 0;
    std::map<std::string, std::vector<double>> moment1_;
    std::map<std::string, std::vector<double>> moment2_;
    std::string last_error_;
};

}  // namespace rmt
