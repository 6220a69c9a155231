#include "rmt/optim.hpp"

#include <cmath>

namespace rmt {

AdamOptimizer::AdamOptimizer(Options opts) : opts_(opts) {}

bool AdamOptimizer::step(ParamMap& params) {
    // Validate every gradient before touching anything: the step is
    // all-or-nothing.
    for (auto& [name, p] : params) {
        if (p.impl()->grad.size() != p.size()) {
            last_error_ = "missing gradient for parameter '" + name + "'";
            return false;
        }
        for (double g : p.grad()) {
            if (!std::isfinite(g)) {
                last_error_ = "non-finite gradient in parameter '" + name + "'";
                return false;
            }
        }
    }
    ++step_count_;
    const double lr = opts_.learning_rate;
    for (auto& [name, p] : params) {
        auto& data = p.mutable_data();
        const auto& grad = p.grad();
        if (opts_.plain_descent) {
            for (std::size_t i = 0; i < data.size(); ++i) data[i] -= lr * grad[i];
            continue;
        }
        auto& m = moment1_[name];
        auto& v = moment2_[name];
        if (m.size() != data.size()) m.assign(data.size(), 0.0);
        if (v.size() != data.size()) v.assign(data.size(), 0.0);
        const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(step_count_));
        const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(step_count_));
        for (std::size_t i = 0; i < data.size(); ++i) {
            m[i] = opts_.beta1 * m[i] + (1.0 - opts_.beta1) * grad[i];
            v[i] = opts_.beta2 * v[i] + (1.0 - opts_.beta2) * grad[i] * grad[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            data[i] -= lr * mhat / (std::sqrt(vhat) + opts_.eps);
        }
    }
    last_error_.clear();
    return true;
}

}  // namespace rmt
