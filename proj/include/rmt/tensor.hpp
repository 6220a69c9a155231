#pragma once

// Dense 64-bit tensor with reverse-mode autodiff.
//
// Tensors are value handles onto shared immutable storage. Every op that
// receives at least one requires_grad input records a backward closure on
// the result node; backward(loss) topologically sorts the reachable graph
// and visits each node exactly once in reverse order.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace rmt {

struct TensorImpl {
    std::vector<std::size_t> shape;
    std::vector<double> data;
    std::vector<double> grad;  // sized lazily by backward()
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorImpl>> parents;
    // Propagates this node's grad into parents' grads. Null for leaves.
    std::function<void(TensorImpl&)> backward_fn;
};

class Tensor {
public:
    Tensor() = default;
    Tensor(std::vector<std::size_t> shape, std::vector<double> data,
           bool requires_grad = false);

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<std::size_t> shape, double value,
                       bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor randn(std::vector<std::size_t> shape, std::mt19937_64& rng,
                        double stddev, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const std::vector<std::size_t>& shape() const { return impl_->shape; }
    std::size_t size() const { return impl_->data.size(); }
    std::size_t rows() const { return impl_->shape.at(0); }
    std::size_t cols() const { return impl_->shape.at(1); }
    bool requires_grad() const { return impl_->requires_grad; }

    const std::vector<double>& data() const { return impl_->data; }
    std::vector<double>& mutable_data() { return impl_->data; }
    const std::vector<double>& grad() const { return impl_->grad; }
    void zero_grad() { impl_->grad.assign(impl_->data.size(), 0.0); }

    double item() const;       // requires a single-element tensor
    double at(std::size_t i) const { return impl_->data[i]; }
    double at(std::size_t r, std::size_t c) const {
        return impl_->data[r * cols() + c];
    }

    std::shared_ptr<TensorImpl> impl() const { return impl_; }

private:
    std::shared_ptr<TensorImpl> impl_;
};

// The reverse topological order of one backward pass.
using GradTape = std::vector<TensorImpl*>;

// Runs reverse-mode accumulation from a scalar loss. Gradients accumulate
// into .grad of every requires_grad tensor reachable from the loss.
// Returns the visitation order (reverse topological), mainly for tests.
GradTape backward(const Tensor& loss);

// ---- forward ops ----------------------------------------------------------
// Shape mismatches throw std::invalid_argument naming the op and both shapes.

Tensor matmul(const Tensor& a, const Tensor& b);     // [m,k]x[k,n] -> [m,n]
Tensor transpose(const Tensor& a);                   // [m,n] -> [n,m]
Tensor add(const Tensor& a, const Tensor& b);        // same shape
Tensor add_rowvec(const Tensor& a, const Tensor& b); // [m,n] + [n]
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);        // elementwise
Tensor scale(const Tensor& a, double s);
Tensor gelu(const Tensor& a);                        // tanh approximation
Tensor softmax_rows(const Tensor& a, bool causal_mask = false);
Tensor log_softmax_rows(const Tensor& a);
Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& idx); // -> [m]
Tensor embed(const Tensor& table, const std::vector<std::size_t>& ids);   // [V,d],[L] -> [L,d]
Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias,
                       double eps = 1e-5);
Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1);
Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t r1);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor sum(const Tensor& a);   // -> scalar
Tensor mean(const Tensor& a);  // -> scalar

bool all_finite(const Tensor& a);
std::string shape_str(const std::vector<std::size_t>& shape);

}  // namespace rmt
