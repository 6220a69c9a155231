#include "rmt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace rmt {

namespace {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

void ensure_grad_buffer(TensorImpl& t) {
    if (t.grad.size() != t.data.size()) t.grad.assign(t.data.size(), 0.0);
}

Tensor make_result(std::vector<std::size_t> shape, std::vector<double> data,
                   std::vector<Tensor> inputs,
                   std::function<void(TensorImpl&)> backward_fn) {
    bool needs_grad = false;
    for (const auto& in : inputs) {
        if (in.requires_grad()) { needs_grad = true; break; }
    }
    Tensor out(std::move(shape), std::move(data), needs_grad);
    if (needs_grad) {
        auto impl = out.impl();
        for (const auto& in : inputs) impl->parents.push_back(in.impl());
        impl->backward_fn = std::move(backward_fn);
    }
    return out;
}

[[noreturn]] void shape_error(const std::string& op,
                              const std::vector<std::size_t>& a,
                              const std::vector<std::size_t>& b) {
    throw std::invalid_argument(op + ": shape mismatch " + shape_str(a) +
                                " vs " + shape_str(b));
}

void require_rank2(const std::string& op, const Tensor& t) {
    if (t.shape().size() != 2)
        throw std::invalid_argument(op + ": expected rank-2 tensor, got " +
                                    shape_str(t.shape()));
}

}  // namespace

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data,
               bool requires_grad) {
    if (data.size() != shape_numel(shape))
        throw std::invalid_argument("Tensor: data length " +
                                    std::to_string(data.size()) +
                                    " does not match shape " + shape_str(shape));
    impl_ = std::make_shared<TensorImpl>();
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
    impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    std::vector<double> d(shape_numel(shape), 0.0);
    return Tensor(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value, bool requires_grad) {
    std::vector<double> d(shape_numel(shape), value);
    return Tensor(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::randn(std::vector<std::size_t> shape, std::mt19937_64& rng,
                     double stddev, bool requires_grad) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<double> d(shape_numel(shape));
    for (double& x : d) x = dist(rng);
    return Tensor(std::move(shape), std::move(d), requires_grad);
}

double Tensor::item() const {
    if (impl_->data.size() != 1)
        throw std::invalid_argument("item: tensor has " +
                                    std::to_string(impl_->data.size()) +
                                    " elements, expected 1");
    return impl_->data[0];
}

GradTape backward(const Tensor& loss) {
    if (loss.size() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                    shape_str(loss.shape()));
    // Iterative post-order DFS over parents.
    GradTape order;
    std::unordered_set<TensorImpl*> visited;
    std::vector<std::pair<TensorImpl*, std::size_t>> stack;
    stack.emplace_back(loss.impl().get(), 0);
    visited.insert(loss.impl().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorImpl* p = node->parents[next++].get();
            if (visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    // order is topological (parents first); walk it backwards.
    ensure_grad_buffer(*loss.impl());
    loss.impl()->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorImpl* node = *it;
        if (node->backward_fn) {
            for (auto& p : node->parents) ensure_grad_buffer(*p);
            node->backward_fn(*node);
        }
    }
    std::reverse(order.begin(), order.end());
    return order;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank2("matmul", a);
    require_rank2("matmul", b);
    if (a.cols() != b.rows()) shape_error("matmul", a.shape(), b.shape());
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    std::vector<double> out(m * n, 0.0);
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ad[i * k + p];
            if (av == 0.0) continue;
            const double* brow = bd + p * n;
            double* orow = out.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    return make_result({m, n}, std::move(out), {a, b}, [a, b, m, k, n](TensorImpl& self) {
        auto ai = a.impl();
        auto bi = b.impl();
        const double* g = self.grad.data();
        if (ai->requires_grad) {
            // dA = dC * B^T
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    const double gv = g[i * n + j];
                    if (gv == 0.0) continue;
                    for (std::size_t p = 0; p < k; ++p)
                        ai->grad[i * k + p] += gv * bi->data[p * n + j];
                }
        }
        if (bi->requires_grad) {
            // dB = A^T * dC
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double av = ai->data[i * k + p];
                    if (av == 0.0) continue;
                    for (std::size_t j = 0; j < n; ++j)
                        bi->grad[p * n + j] += av * g[i * n + j];
                }
        }
    });
}

Tensor transpose(const Tensor& a) {
    require_rank2("transpose", a);
    const std::size_t m = a.rows(), n = a.cols();
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a.data()[i * n + j];
    return make_result({n, m}, std::move(out), {a}, [a, m, n](TensorImpl& self) {
        auto ai = a.impl();
        if (!ai->requires_grad) return;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                ai->grad[i * n + j] += self.grad[j * m + i];
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_error("add", a.shape(), b.shape());
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    return make_result(a.shape(), std::move(out), {a, b}, [a, b](TensorImpl& self) {
        auto ai = a.impl();
        auto bi = b.impl();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (ai->requires_grad) ai->grad[i] += self.grad[i];
            if (bi->requires_grad) bi->grad[i] += self.grad[i];
        }
    });
}

Tensor add_rowvec(const Tensor& a, const Tensor& b) {
    require_rank2("add_rowvec", a);
    if (b.shape().size() != 1 || b.shape()[0] != a.cols())
        shape_error("add_rowvec", a.shape(), b.shape());
    const std::size_t m = a.rows(), n = a.cols();
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out[i * n + j] = a.data()[i * n + j] + b.data()[j];
    return make_result(a.shape(), std::move(out), {a, b}, [a, b, m, n](TensorImpl& self) {
        auto ai = a.impl();
        auto bi = b.impl();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double g = self.grad[i * n + j];
                if (ai->requires_grad) ai->grad[i * n + j] += g;
                if (bi->requires_grad) bi->grad[j] += g;
            }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_error("sub", a.shape(), b.shape());
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    return make_result(a.shape(), std::move(out), {a, b}, [a, b](TensorImpl& self) {
        auto ai = a.impl();
        auto bi = b.impl();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (ai->requires_grad) ai->grad[i] += self.grad[i];
            if (bi->requires_grad) bi->grad[i] -= self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_error("mul", a.shape(), b.shape());
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    return make_result(a.shape(), std::move(out), {a, b}, [a, b](TensorImpl& self) {
        auto ai = a.impl();
        auto bi = b.impl();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (ai->requires_grad) ai->grad[i] += self.grad[i] * bi->data[i];
            if (bi->requires_grad) bi->grad[i] += self.grad[i] * ai->data[i];
        }
    });
}

Tensor scale(const Tensor& a, double s) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * s;
    return make_result(a.shape(), std::move(out), {a}, [a, s](TensorImpl& self) {
        auto ai = a.impl();
        if (!ai->requires_grad) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            ai->grad[i] += self.grad[i] * s;
    });
}

Tensor gelu(const Tensor& a) {
    constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
    constexpr double kA = 0.044715;
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = a.data()[i];
        out[i] = 0.5 * x * (1.0 + std::tanh(kC * (x + kA * x * x * x)));
    }
    return make_result(a.shape(), std::move(out), {a}, [a](TensorImpl& self) {
        auto ai = a.impl();
        if (!ai->requires_grad) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double x = ai->data[i];
            const double t = std::tanh(kC * (x + kA * x * x * x));
            const double du = kC * (1.0 + 3.0 * kA * x * x);
            const double d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
            ai->grad[i] += self.grad[i] * d;
        }
    });
}

Tensor softmax_rows(const Tensor& a, bool causal_mask) {
    require_rank2("softmax_rows", a);
    if (causal_mask && a.rows() != a.cols())
        throw std::invalid_argument("softmax_rows: causal mask needs square input, got " +
                                    shape_str(a.shape()));
    const std::size_t m = a.rows(), n = a.cols();
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t lim = causal_mask ? i + 1 : n;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < lim; ++j) mx = std::max(mx, a.at(i, j));
        double z = 0.0;
        for (std::size_t j = 0; j < lim; ++j) {
            out[i * n + j] = std::exp(a.at(i, j) - mx);
            z += out[i * n + j];
        }
        for (std::size_t j = 0; j < lim; ++j) out[i * n + j] /= z;
        for (std::size_t j = lim; j < n; ++j) out[i * n + j] = 0.0;
    }
    return make_result(a.shape(), std::move(out), {a},
                       [a, m, n, causal_mask](TensorImpl& self) {
        auto ai = a.impl();
        if (!ai->requires_grad) return;
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t lim = causal_mask ? i + 1 : n;
            double dot = 0.0;
            for (std::size_t j = 0; j < lim; ++j)
                dot += self.grad[i * n + j] * self.data[i * n + j];
            for (std::size_t j = 0; j < lim; ++j)
                ai->grad[i * n + j] +=
                    self.data[i * n + j] * (self.grad[i * n + j] - dot);
        }
    });
}

Tensor log_softmax_rows(const Tensor& a) {
    require_rank2("log_softmax_rows", a);
    const std::size_t m = a.rows(), n = a.cols();
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < m; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, a.at(i, j));
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) z += std::exp(a.at(i, j) - mx);
        const double lz = mx + std::log(z);
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a.at(i, j) - lz;
    }
    return make_result(a.shape(), std::move(out), {a}, [a, m, n](TensorImpl& self) {
        auto ai = a.impl();
        if (!ai->requires_grad) return;
        for (std::size_t i = 0; i < m; ++i) {
            double gsum = 0.0;
            for (std::size_t j = 0; j < n; ++j) gsum += self.grad[i * n + j];
            for (std::size_t j = 0; j < n; ++j)
                ai->grad[i * n + j] +=
                    self.grad[i * n + j] - std::exp(self.data[i * n + j]) * gsum;
        }
    });
}

Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& idx) {
    require_rank2("gather_rows", a);
    if (idx.size() != a.rows())
        throw std::invalid_argument("gather_rows: index count " +
                                    std::to_string(idx.size()) +
                                    " does not match rows of " + shape_str(a.shape()));
    const std::size_t n = a.cols();
    std::vector<double> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= n)
            throw std::invalid_argument("gather_rows: index " + std::to_string(idx[i]) +
                                        " out of range for " + shape_str(a.shape()));
        out[i] = a.at(i, idx[i]);
    }
    return make_result({idx.size()}, std::move(out), {a}, [a, idx, n](TensorImpl& self) {
        auto ai = a.impl();
        if (!ai->requires_grad) return;
        for (std::size_t i = 0; i < idx.size(); ++i)
            ai->grad[i * n + idx[i]] += self.grad[i];
    });
}

Tensor embed(const Tensor& table, const std::vector<std::size_t>& ids) {
    require_rank2("embed", table);
    const std::size_t v = table.rows(), d = table.cols();
    std::vector<double> out(ids.size() * d);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= v)
            throw std::invalid_argument("embed: id " + std::to_string(ids[i]) +
                                        " out of range for table " +
                                        shape_str(table.shape()));
        std::copy_n(table.data().data() + ids[i] * d, d, out.data() + i * d);
    }
    return make_result({ids.size(), d}, std::move(out), {table},
                       [table, ids, d](TensorImpl& self) {
        auto ti = table.impl();
        if (!ti->requires_grad) return;
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (std::size_t j = 0; j < d; ++j)
                ti->grad[ids[i] * d + j] += self.grad[i * d + j];
    });
}

Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias,
                       double eps) {
    require_rank2("layer_norm_rows", a);
    if (gain.shape().size() != 1 || gain.shape()[0] != a.cols())
        shape_error("layer_norm_rows(gain)", a.shape(), gain.shape());
    if (bias.shape() != gain.shape())
        shape_error("layer_norm_rows(bias)", gain.shape(), bias.shape());
    const std::size_t m = a.rows(), n = a.cols();
    std::vector<double> out(a.size());
    std::vector<double> xhat(a.size());
    std::vector<double> inv_std(m);
    for (std::size_t i = 0; i < m; ++i) {
        double mu = 0.0;
        for (std::size_t j = 0; j < n; ++j) mu += a.at(i, j);
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double c = a.at(i, j) - mu;
            var += c * c;
        }
        var /= static_cast<double>(n);
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j) {
            xhat[i * n + j] = (a.at(i, j) - mu) * inv_std[i];
            out[i * n + j] = xhat[i * n + j] * gain.at(j) + bias.at(j);
        }
    }
    return make_result(a.shape(), std::move(out), {a, gain, bias},
                       [a, gain, bias, m, n, xhat = std::move(xhat),
                        inv_std = std::move(inv_std)](TensorImpl& self) {
        auto ai = a.impl();
        auto gi = gain.impl();
        auto bi = bias.impl();
        for (std::size_t i = 0; i < m; ++i) {
            // dxhat = g * gain; standard layernorm backward per row
            double sum_dx = 0.0, sum_dx_xhat = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double g = self.grad[i * n + j];
                const double dx = g * gi->data[j];
                sum_dx += dx;
                sum_dx_xhat += dx * xhat[i * n + j];
                if (gi->requires_grad) gi->grad[j] += g * xhat[i * n + j];
                if (bi->requires_grad) bi->grad[j] += g;
            }
            if (!ai->requires_grad) continue;
            const double inv_n = 1.0 / static_cast<double>(n);
            for (std::size_t j = 0; j < n; ++j) {
                const double dx = self.grad[i * n + j] * gi->data[j];
                ai->grad[i * n + j] +=
                    inv_std[i] *
                    (dx - inv_n * sum_dx - xhat[i * n + j] * inv_n * sum_dx_xhat);
            }
        }
    });
}

Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1) {
    require_rank2("slice_cols", a);
    if (c0 >= c1 || c1 > a.cols())
        throw std::invalid_argument("slice_cols: bad range [" + std::to_string(c0) +
                                    "," + std::to_string(c1) + ") for " +
                                    shape_str(a.shape()));
    const std::size_t m = a.rows(), n = a.cols(), w = c1 - c0;
    std::vector<double> out(m * w);
    for (std::size_t i = 0; i < m; ++i)
        std::copy_n(a.data().data() + i * n + c0, w, out.data() + i * w);
    return make_result({m, w}, std::move(out), {a}, [a, c0, m, n, w](TensorImpl& self) {
        auto ai = a.impl();
        if (!ai->requires_grad) return;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < w; ++j)
                ai->grad[i * n + c0 + j] += self.grad[i * w + j];
    });
}

Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t r1) {
    require_rank2("slice_rows", a);
    if (r0 >= r1 || r1 > a.rows())
        throw std::invalid_argument("slice_rows: bad range [" + std::to_string(r0) +
                                    "," + std::to_string(r1) + ") for " +
                                    shape_str(a.shape()));
    const std::size_t n = a.cols(), h = r1 - r0;
    std::vector<double> out(h * n);
    std::copy_n(a.data().data() + r0 * n, h * n, out.data());
    return make_result({h, n}, std::move(out), {a}, [a, r0, n, h](TensorImpl& self) {
        auto ai = a.impl();
        if (!ai->requires_grad) return;
        for (std::size_t i = 0; i < h * n; ++i) ai->grad[r0 * n + i] += self.grad[i];
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const std::size_t m = parts[0].rows();
    std::size_t n = 0;
    for (const auto& p : parts) {
        require_rank2("concat_cols", p);
        if (p.rows() != m) shape_error("concat_cols", parts[0].shape(), p.shape());
        n += p.cols();
    }
    std::vector<double> out(m * n);
    std::size_t off = 0;
    for (const auto& p : parts) {
        for (std::size_t i = 0; i < m; ++i)
            std::copy_n(p.data().data() + i * p.cols(), p.cols(),
                        out.data() + i * n + off);
        off += p.cols();
    }
    return make_result({m, n}, std::move(out), parts, [parts, m, n](TensorImpl& self) {
        std::size_t off = 0;
        for (const auto& p : parts) {
            auto pi = p.impl();
            const std::size_t w = pi->shape[1];
            if (pi->requires_grad)
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < w; ++j)
                        pi->grad[i * w + j] += self.grad[i * n + off + j];
            off += w;
        }
    });
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double x : a.data()) s += x;
    return make_result({1}, {s}, {a}, [a](TensorImpl& self) {
        auto ai = a.impl();
        if (!ai->requires_grad) return;
        for (double& g : ai->grad) g += self.grad[0];
    });
}

Tensor mean(const Tensor& a) {
    const double inv = 1.0 / static_cast<double>(a.size());
    double s = 0.0;
    for (double x : a.data()) s += x;
    return make_result({1}, {s * inv}, {a}, [a, inv](TensorImpl& self) {
        auto ai = a.impl();
        if (!ai->requires_grad) return;
        for (double& g : ai->grad) g += self.grad[0] * inv;
    });
}

bool all_finite(const Tensor& a) {
    for (double x : a.data())
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace rmt
