#include "rmt/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace rmt {

void ModelConfig::validate() const {
    if (vocab_size == 0) throw std::invalid_argument("ModelConfig: vocab_size must be positive");
    if (context_length == 0) throw std::invalid_argument("ModelConfig: context_length must be positive");
    if (embed_dim == 0 || num_layers == 0 || num_heads == 0)
        throw std::invalid_argument("ModelConfig: dimensions must be positive");
    if (embed_dim % num_heads != 0)
        throw std::invalid_argument("ModelConfig: embed_dim " + std::to_string(embed_dim) +
                                    " not divisible by num_heads " + std::to_string(num_heads));
}

std::string ModelConfig::to_header() const {
    std::ostringstream os;
    os << "vocab_size=" << vocab_size << "\n"
       << "context_length=" << context_length << "\n"
       << "embed_dim=" << embed_dim << "\n"
       << "num_layers=" << num_layers << "\n"
       << "num_heads=" << num_heads << "\n";
    return os.str();
}

ModelConfig ModelConfig::from_header(const std::string& header) {
    ModelConfig cfg;
    std::istringstream is(header);
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq);
        const std::size_t val = std::stoul(line.substr(eq + 1));
        if (key == "vocab_size") cfg.vocab_size = val;
        else if (key == "context_length") cfg.context_length = val;
        else if (key == "embed_dim") cfg.embed_dim = val;
        else if (key == "num_layers") cfg.num_layers = val;
        else if (key == "num_heads") cfg.num_heads = val;
    }
    cfg.validate();
    return cfg;
}

Model::Model(ModelConfig cfg, std::mt19937_64& rng, bool requires_grad) : cfg_(cfg) {
    cfg_.validate();
    const std::size_t d = cfg_.embed_dim;
    const double init_std = 0.08;
    auto rnd = [&](std::vector<std::size_t> shape) {
        return Tensor::randn(std::move(shape), rng, init_std, requires_grad);
    };
    params_["tok_emb"] = rnd({cfg_.vocab_size, d});
    params_["pos_emb"] = rnd({cfg_.context_length, d});
    for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
        const std::string pfx = "layer" + std::to_string(l) + ".";
        params_[pfx + "ln1.g"] = Tensor::full({d}, 1.0, requires_grad);
        params_[pfx + "ln1.b"] = Tensor::zeros({d}, requires_grad);
        params_[pfx + "attn.wq"] = rnd({d, d});
        params_[pfx + "attn.wk"] = rnd({d, d});
        params_[pfx + "attn.wv"] = rnd({d, d});
        params_[pfx + "attn.wo"] = rnd({d, d});
        params_[pfx + "ln2.g"] = Tensor::full({d}, 1.0, requires_grad);
        params_[pfx + "ln2.b"] = Tensor::zeros({d}, requires_grad);
        params_[pfx + "mlp.w1"] = rnd({d, 4 * d});
        params_[pfx + "mlp.b1"] = Tensor::zeros({4 * d}, requires_grad);
        params_[pfx + "mlp.w2"] = rnd({4 * d, d});
        params_[pfx + "mlp.b2"] = Tensor::zeros({d}, requires_grad);
    }
    params_["ln_f.g"] = Tensor::full({d}, 1.0, requires_grad);
    params_["ln_f.b"] = Tensor::zeros({d}, requires_grad);
    // Zero-initialized head: the untrained model is exactly uniform.
    params_["head.w"] = Tensor::zeros({d, cfg_.vocab_size}, requires_grad);
}

Model Model::clone(bool requires_grad) const {
    Model out;
    out.cfg_ = cfg_;
    for (const auto& [name, t] : params_)
        out.params_[name] = Tensor(t.shape(), t.data(), requires_grad);
    return out;
}

Tensor Model::forward(const TokenSeq& ids) const {
    if (ids.empty()) throw std::invalid_argument("forward: empty context");
    if (ids.size() > cfg_.context_length)
        throw std::invalid_argument("forward: context length " + std::to_string(ids.size()) +
                                    " exceeds window " + std::to_string(cfg_.context_length));
    for (TokenId id : ids)
        if (id >= cfg_.vocab_size)
            throw std::invalid_argument("forward: token id " + std::to_string(id) +
                                        " out of vocab " + std::to_string(cfg_.vocab_size));
    const std::size_t len = ids.size();
    const std::size_t d = cfg_.embed_dim;
    const std::size_t heads = cfg_.num_heads;
    const std::size_t dh = d / heads;

    std::vector<std::size_t> positions(len);
    for (std::size_t i = 0; i < len; ++i) positions[i] = i;
    Tensor x = add(embed(p("tok_emb"), ids), embed(p("pos_emb"), positions));

    for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
        const std::string pfx = "layer" + std::to_string(l) + ".";
        Tensor h = layer_norm_rows(x, p(pfx + "ln1.g"), p(pfx + "ln1.b"));
        Tensor q = matmul(h, p(pfx + "attn.wq"));
        Tensor k = matmul(h, p(pfx + "attn.wk"));
        Tensor v = matmul(h, p(pfx + "attn.wv"));
        std::vector<Tensor> head_outs;
        head_outs.reserve(heads);
        const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
        for (std::size_t hh = 0; hh < heads; ++hh) {
            Tensor qh = slice_cols(q, hh * dh, (hh + 1) * dh);
            Tensor kh = slice_cols(k, hh * dh, (hh + 1) * dh);
            Tensor vh = slice_cols(v, hh * dh, (hh + 1) * dh);
            Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
            Tensor attn = softmax_rows(scores, /*causal_mask=*/true);
            head_outs.push_back(matmul(attn, vh));
        }
        Tensor attn_out = matmul(concat_cols(head_outs), p(pfx + "attn.wo"));
        x = add(x, attn_out);
        Tensor h2 = layer_norm_rows(x, p(pfx + "ln2.g"), p(pfx + "ln2.b"));
        Tensor mlp = matmul(gelu(add_rowvec(matmul(h2, p(pfx + "mlp.w1")),
                                            p(pfx + "mlp.b1"))),
                            p(pfx + "mlp.w2"));
        x = add(x, add_rowvec(mlp, p(pfx + "mlp.b2")));
    }
    Tensor xf = layer_norm_rows(x, p("ln_f.g"), p("ln_f.b"));
    return matmul(xf, p("head.w"));
}

std::vector<double> Model::next_token_logits(const TokenSeq& context) const {
    Tensor logits = forward(context);
    const std::size_t v = cfg_.vocab_size;
    const std::size_t last = context.size() - 1;
    std::vector<double> out(v);
    for (std::size_t j = 0; j < v; ++j) out[j] = logits.at(last, j);
    return out;
}

void Model::save(const std::string& path, const std::string& extra_header) const {
    save_checkpoint(path, cfg_.to_header() + extra_header, params_);
}

Model Model::load(const std::string& path, bool requires_grad) {
    Checkpoint ckpt = load_checkpoint(path, requires_grad);
    Model m;
    m.cfg_ = ModelConfig::from_header(ckpt.header);
    // Trainer checkpoints carry optimizer state under "adam."; a bare
    // model load ignores it.
    for (auto& [name, t] : ckpt.params)
        if (name.rfind("adam.", 0) != 0) m.params_[name] = std::move(t);
    return m;
}

namespace {

// Matches the row-wise computations in tensor.cpp operation by operation so
// that the incremental path reproduces Model::forward bit for bit.
void vec_mat(const double* x, const double* w, std::size_t k, std::size_t n,
             double* out) {
    std::fill(out, out + n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
        const double xv = x[p];
        if (xv == 0.0) continue;
        const double* wrow = w + p * n;
        for (std::size_t j = 0; j < n; ++j) out[j] += xv * wrow[j];
    }
}

void layer_norm_row(const double* x, const double* gain, const double* bias,
                    std::size_t n, double eps, double* out) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += x[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double c = x[j] - mu;
        var += c * c;
    }
    var /= static_cast<double>(n);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j)
        out[j] = (x[j] - mu) * inv_std * gain[j] + bias[j];
}

double gelu_scalar(double x) {
    constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
    constexpr double kA = 0.044715;
    return 0.5 * x * (1.0 + std::tanh(kC * (x + kA * x * x * x)));
}

}  // namespace

IncrementalDecoder::IncrementalDecoder(const Model& model)
    : model_(&model),
      k_cache_(model.config().num_layers),
      v_cache_(model.config().num_layers),
      logits_(model.config().vocab_size) {
    const std::size_t cap = model.config().context_length * model.config().embed_dim;
    for (auto& c : k_cache_) c.reserve(cap);
    for (auto& c : v_cache_) c.reserve(cap);
}

const std::vector<double>& IncrementalDecoder::feed(TokenId id) {
    const ModelConfig& cfg = model_->config();
    if (id >= cfg.vocab_size)
        throw std::invalid_argument("feed: token id " + std::to_string(id) +
                                    " out of vocab " + std::to_string(cfg.vocab_size));
    if (pos_ >= cfg.context_length)
        throw std::invalid_argument("feed: context window of " +
                                    std::to_string(cfg.context_length) + " exhausted");
    const std::size_t d = cfg.embed_dim;
    const std::size_t heads = cfg.num_heads;
    const std::size_t dh = d / heads;
    const auto& params = model_->params();
    auto data = [&](const std::string& name) { return params.at(name).data().data(); };

    std::vector<double> x(d);
    const double* tok = data("tok_emb") + id * d;
    const double* pe = data("pos_emb") + pos_ * d;
    for (std::size_t j = 0; j < d; ++j) x[j] = tok[j] + pe[j];

    std::vector<double> h(d), q(d), cat(d), tmp(4 * d), tmp2(d);
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        const std::string pfx = "layer" + std::to_string(l) + ".";
        layer_norm_row(x.data(), data(pfx + "ln1.g"), data(pfx + "ln1.b"), d, 1e-5,
                       h.data());
        vec_mat(h.data(), data(pfx + "attn.wq"), d, d, q.data());
        auto& kc = k_cache_[l];
        auto& vc = v_cache_[l];
        kc.resize((pos_ + 1) * d);
        vc.resize((pos_ + 1) * d);
        vec_mat(h.data(), data(pfx + "attn.wk"), d, d, kc.data() + pos_ * d);
        vec_mat(h.data(), data(pfx + "attn.wv"), d, d, vc.data() + pos_ * d);
        const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
        const std::size_t lim = pos_ + 1;
        std::vector<double> attn(lim);
        for (std::size_t hh = 0; hh < heads; ++hh) {
            const std::size_t off = hh * dh;
            for (std::size_t t = 0; t < lim; ++t) {
                double s = 0.0;
                const double* kt = kc.data() + t * d + off;
                for (std::size_t p = 0; p < dh; ++p) s += q[off + p] * kt[p];
                attn[t] = s * inv_sqrt;
            }
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t t = 0; t < lim; ++t) mx = std::max(mx, attn[t]);
            double z = 0.0;
            for (std::size_t t = 0; t < lim; ++t) {
                attn[t] = std::exp(attn[t] - mx);
                z += attn[t];
            }
            for (std::size_t t = 0; t < lim; ++t) attn[t] /= z;
            double* out = cat.data() + off;
            std::fill(out, out + dh, 0.0);
            for (std::size_t t = 0; t < lim; ++t) {
                const double a = attn[t];
                if (a == 0.0) continue;
                const double* vt = vc.data() + t * d + off;
                for (std::size_t p = 0; p < dh; ++p) out[p] += a * vt[p];
            }
        }
        vec_mat(cat.data(), data(pfx + "attn.wo"), d, d, tmp2.data());
        for (std::size_t j = 0; j < d; ++j) x[j] += tmp2[j];
        layer_norm_row(x.data(), data(pfx + "ln2.g"), data(pfx + "ln2.b"), d, 1e-5,
                       h.data());
        vec_mat(h.data(), data(pfx + "mlp.w1"), d, 4 * d, tmp.data());
        const double* b1 = data(pfx + "mlp.b1");
        for (std::size_t j = 0; j < 4 * d; ++j) tmp[j] = gelu_scalar(tmp[j] + b1[j]);
        vec_mat(tmp.data(), data(pfx + "mlp.w2"), 4 * d, d, tmp2.data());
        const double* b2 = data(pfx + "mlp.b2");
        for (std::size_t j = 0; j < d; ++j) x[j] += tmp2[j] + b2[j];
    }
    layer_norm_row(x.data(), data("ln_f.g"), data("ln_f.b"), d, 1e-5, h.data());
    vec_mat(h.data(), data("head.w"), d, cfg.vocab_size, logits_.data());
    ++pos_;
    return logits_;
}

TokenSeq sample_response(const Model& model, const TokenSeq& prompt,
                         const SampleOptions& opts) {
    if (!opts.greedy && opts.temperature <= 0.0)
        throw std::invalid_argument("sample_response: temperature must be positive");
    if (opts.max_new_tokens < 1)
        throw std::invalid_argument("sample_response: max_new_tokens must be >= 1");
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto pick = [&](const std::vector<double>& logits) {
        TokenId next = 0;
        if (opts.greedy) {
            for (std::size_t j = 1; j < logits.size(); ++j)
                if (logits[j] > logits[next]) next = j;
        } else {
            double mx = logits[0];
            for (double l : logits) mx = std::max(mx, l);
            std::vector<double> probs(logits.size());
            double z = 0.0;
            for (std::size_t j = 0; j < logits.size(); ++j) {
                probs[j] = std::exp((logits[j] - mx) / opts.temperature);
                z += probs[j];
            }
            const double u = unif(rng) * z;
            double acc = 0.0;
            next = logits.size() - 1;
            for (std::size_t j = 0; j < probs.size(); ++j) {
                acc += probs[j];
                if (u < acc) { next = j; break; }
            }
        }
        return next;
    };
    const std::size_t window = model.config().context_length;
    if (!prompt.empty() && prompt.size() + opts.max_new_tokens <= window) {
        // The whole generation fits the window: decode incrementally.
        IncrementalDecoder dec(model);
        const std::vector<double>* logits = nullptr;
        for (TokenId t : prompt) logits = &dec.feed(t);
        TokenSeq response;
        while (response.size() < opts.max_new_tokens) {
            const TokenId next = pick(*logits);
            response.push_back(next);
            if (next == Vocab::kResponseEnd) break;
            if (response.size() < opts.max_new_tokens) logits = &dec.feed(next);
        }
        return response;
    }
    TokenSeq context = prompt;
    TokenSeq response;
    for (std::size_t step = 0; step < opts.max_new_tokens; ++step) {
        TokenSeq view = context;
        if (view.size() > window)
            view.assign(context.end() - static_cast<std::ptrdiff_t>(window),
                        context.end());
        const TokenId next = pick(model.next_token_logits(view));
        response.push_back(next);
        context.push_back(next);
        if (next == Vocab::kResponseEnd) break;
    }
    return response;
}

SequenceLogProb sequence_log_prob(const Model& model, const TokenSeq& prompt,
                                  const TokenSeq& response) {
    if (response.empty())
        throw std::invalid_argument("sequence_log_prob: empty response");
    TokenSeq full = prompt;
    full.insert(full.end(), response.begin(), response.end());
    Tensor logits = model.forward(full);  // validates ids and window
    // Row i predicts token i+1; response token j sits at row prompt+j-1.
    Tensor rows = slice_rows(logits, prompt.size() - 1, full.size() - 1);
    Tensor logp = log_softmax_rows(rows);
    SequenceLogProb out;
    out.per_token = gather_rows(logp, response);
    out.total = sum(out.per_token);
    return out;
}

Tensor kl_to_reference(const Model& policy, const Model& reference,
                       const TokenSeq& prompt, const TokenSeq& response) {
    if (response.empty())
        throw std::invalid_argument("kl_to_reference: empty response");
    TokenSeq full = prompt;
    full.insert(full.end(), response.begin(), response.end());
    Tensor pol_rows = slice_rows(policy.forward(full), prompt.size() - 1, full.size() - 1);
    Tensor ref_logits = reference.forward(full);
    Tensor ref_rows = slice_rows(ref_logits, prompt.size() - 1, full.size() - 1);
    // Detach the reference side regardless of its requires_grad setting.
    Tensor ref_logp_const(ref_rows.shape(),
                          log_softmax_rows(ref_rows).data(), false);
    Tensor p = softmax_rows(pol_rows);
    Tensor lp = log_softmax_rows(pol_rows);
    Tensor kl_total = sum(mul(p, sub(lp, ref_logp_const)));
    return scale(kl_total, 1.0 / static_cast<double>(response.size()));
}

}  // namespace rmt
