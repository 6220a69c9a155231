#pragma once

#include <optional>
#include <random>
#include <string>

#include "rmt/checkpoint.hpp"
#include "rmt/corpus.hpp"
#include "rmt/optim.hpp"
#include "rmt/tensor.hpp"

namespace rmt {

struct ModelConfig {
    std::size_t vocab_size = 0;
    std::size_t context_length = 256;
    std::size_t embed_dim = 128;
    std::size_t num_layers = 2;
    std::size_t num_heads = 4;

    void validate() const;
    std::string to_header() const;  // key=value lines for checkpoint headers
    static ModelConfig from_header(const std::string& header);
};

// Minimal pre-norm decoder-only transformer with learned positional
// embeddings. The output head is zero-initialized, so a fresh model emits
// the uniform next-token distribution.
class Model {
public:
    Model() = default;
    Model(ModelConfig cfg, std::mt19937_64& rng, bool requires_grad);

    const ModelConfig& config() const { return cfg_; }
    ParamMap& params() { return params_; }
    const ParamMap& params() const { return params_; }

    // Deep copy with an independent requires_grad setting. Used for the
    // frozen reference snapshot.
    Model clone(bool requires_grad) const;

    // Logits for every position: [len(ids), vocab]. Differentiable when
    // the parameters require grad. Rejects contexts longer than the window.
    Tensor forward(const TokenSeq& ids) const;

    // Convenience: logits for the single next token after `context`.
    std::vector<double> next_token_logits(const TokenSeq& context) const;

    void save(const std::string& path, const std::string& extra_header = "") const;
    static Model load(const std::string& path, bool requires_grad);

private:
    ModelConfig cfg_;
    ParamMap params_;

    const Tensor& p(const std::string& name) const { return params_.at(name); }
};

// Grad-free autoregressive evaluator over a fixed model. Feeding tokens one
// at a time reproduces the last row of Model::forward exactly while caching
// per-layer attention keys and values, so each new token costs O(len * d^2)
// instead of a full O(len^2) re-forward. The model must outlive the decoder.
class IncrementalDecoder {
public:
    explicit IncrementalDecoder(const Model& model);

    // Appends one token and returns the logits for the following position.
    // Throws when the id is out of vocab or the window would be exceeded.
    const std::vector<double>& feed(TokenId id);

    std::size_t length() const { return pos_; }

private:
    const Model* model_;
    std::size_t pos_ = 0;
    std::vector<std::vector<double>> k_cache_;  // one [len * d] buffer per layer
    std::vector<std::vector<double>> v_cache_;
    std::vector<double> logits_;
};

struct SampleOptions {
    std::size_t max_new_tokens = 1;
    double temperature = 1.0;
    bool greedy = false;   // explicit greedy mode instead of temperature=0
    std::uint64_t seed = 0;
};

// Autoregressive sampling. Stops at <eor> (included in the output) or at
// max_new_tokens. The context rolls: when prompt+generated exceeds the
// window, the most recent window tokens condition the next step.
TokenSeq sample_response(const Model& model, const TokenSeq& prompt,
                         const SampleOptions& opts);

struct SequenceLogProb {
    Tensor total;                   // scalar, differentiable
    Tensor per_token;               // [len(response)], differentiable
};

// log pi(response | prompt) as the sum of per-token log-softmax values.
// prompt+response must fit the context window (the trainer guarantees it).
SequenceLogProb sequence_log_prob(const Model& model, const TokenSeq& prompt,
                                  const TokenSeq& response);

// Mean over response positions of the exact full-vocabulary KL divergence
// KL(pi_theta || pi_ref). Differentiable w.r.t. the policy only; the
// reference pass is detached.
Tensor kl_to_reference(const Model& policy, const Model& reference,
                       const TokenSeq& prompt, const TokenSeq& response);

}  // namespace rmt
