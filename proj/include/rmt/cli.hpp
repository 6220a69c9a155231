#pragma once

#include <string>

#include "rmt/config.hpp"
#include "rmt/corpus.hpp"

namespace rmt {

// Exit codes: 0 success, 1 config/validation error, 2 runtime failure.
// Each command writes its artifacts under cfg.out_dir.

// Reads every document once and builds the character vocabulary.
Vocab build_vocab_from_dir(const std::string& dir);

// Entropy sidecar (profile.bin), bucket CSV (buckets.csv), text histogram
// (histogram.txt) and the persisted vocab (vocab.txt).
int run_profile(const RunConfig& cfg);

// Full training run: resolved config sidecar, metrics.jsonl (one JSON
// object per step), periodic checkpoints, reference snapshot, final
// summary block on stdout. resume_path may be empty.
int run_train(const RunConfig& cfg, const std::string& resume_path);

// Per-bucket exact-match accuracy of a checkpoint on the held-out split,
// in both NTP (greedy next token) and NTR (budgeted reason-then-predict)
// modes.
int run_eval(const RunConfig& cfg, const std::string& checkpoint_path);

// Human-readable dump of one rollout group at a flat eligible-position
// index: prompt, G responses, parsed reasoning, rewards, advantages.
int run_inspect(const RunConfig& cfg, const std::string& checkpoint_path,
                std::size_t position_index);

}  // namespace rmt
