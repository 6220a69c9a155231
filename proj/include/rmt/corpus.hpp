#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace rmt {

using TokenId = std::size_t;
using TokenSeq = std::vector<TokenId>;

// Character-level vocabulary with four reserved special tokens. Specials
// occupy the lowest ids and never collide with text characters.
class Vocab {
public:
    static constexpr TokenId kPad = 0;
    static constexpr TokenId kThinkOpen = 1;
    static constexpr TokenId kThinkClose = 2;
    static constexpr TokenId kResponseEnd = 3;
    static constexpr std::size_t kNumSpecials = 4;

    // Builds a vocab over the distinct characters of `alphabet` (order of
    // first appearance). Digits and the prompt template characters are
    // always included so budget instructions can be rendered.
    static Vocab from_text(const std::string& alphabet);

    std::size_t size() const { return id_to_char_.size() + kNumSpecials; }
    bool has_char(char c) const { return char_to_id_.count(c) > 0; }
    TokenId id_of(char c) const;
    bool is_special(TokenId id) const { return id < kNumSpecials; }

    // Throws std::invalid_argument naming the byte position of the first
    // out-of-vocab character.
    TokenSeq tokenize(const std::string& text) const;
    // Specials render as <pad>, <think>, </think>, <eor>.
    std::string detokenize(const TokenSeq& ids) const;

    void save(const std::string& path) const;  // two-column "id<TAB>token"
    static Vocab load(const std::string& path);

private:
    std::map<char, TokenId> char_to_id_;
    std::vector<char> id_to_char_;  // id = index + kNumSpecials
};

struct TokenCorpus {
    // Documents chunked into sequences of length >= 2.
    std::vector<TokenSeq> sequences;
    std::vector<std::string> doc_ids;  // parallel to sequences
};

// Reads every regular file under `dir` (sorted by name), tokenizes it and
// chunks into sequences of at most max_seq_len tokens. Chunks shorter than
// 2 tokens are dropped.
TokenCorpus load_corpus(const std::string& dir, const Vocab& vocab,
                        std::size_t max_seq_len);

// Budget-aware prompt: fixed preamble containing the decimal budget,
// followed by the context prefix. See kPromptTemplate in corpus.cpp.
TokenSeq build_prompt(const Vocab& vocab, const TokenSeq& context, long budget);

struct ParsedResponse {
    TokenSeq reasoning;
    TokenSeq prediction;
    bool well_formed = false;
    std::size_t reasoning_length = 0;  // full response length when malformed
};

// Splits a generated sequence at its first <think>...</think> pair. A
// response is well formed iff it contains exactly one open and one close
// marker, in that order, with at least one prediction token after the
// close. Malformed responses are data, not errors: well_formed=false and
// reasoning_length = total generated length.
ParsedResponse parse_response(const TokenSeq& ids);

}  // namespace rmt
