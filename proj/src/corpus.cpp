#include "rmt/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rmt {

namespace {

// The one place the instruction wording lives. {B} is replaced by the
// decimal budget; the model is told to reason between the think markers
// and then emit a single prediction token.
constexpr const char* kPromptTemplate = "[budget {B}: think then 1 token]";

const char* special_name(TokenId id) {
    switch (id) {
        case Vocab::kPad: return "<pad>";
        case Vocab::kThinkOpen: return "<think>";
        case Vocab::kThinkClose: return "</think>";
        case Vocab::kResponseEnd: return "<eor>";
        default: return "<?>";
    }
}

}  // namespace

Vocab Vocab::from_text(const std::string& alphabet) {
    Vocab v;
    std::string seed = alphabet;
    seed += "0123456789";
    seed += kPromptTemplate;  // template chars must always be encodable
    for (char c : seed) {
        if (v.char_to_id_.count(c)) continue;
        const TokenId id = v.id_to_char_.size() + kNumSpecials;
        v.char_to_id_[c] = id;
        v.id_to_char_.push_back(c);
    }
    return v;
}

TokenId Vocab::id_of(char c) const {
    auto it = char_to_id_.find(c);
    if (it == char_to_id_.end())
        throw std::invalid_argument(std::string("vocab: unknown character '") + c + "'");
    return it->second;
}

TokenSeq Vocab::tokenize(const std::string& text) const {
    TokenSeq out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        auto it = char_to_id_.find(text[i]);
        if (it == char_to_id_.end())
            throw std::invalid_argument("tokenize: out-of-vocab character at position " +
                                        std::to_string(i));
        out.push_back(it->second);
    }
    return out;
}

std::string Vocab::detokenize(const TokenSeq& ids) const {
    std::string out;
    for (TokenId id : ids) {
        if (id < kNumSpecials) {
            out += special_name(id);
        } else if (id - kNumSpecials < id_to_char_.size()) {
            out += id_to_char_[id - kNumSpecials];
        } else {
            throw std::invalid_argument("detokenize: id " + std::to_string(id) +
                                        " out of vocab (size " +
                                        std::to_string(size()) + ")");
        }
    }
    return out;
}

void Vocab::save(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("vocab: cannot write " + path);
    for (TokenId id = 0; id < kNumSpecials; ++id)
        os << id << '\t' << special_name(id) << '\n';
    for (std::size_t i = 0; i < id_to_char_.size(); ++i)
        os << (i + kNumSpecials) << '\t' << id_to_char_[i] << '\n';
}

Vocab Vocab::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("vocab: cannot read " + path);
    Vocab v;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw std::runtime_error("vocab: malformed line '" + line + "'");
        const TokenId id = std::stoul(line.substr(0, tab));
        const std::string tok = line.substr(tab + 1);
        if (id < kNumSpecials) continue;  // specials are implicit
        if (tok.size() != 1)
            throw std::runtime_error("vocab: expected single character, got '" + tok + "'");
        if (id != v.id_to_char_.size() + kNumSpecials)
            throw std::runtime_error("vocab: non-contiguous id " + std::to_string(id));
        v.char_to_id_[tok[0]] = id;
        v.id_to_char_.push_back(tok[0]);
    }
    return v;
}

TokenCorpus load_corpus(const std::string& dir, const Vocab& vocab,
                        std::size_t max_seq_len) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir))
        throw std::runtime_error("corpus: not a directory: " + dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("corpus: no documents in " + dir);

    TokenCorpus corpus;
    for (const auto& f : files) {
        std::ifstream is(f, std::ios::binary);
        std::ostringstream buf;
        buf << is.rdbuf();
        const std::string text = buf.str();
        TokenSeq ids;
        try {
            ids = vocab.tokenize(text);
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error("corpus: " + f.string() + ": " + e.what());
        }
        for (std::size_t off = 0; off < ids.size(); off += max_seq_len) {
            const std::size_t len = std::min(max_seq_len, ids.size() - off);
            if (len < 2) break;
            corpus.sequences.emplace_back(ids.begin() + off, ids.begin() + off + len);
            corpus.doc_ids.push_back(f.filename().string());
        }
    }
    return corpus;
}

TokenSeq build_prompt(const Vocab& vocab, const TokenSeq& context, long budget) {
    if (budget < 1) throw std::invalid_argument("build_prompt: budget must be >= 1");
    std::string pre = kPromptTemplate;
    const auto pos = pre.find("{B}");
    pre.replace(pos, 3, std::to_string(budget));
    TokenSeq out = vocab.tokenize(pre);
    out.insert(out.end(), context.begin(), context.end());
    return out;
}

ParsedResponse parse_response(const TokenSeq& ids) {
    ParsedResponse r;
    const std::size_t open_count =
        std::count(ids.begin(), ids.end(), Vocab::kThinkOpen);
    const std::size_t close_count =
        std::count(ids.begin(), ids.end(), Vocab::kThinkClose);
    const auto open_it = std::find(ids.begin(), ids.end(), Vocab::kThinkOpen);
    const auto close_it = std::find(ids.begin(), ids.end(), Vocab::kThinkClose);
    const bool structure_ok = open_count == 1 && close_count == 1 &&
                              open_it != ids.end() && close_it != ids.end() &&
                              open_it < close_it;
    if (structure_ok) {
        r.reasoning.assign(open_it + 1, close_it);
        for (auto it = close_it + 1; it != ids.end(); ++it) {
            if (*it == Vocab::kResponseEnd) break;
            r.prediction.push_back(*it);
        }
        if (!r.prediction.empty()) {
            r.well_formed = true;
            r.reasoning_length = r.reasoning.size();
            return r;
        }
    }
    // Malformed: the whole generation counts as reasoning length, which
    // the triangular reward zeroes out once past twice the budget.
    r.well_formed = false;
    r.reasoning.clear();
    r.prediction.clear();
    r.reasoning_length = ids.size();
    return r;
}

}  // namespace rmt
