#include "smoothie/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace smoothie {

namespace {
const char* kSpecials[3] = {"<pad>", "<eos>", "<unk>"};
}

std::vector<std::string> Vocabulary::tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream iss(text);
    std::string tok;
    while (iss >> tok) {
        std::transform(tok.begin(), tok.end(), tok.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        out.push_back(std::move(tok));
    }
    return out;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& corpus,
                             std::size_t max_size) {
    if (corpus.empty()) throw std::invalid_argument("build_vocab: empty corpus");
    if (max_size < 4)
        throw std::invalid_argument("build_vocab: max_size must be >= 4");

    std::map<std::string, std::size_t> counts;  // ordered: lexicographic ties
    for (const auto& text : corpus)
        for (auto& tok : tokenize(text)) ++counts[tok];

    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(),
                                                            counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) {
                         return a.second > b.second;  // ties keep lex order
                     });

    std::vector<std::string> tokens(std::begin(kSpecials), std::end(kSpecials));
    for (const auto& [tok, count] : ranked) {
        if (tokens.size() >= max_size) break;
        tokens.push_back(tok);
    }
    return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
    if (tokens.size() < 3 || tokens[0] != kSpecials[0] ||
        tokens[1] != kSpecials[1] || tokens[2] != kSpecials[2])
        throw std::invalid_argument(
            "vocabulary must start with <pad>, <eos>, <unk>");
    Vocabulary v;
    v.tokens_ = std::move(tokens);
    for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
        auto [it, inserted] =
            v.index_.emplace(v.tokens_[i], static_cast<TokenId>(i));
        if (!inserted)
            throw std::invalid_argument("vocabulary: duplicate token " +
                                        v.tokens_[i]);
    }
    return v;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    for (const auto& tok : tokens_) out << tok << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) tokens.push_back(line);
    return from_tokens(std::move(tokens));
}

const std::string& Vocabulary::token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
        throw std::out_of_range("token id out of range");
    return tokens_[static_cast<std::size_t>(id)];
}

TokenId Vocabulary::id_of(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
}

TokenSequence Vocabulary::encode(const std::string& text,
                                 std::size_t max_len) const {
    if (max_len < 1) throw std::invalid_argument("encode: max_len must be >= 1");
    TokenSequence seq;
    seq.ids.reserve(max_len);
    for (const auto& tok : tokenize(text)) {
        if (seq.ids.size() + 1 >= max_len) break;  // keep room for EOS
        seq.ids.push_back(id_of(tok));
    }
    seq.ids.push_back(kEos);
    seq.ids.resize(max_len, kPad);
    return seq;
}

std::string Vocabulary::decode_text(const std::vector<TokenId>& ids) const {
    std::string out;
    for (TokenId id : ids) {
        if (id == kEos) break;
        if (id == kPad) continue;
        const std::string& tok = token(id);
        if (!out.empty()) out += ' ';
        out += tok;
    }
    return out;
}

}  // namespace smoothie
