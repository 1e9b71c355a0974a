#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace smoothie {

using TokenId = std::int32_t;

// Fixed-length token id sequence; everything after the first EOS is PAD.
struct TokenSequence {
    std::vector<TokenId> ids;
};

// Immutable after construction; ids are dense in [0, V).
// Ids 0, 1, 2 are always <pad>, <eos>, <unk>.
class Vocabulary {
public:
    static constexpr TokenId kPad = 0;
    static constexpr TokenId kEos = 1;
    static constexpr TokenId kUnk = 2;

    // Most frequent whitespace tokens kept, ties broken lexicographically.
    // Throws on empty corpus or max_size < 4.
    static Vocabulary build(const std::vector<std::string>& corpus,
                            std::size_t max_size);

    static Vocabulary from_tokens(std::vector<std::string> tokens);

    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

    std::size_t size() const { return tokens_.size(); }
    TokenId pad_id() const { return kPad; }
    TokenId eos_id() const { return kEos; }
    TokenId unk_id() const { return kUnk; }

    const std::string& token(TokenId id) const;
    TokenId id_of(const std::string& token) const;  // kUnk when absent
    const std::vector<std::string>& tokens() const { return tokens_; }

    // Lowercased whitespace tokens, EOS appended, padded/truncated to
    // max_len with EOS kept last on truncation.
    TokenSequence encode(const std::string& text, std::size_t max_len) const;

    // Tokens joined by spaces, truncated at the first EOS, pads dropped.
    // Throws on out-of-range ids.
    std::string decode_text(const std::vector<TokenId>& ids) const;

    static std::vector<std::string> tokenize(const std::string& text);

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
};

}  // namespace smoothie
