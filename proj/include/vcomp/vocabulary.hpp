#pragma once

#include "vcomp/effect_catalog.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace vcomp {

using TokenId = std::int32_t;

/// Closed hybrid vocabulary: whole words of the lexicon, grammar pieces,
/// integers 0..max_index, category tags, name prefixes, and single-byte
/// fallback pieces so any string can be encoded. Encoding is greedy longest
/// match; decoding is concatenation.
class Vocabulary {
public:
    static constexpr TokenId kPad = 0;
    static constexpr TokenId kUnk = 1;
    static constexpr TokenId kCompose = 2;  // separates context from the composition
    static constexpr TokenId kEnd = 3;      // terminates the composition

    Vocabulary() = default;
    explicit Vocabulary(std::vector<std::string> pieces);

    /// Standard pieces plus `words` (e.g. the corpus lexicon).
    static Vocabulary build(const std::vector<std::string>& words, std::size_t max_index = 127);

    std::size_t size() const noexcept { return pieces_.size(); }
    const std::string& piece(TokenId id) const { return pieces_.at(static_cast<std::size_t>(id)); }
    const std::vector<std::string>& pieces() const noexcept { return pieces_; }
    TokenId id_of(std::string_view piece) const noexcept;  // kUnk when absent
    bool is_special(TokenId id) const noexcept { return id >= 0 && id < 4; }

    /// Greedy longest-match encoding of arbitrary text.
    std::vector<TokenId> encode(std::string_view text) const;
    /// Tokens of one word: the whole-word piece if present, else longest match.
    std::vector<TokenId> encode_word(std::string_view word) const;
    /// Whitespace-separated words, each via encode_word; no space tokens.
    std::vector<TokenId> encode_words(std::string_view text) const;
    /// Concatenation of pieces; special tokens are skipped.
    std::string decode(const std::vector<TokenId>& ids) const;

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.pieces_ == b.pieces_; }

private:
    std::vector<std::string> pieces_;
    std::unordered_map<std::string, TokenId> ids_;
    std::size_t max_piece_len_ = 1;
};

}  // namespace vcomp
