#include "vcomp/vocabulary.hpp"

#include "vcomp/composition_grammar.hpp"
#include "vcomp/error.hpp"

namespace vcomp {

namespace {

// Words used by the prompt templates.
const std::vector<std::string>& prompt_words() {
    static const std::vector<std::string> words = {
        "Please", "edit", "a", "video", "with", "suitable", "frequency", "of", "trigger", "positions",
        "simultaneously", "incorporating", "animated", "text", "effects", "templates", "sound", "image",
        "stickers", "and", "%", ","};
    return words;
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> pieces) : pieces_(std::move(pieces)) {
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
        if (pieces_[i].empty()) fail(ErrorCode::kValidation, "empty vocabulary piece at " + std::to_string(i));
        const auto [it, inserted] = ids_.emplace(pieces_[i], static_cast<TokenId>(i));
        if (!inserted) fail(ErrorCode::kDuplicate, "duplicate vocabulary piece '" + pieces_[i] + "'");
        max_piece_len_ = std::max(max_piece_len_, pieces_[i].size());
    }
    if (pieces_.size() < 4) fail(ErrorCode::kValidation, "vocabulary lacks special tokens");
}

Vocabulary Vocabulary::build(const std::vector<std::string>& words, std::size_t max_index) {
    std::vector<std::string> pieces = {"<pad>", "<unk>", "<compose>", "<end>"};
    std::unordered_map<std::string, bool> seen;
    for (const auto& p : pieces) seen[p] = true;
    const auto add = [&](const std::string& p) {
        if (p.empty() || seen.count(p)) return;
        seen[p] = true;
        pieces.push_back(p);
    };
    for (std::size_t i = 0; i <= max_index; ++i) add(std::to_string(i));
    for (const char* g : {"[", "]", "] ", " ", "(", ")", "->", ";", ";(", ":", "\n", "-"}) add(g);
    add(std::string(kWholeSentence));
    for (EffectCategory c : kAllCategories) {
        add(")->" + std::string(category_tag(c)) + ":");
        add(std::string(category_tag(c)));
        add(std::string(synthetic_prefix(c)));
    }
    for (const auto& w : prompt_words()) add(w);
    for (const auto& w : words) add(w);
    for (int c = 0x20; c < 0x7f; ++c) add(std::string(1, static_cast<char>(c)));
    add("\t");
    for (int c = 0x80; c < 0x100; ++c) add(std::string(1, static_cast<char>(c)));
    return Vocabulary(std::move(pieces));
}

TokenId Vocabulary::id_of(std::string_view piece) const noexcept {
    const auto it = ids_.find(std::string(piece));
    return it == ids_.end() ? kUnk : it->second;
}

std::vector<TokenId> Vocabulary::encode(std::string_view text) const {
    std::vector<TokenId> out;
    std::size_t i = 0;
    std::string probe;
    while (i < text.size()) {
        TokenId best = kUnk;
        std::size_t best_len = 1;
        for (std::size_t len = std::min(max_piece_len_, text.size() - i); len >= 1; --len) {
            probe.assign(text.substr(i, len));
            const auto it = ids_.find(probe);
            if (it != ids_.end() && it->second >= 4) {
                best = it->second;
                best_len = len;
                break;
            }
        }
        out.push_back(best);
        i += best_len;
    }
    return out;
}

std::vector<TokenId> Vocabulary::encode_word(std::string_view word) const {
    const auto it = ids_.find(std::string(word));
    if (it != ids_.end() && it->second >= 4) return {it->second};
    return encode(word);
}

std::vector<TokenId> Vocabulary::encode_words(std::string_view text) const {
    std::vector<TokenId> out;
    for (const auto& w : whitespace_tokenize(text)) {
        const auto ids = encode_word(w);
        out.insert(out.end(), ids.begin(), ids.end());
    }
    return out;
}

std::string Vocabulary::decode(const std::vector<TokenId>& ids) const {
    std::string out;
    for (TokenId id : ids) {
        if (id < 4 || static_cast<std::size_t>(id) >= pieces_.size()) continue;
        out += pieces_[static_cast<std::size_t>(id)];
    }
    return out;
}

}  // namespace vcomp
