#include "vcomp/decode_constraint.hpp"

#include "vcomp/util.hpp"

#include <algorithm>

namespace vcomp {

namespace {

bool has_completion(const std::vector<std::string>& sorted, std::string_view prefix) {
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), prefix,
                                     [](const std::string& a, std::string_view b) { return std::string_view(a) < b; });
    return it != sorted.end() && std::string_view(*it).substr(0, prefix.size()) == prefix;
}

bool contains(const std::vector<std::string>& sorted, std::string_view s) {
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), s,
                                     [](const std::string& a, std::string_view b) { return std::string_view(a) < b; });
    return it != sorted.end() && *it == s;
}

// Same reservation rule the serializer applies to words-mode triggers.
bool unusable_word(std::string_view w) {
    if (w.empty() || w.find("->") != std::string_view::npos) return true;
    for (char c : w) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == ';' || c == '(' || c == ')' || c == '[' ||
            c == ']' || c == ':')
            return true;
    }
    return false;
}

std::vector<std::string_view> split_elements(std::string_view rest) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto semi = rest.find(';', start);
        if (semi == std::string_view::npos) {
            parts.push_back(rest.substr(start));
            return parts;
        }
        parts.push_back(rest.substr(start, semi - start));
        start = semi + 1;
    }
}

}  // namespace

CompositionConstraint::CompositionConstraint(std::span<const Sentence> sentences, const EffectPool& pool,
                                             const FormatOptions& format)
    : format_(format) {
    triggers_.resize(sentences.size());
    for (std::size_t k = 0; k < sentences.size(); ++k) {
        const Sentence& s = sentences[k];
        auto& set = triggers_[k];
        set.emplace_back(kWholeSentence);
        for (std::size_t a = 0; a < s.size(); ++a) {
            std::string words;
            for (std::size_t b = a; b < s.size(); ++b) {
                if (format.trigger_mode == TriggerMode::kIndices) {
                    set.push_back(std::to_string(a) + "-" + std::to_string(b));
                    continue;
                }
                if (unusable_word(s[b])) break;
                if (b > a) words += ' ';
                words += s[b];
                set.push_back(words);
            }
        }
        std::sort(set.begin(), set.end());
        set.erase(std::unique(set.begin(), set.end()), set.end());
    }
    for (const auto& e : pool.effects()) tails_.push_back(")->" + std::string(category_tag(e.category)) + ":" + e.name);
    std::sort(tails_.begin(), tails_.end());
}

std::string CompositionConstraint::header(std::size_t k) const {
    return format_.include_indices ? "[" + std::to_string(k) + "]" : std::string();
}

bool CompositionConstraint::viable_element(std::size_t k, std::string_view e) const {
    if (e.empty()) return true;
    if (e.front() != '(') return false;
    const std::string_view rest = e.substr(1);
    const auto close = rest.find(')');
    if (close == std::string_view::npos) return has_completion(triggers_[k], rest);
    return contains(triggers_[k], rest.substr(0, close)) && has_completion(tails_, rest.substr(close));
}

bool CompositionConstraint::complete_element(std::size_t k, std::string_view e) const {
    if (e.empty() || e.front() != '(') return false;
    const std::string_view rest = e.substr(1);
    const auto close = rest.find(')');
    if (close == std::string_view::npos) return false;
    return contains(triggers_[k], rest.substr(0, close)) && contains(tails_, rest.substr(close));
}

bool CompositionConstraint::viable_elements(std::size_t k, std::string_view rest) const {
    const auto parts = split_elements(rest);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!complete_element(k, parts[i])) return false;
    }
    return viable_element(k, parts.back());
}

bool CompositionConstraint::complete_elements(std::size_t k, std::string_view rest) const {
    if (rest.empty()) return false;
    for (const auto part : split_elements(rest)) {
        if (!complete_element(k, part)) return false;
    }
    return true;
}

bool CompositionConstraint::viable_line_prefix(std::size_t k, std::string_view line) const {
    if (k >= triggers_.size()) return false;
    if (!format_.include_indices) return viable_elements(k, line);
    const std::string h = header(k);
    if (line.size() <= h.size()) return std::string_view(h).substr(0, line.size()) == line;
    if (line.substr(0, h.size()) != h || line[h.size()] != ' ') return false;
    return viable_elements(k, line.substr(h.size() + 1));
}

bool CompositionConstraint::complete_line(std::size_t k, std::string_view line) const {
    if (k >= triggers_.size()) return false;
    if (!format_.include_indices) return line.empty() || complete_elements(k, line);
    const std::string h = header(k);
    if (line == h) return true;
    if (line.size() <= h.size() + 1 || line.substr(0, h.size()) != h || line[h.size()] != ' ') return false;
    return complete_elements(k, line.substr(h.size() + 1));
}

bool CompositionConstraint::accepts(std::string_view text, std::string_view piece) const {
    if (piece.empty()) return false;
    std::size_t k = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
    const auto nl = text.rfind('\n');
    std::string line(nl == std::string_view::npos ? text : text.substr(nl + 1));
    for (char c : piece) {
        if (c == '\n') {
            if (k + 1 >= triggers_.size() || !complete_line(k, line)) return false;
            ++k;
            line.clear();
        } else {
            line += c;
        }
    }
    return viable_line_prefix(k, line);
}

bool CompositionConstraint::accepts_end(std::string_view text) const {
    const std::size_t k = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
    const auto nl = text.rfind('\n');
    const std::string_view line = nl == std::string_view::npos ? text : text.substr(nl + 1);
    return k + 1 == triggers_.size() && complete_line(k, line);
}

std::string CompositionConstraint::finalize(std::string_view text) const {
    std::vector<std::string> lines = split(text, '\n');
    if (lines.empty()) lines.emplace_back();
    if (lines.size() > triggers_.size()) lines.resize(triggers_.size());
    const std::size_t k = lines.size() - 1;
    std::string& line = lines.back();
    if (!complete_line(k, line)) {
        const std::string h = header(k);
        std::string_view rest;
        if (!format_.include_indices) {
            rest = line;
        } else if (line.size() > h.size() && line.compare(0, h.size() + 1, h + " ") == 0) {
            rest = std::string_view(line).substr(h.size() + 1);
        }
        std::vector<std::string> kept;
        for (const auto part : split_elements(rest)) {
            if (!complete_element(k, part)) break;
            kept.emplace_back(part);
        }
        line = kept.empty() ? h : (format_.include_indices ? h + " " : std::string()) + join(kept, ";");
    }
    for (std::size_t j = lines.size(); j < triggers_.size(); ++j) lines.push_back(header(j));
    return join(lines, "\n");
}

}  // namespace vcomp
