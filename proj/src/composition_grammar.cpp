#include "vcomp/composition_grammar.hpp"

#include "vcomp/error.hpp"
#include "vcomp/util.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>

namespace vcomp {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool word_has_reserved(std::string_view w) {
    if (w.empty()) return true;
    if (w.find("->") != std::string_view::npos) return true;
    for (char c : w) {
        if (is_space(c) || c == ';' || c == '(' || c == ')' || c == '[' || c == ']' || c == ':') return true;
    }
    return false;
}

std::optional<std::size_t> parse_uint(std::string_view s) {
    if (s.empty() || s.size() > 9) return std::nullopt;
    for (char c : s) {
        if (c < '0' || c > '9') return std::nullopt;
    }
    // No leading zeros, so the rendering is unique.
    if (s.size() > 1 && s.front() == '0') return std::nullopt;
    std::size_t v = 0;
    std::from_chars(s.data(), s.data() + s.size(), v);
    return v;
}

std::string line_context(std::size_t line_no) { return "composition line " + std::to_string(line_no + 1) + ": "; }

// Leftmost occurrence of words[first..last] in the sentence.
std::size_t leftmost_occurrence(const Sentence& s, std::size_t first, std::size_t last) {
    const std::size_t len = last - first + 1;
    for (std::size_t start = 0; start + len <= s.size(); ++start) {
        bool ok = true;
        for (std::size_t k = 0; k < len && ok; ++k) ok = s[start + k] == s[first + k];
        if (ok) return start;
    }
    return first;
}

struct ElementParse {
    std::optional<EffectElement> element;
    // Which diagnostic to bump when element is empty.
    std::size_t ParseDiagnostics::*failure = nullptr;
    std::string message;
};

ElementParse parse_element(std::string_view text, const Sentence& sentence, const EffectPool& pool,
                           TriggerMode mode) {
    ElementParse r;
    const auto malformed = [&](std::string msg) {
        r.failure = &ParseDiagnostics::malformed_elements;
        r.message = std::move(msg);
        return r;
    };
    if (text.size() < 2 || text.front() != '(') return malformed("element must start with '('");
    const auto close = text.find(')');
    if (close == std::string_view::npos) return malformed("missing ')'");
    const std::string_view trigger_text = text.substr(1, close - 1);
    std::string_view rest = text.substr(close + 1);
    if (rest.substr(0, 2) != "->") return malformed("expected '->' after trigger");
    rest.remove_prefix(2);
    const auto colon = rest.find(':');
    if (colon == std::string_view::npos) return malformed("expected 'category:name'");
    const auto category = parse_category(rest.substr(0, colon));
    if (!category) return malformed("unknown category '" + std::string(rest.substr(0, colon)) + "'");
    const std::string_view name = rest.substr(colon + 1);
    if (!is_valid_effect_name(name)) return malformed("invalid effect name '" + std::string(name) + "'");

    std::optional<TriggerPosition> trigger;
    if (trigger_text == kWholeSentence) {
        trigger = TriggerPosition::whole();
    } else if (mode == TriggerMode::kIndices) {
        const auto dash = trigger_text.find('-');
        if (dash == std::string_view::npos) return malformed("expected 'first-last' trigger");
        const auto a = parse_uint(trigger_text.substr(0, dash));
        const auto b = parse_uint(trigger_text.substr(dash + 1));
        if (!a || !b) return malformed("bad trigger indices '" + std::string(trigger_text) + "'");
        if (*a > *b || *b >= sentence.size()) {
            r.failure = &ParseDiagnostics::ungroundable_trigger;
            r.message = "trigger span " + std::string(trigger_text) + " outside sentence of " +
                        std::to_string(sentence.size()) + " tokens";
            return r;
        }
        trigger = TriggerPosition::span(*a, *b);
    } else {
        // Serialized triggers are single-space joined; anything else is not ours.
        if (trigger_text.empty() || is_space(trigger_text.front()) || is_space(trigger_text.back()) ||
            trigger_text.find("  ") != std::string_view::npos) {
            return malformed("trigger words must be single-space joined");
        }
        trigger = try_ground_trigger(sentence, trigger_text);
        if (!trigger || trigger->is_whole()) {
            r.failure = &ParseDiagnostics::ungroundable_trigger;
            r.message = "trigger '" + std::string(trigger_text) + "' not found in sentence";
            return r;
        }
    }
    if (!pool.contains(*category, name)) {
        r.failure = &ParseDiagnostics::unknown_effect;
        r.message = "unknown effect " + std::string(category_tag(*category)) + ":" + std::string(name);
        return r;
    }
    r.element = EffectElement{*trigger, *category, std::string(name)};
    return r;
}

}  // namespace

Sentence whitespace_tokenize(std::string_view text) {
    Sentence out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        std::size_t j = i;
        while (j < text.size() && !is_space(text[j])) ++j;
        if (j > i) out.emplace_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

std::string EffectElement::effect_key() const {
    std::string k(category_tag(category));
    k += ':';
    k += name;
    return k;
}

CompositionTarget CompositionTarget::empty(std::size_t num_segments) {
    CompositionTarget t;
    t.segments.resize(num_segments);
    for (std::size_t i = 0; i < num_segments; ++i) t.segments[i].index = i;
    return t;
}

std::size_t CompositionTarget::element_count() const noexcept {
    std::size_t n = 0;
    for (const auto& s : segments) n += s.elements.size();
    return n;
}

std::string_view order_mode_name(OrderMode m) noexcept {
    switch (m) {
        case OrderMode::kRandom: return "random";
        case OrderMode::kString: return "string";
        case OrderMode::kCategory: return "category";
        case OrderMode::kTime: return "time";
    }
    return "time";
}

std::optional<OrderMode> parse_order_mode(std::string_view s) noexcept {
    for (OrderMode m : {OrderMode::kRandom, OrderMode::kString, OrderMode::kCategory, OrderMode::kTime}) {
        if (order_mode_name(m) == s) return m;
    }
    return std::nullopt;
}

std::string_view trigger_mode_name(TriggerMode m) noexcept {
    return m == TriggerMode::kWords ? "words" : "indices";
}

std::optional<TriggerMode> parse_trigger_mode(std::string_view s) noexcept {
    if (s == "words") return TriggerMode::kWords;
    if (s == "indices") return TriggerMode::kIndices;
    return std::nullopt;
}

ParseDiagnostics& ParseDiagnostics::operator+=(const ParseDiagnostics& o) noexcept {
    malformed_lines += o.malformed_lines;
    malformed_elements += o.malformed_elements;
    unknown_effect += o.unknown_effect;
    ungroundable_trigger += o.ungroundable_trigger;
    duplicate_segment += o.duplicate_segment;
    segment_out_of_range += o.segment_out_of_range;
    extra_lines += o.extra_lines;
    return *this;
}

void validate_target(const CompositionTarget& target, std::span<const Sentence> sentences) {
    if (target.segments.size() != sentences.size()) {
        fail(ErrorCode::kValidation, "target has " + std::to_string(target.segments.size()) + " segments but sample has " +
                                         std::to_string(sentences.size()));
    }
    for (std::size_t i = 0; i < target.segments.size(); ++i) {
        const auto& seg = target.segments[i];
        if (seg.index != i) {
            fail(ErrorCode::kValidation, "segment at position " + std::to_string(i) + " has index " + std::to_string(seg.index));
        }
        for (const auto& e : seg.elements) {
            if (!is_valid_effect_name(e.name)) fail(ErrorCode::kValidation, "invalid effect name '" + e.name + "'");
            if (e.trigger.is_whole()) continue;
            if (e.trigger.first > e.trigger.last || e.trigger.last >= sentences[i].size()) {
                fail(ErrorCode::kOutOfRange, "segment " + std::to_string(i) + ": span (" + std::to_string(e.trigger.first) +
                                                 "," + std::to_string(e.trigger.last) + ") outside sentence of " +
                                                 std::to_string(sentences[i].size()) + " tokens");
            }
        }
    }
}

std::string render_trigger(const TriggerPosition& trigger, const Sentence& sentence, TriggerMode mode) {
    if (trigger.is_whole()) return std::string(kWholeSentence);
    if (mode == TriggerMode::kIndices) return std::to_string(trigger.first) + "-" + std::to_string(trigger.last);
    std::string out;
    for (std::size_t k = trigger.first; k <= trigger.last; ++k) {
        if (k > trigger.first) out += ' ';
        out += sentence.at(k);
    }
    return out;
}

std::string serialize(const CompositionTarget& target, std::span<const Sentence> sentences, const FormatOptions& opts) {
    validate_target(target, sentences);
    std::string out;
    for (std::size_t i = 0; i < target.segments.size(); ++i) {
        const auto& seg = target.segments[i];
        const Sentence& sentence = sentences[i];
        if (i) out += '\n';
        if (opts.include_indices) {
            out += '[';
            out += std::to_string(seg.index);
            out += ']';
            if (!seg.elements.empty()) out += ' ';
        }
        for (std::size_t k = 0; k < seg.elements.size(); ++k) {
            const auto& e = seg.elements[k];
            if (opts.trigger_mode == TriggerMode::kWords && !e.trigger.is_whole()) {
                for (std::size_t w = e.trigger.first; w <= e.trigger.last; ++w) {
                    if (word_has_reserved(sentence[w])) {
                        fail(ErrorCode::kValidation, "segment " + std::to_string(i) + ": word '" + sentence[w] +
                                                         "' contains a reserved character");
                    }
                }
                if (leftmost_occurrence(sentence, e.trigger.first, e.trigger.last) != e.trigger.first) {
                    fail(ErrorCode::kValidation, "segment " + std::to_string(i) + ": span (" +
                                                     std::to_string(e.trigger.first) + "," +
                                                     std::to_string(e.trigger.last) +
                                                     ") is not the leftmost occurrence of its words");
                }
                if (render_trigger(e.trigger, sentence, opts.trigger_mode) == kWholeSentence) {
                    fail(ErrorCode::kValidation, "segment " + std::to_string(i) + ": trigger words collide with the sentinel");
                }
            }
            if (k) out += ';';
            out += '(';
            out += render_trigger(e.trigger, sentence, opts.trigger_mode);
            out += ")->";
            out += category_tag(e.category);
            out += ':';
            out += e.name;
        }
    }
    return out;
}

CompositionTarget canonicalize_spans(CompositionTarget target, std::span<const Sentence> sentences) {
    for (std::size_t i = 0; i < target.segments.size() && i < sentences.size(); ++i) {
        for (auto& e : target.segments[i].elements) {
            if (e.trigger.is_whole() || e.trigger.last >= sentences[i].size()) continue;
            const std::size_t start = leftmost_occurrence(sentences[i], e.trigger.first, e.trigger.last);
            e.trigger = TriggerPosition::span(start, start + (e.trigger.last - e.trigger.first));
        }
    }
    return target;
}

ParseResult parse(std::string_view text, std::span<const Sentence> sentences, const EffectPool& pool,
                  const FormatOptions& opts, bool strict) {
    const std::size_t S = sentences.size();
    ParseResult result;
    result.target = CompositionTarget::empty(S);
    std::vector<bool> seen(S, false);
    ParseDiagnostics& diag = result.diagnostics;

    std::vector<std::string> lines = split(text, '\n');
    if (opts.include_indices) {
        // A trailing newline or blank separator lines carry no segments.
        std::erase_if(lines, [](const std::string& l) { return trim(l).empty(); });
    } else if (strict && lines.size() != S) {
        fail(ErrorCode::kParse, "expected " + std::to_string(S) + " lines, found " + std::to_string(lines.size()));
    }

    for (std::size_t line_no = 0; line_no < lines.size(); ++line_no) {
        std::string_view line = lines[line_no];
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        std::size_t index = line_no;
        std::string_view body = line;
        if (opts.include_indices) {
            const auto close = line.find(']');
            std::optional<std::size_t> parsed;
            if (!line.empty() && line.front() == '[' && close != std::string_view::npos) {
                parsed = parse_uint(line.substr(1, close - 1));
            }
            if (!parsed) {
                if (strict) fail(ErrorCode::kParse, line_context(line_no) + "expected '[index]'");
                ++diag.malformed_lines;
                continue;
            }
            index = *parsed;
            body = line.substr(close + 1);
            if (!body.empty()) {
                if (body.front() != ' ' || body.size() == 1) {
                    if (strict) fail(ErrorCode::kParse, line_context(line_no) + "expected ' ' before elements");
                    ++diag.malformed_lines;
                    continue;
                }
                body.remove_prefix(1);
            }
        }
        if (index >= S) {
            if (strict) {
                fail(ErrorCode::kOutOfRange, line_context(line_no) + "segment index " + std::to_string(index) +
                                                 " outside 0.." + std::to_string(S == 0 ? 0 : S - 1));
            }
            if (opts.include_indices) {
                ++diag.segment_out_of_range;
            } else {
                ++diag.extra_lines;
            }
            continue;
        }
        if (seen[index]) {
            if (strict) fail(ErrorCode::kDuplicate, line_context(line_no) + "duplicate segment index " + std::to_string(index));
            ++diag.duplicate_segment;
            continue;
        }
        seen[index] = true;
        if (body.empty()) continue;

        auto& elements = result.target.segments[index].elements;
        for (const std::string& piece : split(body, ';')) {
            ElementParse ep = parse_element(piece, sentences[index], pool, opts.trigger_mode);
            if (ep.element) {
                elements.push_back(std::move(*ep.element));
                continue;
            }
            if (strict) {
                const ErrorCode code = ep.failure == &ParseDiagnostics::unknown_effect
                                           ? ErrorCode::kNotFound
                                           : (ep.failure == &ParseDiagnostics::ungroundable_trigger ? ErrorCode::kValidation
                                                                                                   : ErrorCode::kParse);
                fail(code, line_context(line_no) + ep.message);
            }
            ++(diag.*ep.failure);
        }
    }
    return result;
}

std::optional<TriggerPosition> try_ground_trigger(const Sentence& sentence, std::string_view trigger_text) noexcept {
    const std::string_view normalized = trim(trigger_text);
    if (normalized == kWholeSentence) return TriggerPosition::whole();
    const Sentence needle = whitespace_tokenize(normalized);
    if (needle.empty() || needle.size() > sentence.size()) return std::nullopt;
    for (std::size_t start = 0; start + needle.size() <= sentence.size(); ++start) {
        if (std::equal(needle.begin(), needle.end(), sentence.begin() + static_cast<std::ptrdiff_t>(start))) {
            return TriggerPosition::span(start, start + needle.size() - 1);
        }
    }
    return std::nullopt;
}

TriggerPosition ground_trigger(const Sentence& sentence, std::string_view trigger_text) {
    if (auto t = try_ground_trigger(sentence, trigger_text)) return *t;
    fail(ErrorCode::kValidation, "trigger '" + std::string(trigger_text) + "' is not groundable in the sentence");
}

SegmentComposition order_elements(const SegmentComposition& seg, OrderMode order, std::span<const double> start_times,
                                  std::uint64_t seed) {
    const std::size_t n = seg.elements.size();
    if (order == OrderMode::kTime && start_times.size() != n) {
        fail(ErrorCode::kInvalidArgument, "time ordering needs one start time per element (got " +
                                              std::to_string(start_times.size()) + " for " + std::to_string(n) + ")");
    }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});

    const auto tie_less = [&](std::size_t a, std::size_t b) {
        const auto& ea = seg.elements[a];
        const auto& eb = seg.elements[b];
        if (ea.category != eb.category) return category_rank(ea.category) < category_rank(eb.category);
        return ea.name < eb.name;
    };
    const auto span_key = [&](std::size_t a) -> long long {
        const auto& t = seg.elements[a].trigger;
        return t.is_whole() ? -1 : static_cast<long long>(t.first);
    };
    // Total order used to make random mode independent of the input order.
    const auto canonical_less = [&](std::size_t a, std::size_t b) {
        if (span_key(a) != span_key(b)) return span_key(a) < span_key(b);
        const auto& ta = seg.elements[a].trigger;
        const auto& tb = seg.elements[b].trigger;
        const long long la = ta.is_whole() ? -1 : static_cast<long long>(ta.last);
        const long long lb = tb.is_whole() ? -1 : static_cast<long long>(tb.last);
        if (la != lb) return la < lb;
        return tie_less(a, b);
    };

    switch (order) {
        case OrderMode::kRandom: {
            std::stable_sort(perm.begin(), perm.end(), canonical_less);
            Rng rng(splitmix64(seed ^ 0x5eed0fde5ULL));
            rng.shuffle(perm);
            break;
        }
        case OrderMode::kString:
            std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
                if (span_key(a) != span_key(b)) return span_key(a) < span_key(b);
                return tie_less(a, b);
            });
            break;
        case OrderMode::kCategory:
            std::stable_sort(perm.begin(), perm.end(), tie_less);
            break;
        case OrderMode::kTime:
            std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
                if (start_times[a] != start_times[b]) return start_times[a] < start_times[b];
                return tie_less(a, b);
            });
            break;
    }

    SegmentComposition out;
    out.index = seg.index;
    out.elements.reserve(n);
    for (std::size_t i : perm) out.elements.push_back(seg.elements[i]);
    return out;
}

}  // namespace vcomp
