#pragma once

#include "vcomp/effect_catalog.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vcomp {

/// Tokens of one sentence. Word-span triggers index into this list.
using Sentence = std::vector<std::string>;

inline constexpr std::string_view kWholeSentence = "<whole sentence>";

/// Splits on runs of ASCII whitespace.
Sentence whitespace_tokenize(std::string_view text);

struct TriggerPosition {
    enum class Kind : std::uint8_t { kWordSpan, kWholeSentence };

    Kind kind = Kind::kWholeSentence;
    std::size_t first = 0;  // inclusive, 0-based; meaningful for kWordSpan only
    std::size_t last = 0;

    static TriggerPosition whole() noexcept { return {}; }
    static TriggerPosition span(std::size_t first, std::size_t last) noexcept {
        return {Kind::kWordSpan, first, last};
    }
    bool is_whole() const noexcept { return kind == Kind::kWholeSentence; }

    friend bool operator==(const TriggerPosition& a, const TriggerPosition& b) noexcept {
        if (a.kind != b.kind) return false;
        return a.is_whole() || (a.first == b.first && a.last == b.last);
    }
};

struct EffectElement {
    TriggerPosition trigger;
    EffectCategory category = EffectCategory::kTextEffect;
    std::string name;

    std::string effect_key() const;
    friend bool operator==(const EffectElement&, const EffectElement&) = default;
};

struct SegmentComposition {
    std::size_t index = 0;
    std::vector<EffectElement> elements;

    friend bool operator==(const SegmentComposition&, const SegmentComposition&) = default;
};

struct CompositionTarget {
    std::vector<SegmentComposition> segments;

    static CompositionTarget empty(std::size_t num_segments);
    std::size_t element_count() const noexcept;

    friend bool operator==(const CompositionTarget&, const CompositionTarget&) = default;
};

enum class OrderMode : std::uint8_t { kRandom, kString, kCategory, kTime };
enum class TriggerMode : std::uint8_t { kWords, kIndices };

std::string_view order_mode_name(OrderMode m) noexcept;
std::optional<OrderMode> parse_order_mode(std::string_view s) noexcept;
std::string_view trigger_mode_name(TriggerMode m) noexcept;
std::optional<TriggerMode> parse_trigger_mode(std::string_view s) noexcept;

struct FormatOptions {
    OrderMode order = OrderMode::kTime;
    bool include_indices = true;
    TriggerMode trigger_mode = TriggerMode::kWords;
    /// Required when order == kRandom and targets are being constructed.
    std::optional<std::uint64_t> seed;
};

/// Checks every span against its sentence and every segment index against
/// its position. Throws Error(kValidation / kOutOfRange).
void validate_target(const CompositionTarget& target, std::span<const Sentence> sentences);

/// Renders the trigger as it appears between the parentheses.
std::string render_trigger(const TriggerPosition& trigger, const Sentence& sentence, TriggerMode mode);

/// Emits the composition text. Lines are joined by '\n' with no trailing
/// newline. Word-mode triggers must be the leftmost occurrence of their words
/// (see canonicalize_spans), otherwise the text would not parse back.
std::string serialize(const CompositionTarget& target, std::span<const Sentence> sentences,
                      const FormatOptions& opts);

/// Moves each word span to the leftmost occurrence of the same word sequence.
CompositionTarget canonicalize_spans(CompositionTarget target, std::span<const Sentence> sentences);

struct ParseDiagnostics {
    std::size_t malformed_lines = 0;
    std::size_t malformed_elements = 0;
    std::size_t unknown_effect = 0;
    std::size_t ungroundable_trigger = 0;
    std::size_t duplicate_segment = 0;
    std::size_t segment_out_of_range = 0;
    std::size_t extra_lines = 0;

    std::size_t dropped() const noexcept {
        return malformed_lines + malformed_elements + unknown_effect + ungroundable_trigger + duplicate_segment +
               segment_out_of_range + extra_lines;
    }
    ParseDiagnostics& operator+=(const ParseDiagnostics& o) noexcept;
    friend bool operator==(const ParseDiagnostics&, const ParseDiagnostics&) = default;
};

struct ParseResult {
    CompositionTarget target;
    ParseDiagnostics diagnostics;
};

/// Parses composition text against the sample's sentences. Strict mode throws
/// on the first violation; lenient mode drops what it cannot use and counts it.
/// Segments with no line are empty in both modes.
ParseResult parse(std::string_view text, std::span<const Sentence> sentences, const EffectPool& pool,
                  const FormatOptions& opts, bool strict);

/// Leftmost exact contiguous match after whitespace normalization. The
/// sentinel grounds to the whole sentence. Throws Error(kValidation) when
/// nothing matches.
TriggerPosition ground_trigger(const Sentence& sentence, std::string_view trigger_text);
std::optional<TriggerPosition> try_ground_trigger(const Sentence& sentence, std::string_view trigger_text) noexcept;

/// Stable reordering of a segment's elements. `start_times` is aligned with
/// seg.elements and is required for kTime. Random mode is a seeded shuffle
/// of the canonically sorted elements, so it does not depend on input order.
SegmentComposition order_elements(const SegmentComposition& seg, OrderMode order,
                                  std::span<const double> start_times, std::uint64_t seed);

}  // namespace vcomp
