#pragma once

#include "vcomp/composition_grammar.hpp"
#include "vcomp/effect_catalog.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace vcomp {

struct WordTiming {
    std::string word;
    double start_s = 0.0;
    double end_s = 0.0;

    friend bool operator==(const WordTiming&, const WordTiming&) = default;
};

using Embedding = std::vector<float>;

struct SegmentRecord {
    std::size_t index = 0;
    std::string sentence;
    std::vector<WordTiming> words;
    std::optional<Embedding> visual_embedding;
    std::optional<std::vector<Embedding>> audio_embeddings;  // at most 3
    std::optional<std::string> frame_ref;
    std::optional<std::string> audio_ref;

    /// Trigger spans index into these tokens.
    Sentence tokens() const;
    double start_s() const noexcept { return words.empty() ? 0.0 : words.front().start_s; }
    double end_s() const noexcept { return words.empty() ? 0.0 : words.back().end_s; }

    friend bool operator==(const SegmentRecord&, const SegmentRecord&) = default;
};

/// Opaque string map carried through unchanged (views, likes, source, ...).
using SampleMeta = std::map<std::string, std::string>;

struct Sample {
    std::string sample_id;
    std::vector<SegmentRecord> segments;
    CompositionTarget target;
    std::optional<std::string> prompt;
    SampleMeta meta;

    std::vector<Sentence> sentences() const;
    friend bool operator==(const Sample&, const Sample&) = default;
};

using Corpus = std::vector<Sample>;

/// Per-element start timestamps of one segment, in element order: a word span
/// starts at its first word, a whole-sentence element at the first word of
/// the sentence.
std::vector<double> element_start_times(const SegmentRecord& segment, const SegmentComposition& composition);

/// Applies order_elements to every segment. Random mode derives a
/// per-segment seed from `seed`, the sample id and the segment index.
CompositionTarget order_target(const Sample& sample, OrderMode order, std::uint64_t seed);

/// Structural checks: at least one segment, ascending 0-based indices,
/// well-formed timings, target aligned with segments and spans in range.
void validate_sample(const Sample& sample);

Corpus filter_samples(const Corpus& corpus, std::size_t min_sentences = 3);

/// Keeps samples whose numeric meta field `key` is >= threshold. Samples
/// without the field are dropped.
Corpus filter_by_meta(const Corpus& corpus, const std::string& key, double threshold);

/// Slot cost of one segment in the assembled context.
using SegmentCost = std::function<std::size_t(const SegmentRecord&)>;

/// Longest contiguous run starting at window_start whose summed cost (plus
/// `fixed_cost`, e.g. prompt and separator slots) fits max_context_tokens.
/// Segment and target indices are re-based to 0.
Sample truncate_sample(const Sample& sample, std::size_t max_context_tokens, std::size_t window_start,
                       const SegmentCost& cost, std::size_t fixed_cost = 0);

struct CorpusSplit {
    Corpus train;
    Corpus val;
};

/// Seeded partition; val receives ceil(n * val_fraction) samples when n >= 1.
CorpusSplit split_corpus(const Corpus& corpus, double val_fraction, std::uint64_t seed);

struct CorpusStats {
    std::size_t num_samples = 0;
    std::size_t num_segments = 0;
    std::size_t num_elements = 0;
    std::map<std::size_t, std::size_t> length_histogram;  // segment count -> samples
    std::vector<std::size_t> trigger_ratio_histogram;    // 10 equal bins over [0, 1]
    std::vector<double> trigger_ratios;                  // per sample
    std::map<std::string, std::size_t> effect_usage;     // "category:name" -> count
    std::map<EffectCategory, std::size_t> category_usage;

    double mean_trigger_ratio() const noexcept;
};

CorpusStats compute_stats(const Corpus& corpus);
/// Stats of bare targets (used for predictions that carry no segments).
CorpusStats compute_target_stats(const std::vector<CompositionTarget>& targets);
double trigger_ratio(const CompositionTarget& target) noexcept;

/// Word list of the synthetic lexicon (64 entries, all lowercase ASCII).
const std::vector<std::string>& synthetic_lexicon();
inline constexpr std::string_view kEmphasisMarker = "EMPH";
/// Graded cue tokens "CUE0" ... "CUE9".
std::string cue_token(std::size_t level);

struct SyntheticConfig {
    std::size_t num_samples = 100;
    std::pair<std::size_t, std::size_t> segments_range{3, 12};
    std::pair<std::size_t, std::size_t> words_range{4, 12};
    double density = 0.5;
    double prompt_rate = 0.0;
    std::uint64_t seed = 0;
    std::size_t num_topics = 8;
    std::size_t num_emotions = 3;
    std::size_t visual_dim = 32;
    std::size_t audio_dim = 16;
    /// Seed of the stub providers whose basis vectors encode topic/emotion.
    std::uint64_t provider_seed = 17;
};

/// Per-segment latent variables drawn by the generator, exposed for oracles.
struct SyntheticSegmentLatent {
    std::size_t topic = 0;
    std::size_t emotion = 0;
    double salience = 0.0;       // u in [0, 1); EMPH iff u < density
    std::size_t cue_position = 0;  // token index of EMPH / CUE marker
};

/// Effect ordinals dictated by the generation rule. Exposed so tests can
/// re-derive names independently of the generator's control flow.
std::uint64_t synthetic_text_effect_hash(std::size_t topic) noexcept;
std::uint64_t synthetic_sound_effect_hash(std::size_t emotion, std::size_t topic) noexcept;
std::uint64_t synthetic_sticker_hash(std::size_t topic) noexcept;

struct SyntheticSample {
    Sample sample;
    std::vector<SyntheticSegmentLatent> latents;
};

std::vector<SyntheticSample> generate_synthetic_detailed(const SyntheticConfig& config, const EffectPool& pool);
Corpus generate_synthetic(const SyntheticConfig& config, const EffectPool& pool);

// JSON-lines dataset file.
std::string sample_to_json_line(const Sample& sample);
Sample sample_from_json_line(std::string_view line, std::size_t record_index);
Corpus ingest_jsonl(const std::filesystem::path& path);
Corpus parse_jsonl(std::string_view text);
void export_jsonl(const Corpus& corpus, const std::filesystem::path& path);
std::string format_jsonl(const Corpus& corpus);

}  // namespace vcomp
