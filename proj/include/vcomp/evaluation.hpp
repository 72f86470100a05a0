#pragma once

#include "vcomp/composition_grammar.hpp"
#include "vcomp/dataset.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace vcomp {

using TokenSet = std::set<std::size_t>;

/// 2|a & b| / (|a| + |b|); two empty sets score 1.
double dice(const TokenSet& a, const TokenSet& b) noexcept;
double span_dice(std::size_t a_first, std::size_t a_last, std::size_t b_first, std::size_t b_last) noexcept;

/// Word-span element of a target.
struct WordElement {
    std::size_t segment = 0;
    std::size_t first = 0;
    std::size_t last = 0;
    EffectCategory category = EffectCategory::kTextEffect;
    std::string name;

    TokenSet tokens() const;
    friend bool operator==(const WordElement&, const WordElement&) = default;
};

/// Whole-sentence elements of one segment, as "category:name" identifiers
/// (duplicates kept so the split is lossless).
struct SentenceHolder {
    std::size_t segment = 0;
    std::vector<std::string> ids;

    std::set<std::string> id_set() const { return {ids.begin(), ids.end()}; }
    friend bool operator==(const SentenceHolder&, const SentenceHolder&) = default;
};

struct SplitTarget {
    std::vector<WordElement> words;
    std::vector<SentenceHolder> holders;  // only segments with at least one whole-sentence element
};

SplitTarget split_target(const CompositionTarget& target);
/// Inverse of split_target up to element order within a segment (whole-sentence
/// elements first, then word elements, each in their split order).
CompositionTarget merge_target(const SplitTarget& split, std::size_t num_segments);

enum class AlignMode : std::uint8_t {
    kOptimal,  // max total Dice per segment; ties prefer more pairs
    kGreedy,   // descending Dice, ties by earlier gt then earlier pred
};

struct Alignment {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (gt index, pred index), sorted by gt index
    std::vector<std::size_t> unmatched_gt;
    std::vector<std::size_t> unmatched_pred;
};

/// One-to-one matching within each segment. Pairs with Dice 0 are never matched.
Alignment align_word_elements(const std::vector<WordElement>& gt, const std::vector<WordElement>& pred,
                              AlignMode mode = AlignMode::kOptimal);

double word_accuracy(const std::vector<WordElement>& gt, const std::vector<WordElement>& pred, const Alignment& a);
double word_accuracy(const std::vector<WordElement>& gt, const std::vector<WordElement>& pred,
                     AlignMode mode = AlignMode::kOptimal);
/// Fraction of gt word elements whose partner has Dice >= 0.5 and the same
/// category (or, with `strict_name`, the same category and name). 1 when gt
/// has no word elements.
double elem_at_word(const std::vector<WordElement>& gt, const std::vector<WordElement>& pred, const Alignment& a,
                    bool strict_name = false);
/// Mean Jaccard of identifier sets over gt holders; 1 when gt has none.
double elem_at_sentence(const std::vector<SentenceHolder>& gt, const std::vector<SentenceHolder>& pred);

struct SampleMetrics {
    std::string sample_id;
    double word_accuracy = 0.0;
    double elem_at_word = 0.0;
    double elem_at_sentence = 0.0;
    double elem_at_word_name = 0.0;  // stricter auxiliary: full-name equality
    bool word_degenerate = false;      // gt has no word elements
    bool sentence_degenerate = false;  // gt has no whole-sentence elements
    std::size_t gt_word = 0;
    std::size_t pred_word = 0;
    std::size_t matched = 0;
    double matched_dice = 0.0;
    std::size_t gt_holders = 0;
    double holder_jaccard_sum = 0.0;
    std::size_t word_hits = 0;
    std::size_t word_hits_name = 0;
    ParseDiagnostics diagnostics;
};

SampleMetrics evaluate_sample(const CompositionTarget& gt, const CompositionTarget& pred,
                              AlignMode mode = AlignMode::kOptimal);

/// 100 * (word accuracy + elem@word + elem@sentence), components as fractions.
double overall_score(double word_accuracy, double elem_at_word, double elem_at_sentence) noexcept;

struct MeanSem {
    double mean = 0.0;
    double sem = 0.0;
};

struct EvalOptions {
    AlignMode align = AlignMode::kOptimal;
    bool micro = false;  // pool numerators/denominators across samples
};

struct MetricReport {
    double word_accuracy = 0.0;
    double elem_at_word = 0.0;
    double elem_at_sentence = 0.0;
    double overall = 0.0;
    double elem_at_word_name = 0.0;
    bool micro = false;
    std::size_t degenerate_word = 0;
    std::size_t degenerate_sentence = 0;
    ParseDiagnostics diagnostics;
    std::vector<SampleMetrics> per_sample;
    /// Filled by combine_runs when the report summarizes repeated runs.
    std::map<std::string, MeanSem> sem;
    std::size_t runs = 1;
};

MetricReport evaluate_corpus(const std::vector<CompositionTarget>& gt, const std::vector<CompositionTarget>& pred,
                             const EvalOptions& opts = {}, const std::vector<std::string>& sample_ids = {});

/// Lenient-parses each prediction text against its gt sample's sentences.
MetricReport evaluate_texts(const Corpus& gt, const std::vector<std::string>& pred_texts, const EffectPool& pool,
                            const FormatOptions& format, const EvalOptions& opts = {});

/// One line of a predictions file: composition text, or the target of a full
/// dataset record (so a dataset file can stand in for predictions).
struct PredictionRecord {
    std::string sample_id;
    std::string text;
    std::optional<CompositionTarget> target;
};

/// JSON lines, each either {"sample_id", "text"} or a dataset record.
std::vector<PredictionRecord> parse_predictions(std::string_view jsonl);
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path);
std::string format_predictions(const std::vector<PredictionRecord>& records);

/// Matches predictions to gt samples by sample_id. Every gt sample needs
/// exactly one prediction; texts are lenient-parsed.
MetricReport evaluate_predictions(const Corpus& gt, const std::vector<PredictionRecord>& pred, const EffectPool& pool,
                                  const FormatOptions& format, const EvalOptions& opts = {});

/// Sample standard deviation / sqrt(n). Throws Error(kInvalidArgument) for n < 2.
MeanSem report_sem(const std::vector<double>& values);

/// Mean report over repeated runs with per-metric SEM; per-sample rows from the first run.
MetricReport combine_runs(const std::vector<MetricReport>& runs);

/// Trigger-ratio histogram and effect usage of predictions.
CorpusStats measure_behavior(const std::vector<CompositionTarget>& predictions);

std::string report_to_json(const MetricReport& report, bool include_per_sample = true);
MetricReport report_from_json(std::string_view text);
void write_report(const MetricReport& report, const std::filesystem::path& path);

/// Table-style CSV: one row per named report, metrics in percent.
std::string reports_to_csv(const std::vector<std::pair<std::string, MetricReport>>& rows);
/// "name: word_accuracy 37.88 ± 0.54, ..." lines for a repeated-run report.
std::string format_sem_lines(const MetricReport& report);

}  // namespace vcomp
