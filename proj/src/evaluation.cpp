#include "vcomp/evaluation.hpp"

#include "vcomp/error.hpp"
#include "vcomp/util.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vcomp {

using nlohmann::json;

double dice(const TokenSet& a, const TokenSet& b) noexcept {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t common = 0;
    for (std::size_t x : a) common += b.count(x);
    return 2.0 * static_cast<double>(common) / static_cast<double>(a.size() + b.size());
}

double span_dice(std::size_t a_first, std::size_t a_last, std::size_t b_first, std::size_t b_last) noexcept {
    const std::size_t lo = std::max(a_first, b_first);
    const std::size_t hi = std::min(a_last, b_last);
    const std::size_t common = hi >= lo ? hi - lo + 1 : 0;
    return 2.0 * static_cast<double>(common) / static_cast<double>((a_last - a_first + 1) + (b_last - b_first + 1));
}

TokenSet WordElement::tokens() const {
    TokenSet s;
    for (std::size_t k = first; k <= last; ++k) s.insert(k);
    return s;
}

SplitTarget split_target(const CompositionTarget& target) {
    SplitTarget out;
    for (std::size_t i = 0; i < target.segments.size(); ++i) {
        SentenceHolder holder{i, {}};
        for (const auto& e : target.segments[i].elements) {
            if (e.trigger.is_whole()) {
                holder.ids.push_back(e.effect_key());
            } else {
                out.words.push_back({i, e.trigger.first, e.trigger.last, e.category, e.name});
            }
        }
        if (!holder.ids.empty()) out.holders.push_back(std::move(holder));
    }
    return out;
}

CompositionTarget merge_target(const SplitTarget& split, std::size_t num_segments) {
    CompositionTarget t = CompositionTarget::empty(num_segments);
    for (const auto& h : split.holders) {
        for (const auto& id : h.ids) {
            const auto colon = id.find(':');
            const auto cat = parse_category(std::string_view(id).substr(0, colon));
            if (colon == std::string::npos || !cat) fail(ErrorCode::kParse, "bad effect identifier '" + id + "'");
            t.segments.at(h.segment).elements.push_back({TriggerPosition::whole(), *cat, id.substr(colon + 1)});
        }
    }
    for (const auto& w : split.words) {
        t.segments.at(w.segment).elements.push_back({TriggerPosition::span(w.first, w.last), w.category, w.name});
    }
    return t;
}

namespace {

double pair_dice(const WordElement& g, const WordElement& p) { return span_dice(g.first, g.last, p.first, p.last); }

struct Score {
    double total = 0.0;
    std::size_t pairs = 0;
};

bool better(const Score& a, const Score& b) {
    if (std::abs(a.total - b.total) > 1e-12) return a.total > b.total;
    return a.pairs > b.pairs;
}

// Exhaustive max-total-Dice matching of one segment via DP over subsets of
// the column side (at most 16 columns).
std::vector<std::pair<std::size_t, std::size_t>> optimal_segment(const std::vector<std::vector<double>>& w) {
    const std::size_t n = w.size();
    const std::size_t m = n ? w[0].size() : 0;
    const std::size_t full = std::size_t{1} << m;
    std::vector<Score> memo((n + 1) * full);
    std::vector<char> known((n + 1) * full, 0);
    std::vector<int> choice((n + 1) * full, -1);

    auto solve = [&](auto&& self, std::size_t i, std::size_t mask) -> Score {
        if (i == n) return {};
        const std::size_t key = i * full + mask;
        if (known[key]) return memo[key];
        Score best = self(self, i + 1, mask);
        int pick = -1;
        for (std::size_t j = 0; j < m; ++j) {
            if ((mask >> j) & 1U || w[i][j] <= 0.0) continue;
            Score s = self(self, i + 1, mask | (std::size_t{1} << j));
            s.total += w[i][j];
            s.pairs += 1;
            if (better(s, best)) {
                best = s;
                pick = static_cast<int>(j);
            }
        }
        known[key] = 1;
        memo[key] = best;
        choice[key] = pick;
        return best;
    };
    solve(solve, 0, 0);

    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t mask = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const int j = choice[i * full + mask];
        if (j >= 0) {
            out.emplace_back(i, static_cast<std::size_t>(j));
            mask |= std::size_t{1} << j;
        }
    }
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> greedy_segment(const std::vector<std::vector<double>>& w) {
    struct Cand {
        double d;
        std::size_t i, j;
    };
    std::vector<Cand> cands;
    for (std::size_t i = 0; i < w.size(); ++i) {
        for (std::size_t j = 0; j < w[i].size(); ++j) {
            if (w[i][j] > 0.0) cands.push_back({w[i][j], i, j});
        }
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.d != b.d) return a.d > b.d;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });
    std::vector<bool> used_i(w.size(), false), used_j(w.empty() ? 0 : w[0].size(), false);
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& c : cands) {
        if (used_i[c.i] || used_j[c.j]) continue;
        used_i[c.i] = used_j[c.j] = true;
        out.emplace_back(c.i, c.j);
    }
    return out;
}

}  // namespace

Alignment align_word_elements(const std::vector<WordElement>& gt, const std::vector<WordElement>& pred, AlignMode mode) {
    std::map<std::size_t, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> by_segment;
    for (std::size_t i = 0; i < gt.size(); ++i) by_segment[gt[i].segment].first.push_back(i);
    for (std::size_t j = 0; j < pred.size(); ++j) by_segment[pred[j].segment].second.push_back(j);

    Alignment a;
    std::vector<bool> gt_used(gt.size(), false), pred_used(pred.size(), false);
    for (const auto& [seg, idx] : by_segment) {
        const auto& [gi, pj] = idx;
        if (gi.empty() || pj.empty()) continue;
        // Put the smaller side on the columns for the subset DP.
        const bool transpose = pj.size() > gi.size();
        const auto& rows = transpose ? pj : gi;
        const auto& cols = transpose ? gi : pj;
        std::vector<std::vector<double>> w(rows.size(), std::vector<double>(cols.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            for (std::size_t c = 0; c < cols.size(); ++c) {
                w[r][c] = transpose ? pair_dice(gt[cols[c]], pred[rows[r]]) : pair_dice(gt[rows[r]], pred[cols[c]]);
            }
        }
        std::vector<std::pair<std::size_t, std::size_t>> local;
        if (mode == AlignMode::kGreedy && !transpose) {
            local = greedy_segment(w);
        } else if (mode == AlignMode::kGreedy) {
            // Greedy ties are defined on (gt, pred) order, so run it untransposed.
            std::vector<std::vector<double>> wt(cols.size(), std::vector<double>(rows.size()));
            for (std::size_t r = 0; r < rows.size(); ++r) {
                for (std::size_t c = 0; c < cols.size(); ++c) wt[c][r] = w[r][c];
            }
            local = greedy_segment(wt);
            for (auto& [x, y] : local) std::swap(x, y);
        } else if (cols.size() <= 16) {
            local = optimal_segment(w);
        } else {
            // Pathologically crowded segment; the subset DP would not fit.
            local = greedy_segment(w);
        }
        for (auto [r, c] : local) {
            const std::size_t g = transpose ? cols[c] : rows[r];
            const std::size_t p = transpose ? rows[r] : cols[c];
            a.pairs.emplace_back(g, p);
            gt_used[g] = true;
            pred_used[p] = true;
        }
    }
    std::sort(a.pairs.begin(), a.pairs.end());
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (!gt_used[i]) a.unmatched_gt.push_back(i);
    }
    for (std::size_t j = 0; j < pred.size(); ++j) {
        if (!pred_used[j]) a.unmatched_pred.push_back(j);
    }
    return a;
}

double word_accuracy(const std::vector<WordElement>& gt, const std::vector<WordElement>& pred, const Alignment& a) {
    if (gt.empty() && pred.empty()) return 1.0;
    if (gt.empty() || pred.empty()) return 0.0;
    double sum = 0.0;
    for (auto [g, p] : a.pairs) sum += pair_dice(gt[g], pred[p]);
    const std::size_t union_size = gt.size() + pred.size() - a.pairs.size();
    return sum / static_cast<double>(union_size);
}

double word_accuracy(const std::vector<WordElement>& gt, const std::vector<WordElement>& pred, AlignMode mode) {
    return word_accuracy(gt, pred, align_word_elements(gt, pred, mode));
}

double elem_at_word(const std::vector<WordElement>& gt, const std::vector<WordElement>& pred, const Alignment& a,
                    bool strict_name) {
    if (gt.empty()) return 1.0;
    std::size_t hits = 0;
    for (auto [g, p] : a.pairs) {
        const bool same = gt[g].category == pred[p].category && (!strict_name || gt[g].name == pred[p].name);
        if (pair_dice(gt[g], pred[p]) >= 0.5 && same) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(gt.size());
}

namespace {

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t common = 0;
    for (const auto& x : a) common += b.count(x);
    return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

}  // namespace

double elem_at_sentence(const std::vector<SentenceHolder>& gt, const std::vector<SentenceHolder>& pred) {
    if (gt.empty()) return 1.0;
    std::map<std::size_t, std::set<std::string>> pred_by_segment;
    for (const auto& h : pred) {
        auto s = h.id_set();
        pred_by_segment[h.segment].insert(s.begin(), s.end());
    }
    double sum = 0.0;
    for (const auto& h : gt) {
        const auto it = pred_by_segment.find(h.segment);
        sum += jaccard(h.id_set(), it == pred_by_segment.end() ? std::set<std::string>{} : it->second);
    }
    return sum / static_cast<double>(gt.size());
}

SampleMetrics evaluate_sample(const CompositionTarget& gt, const CompositionTarget& pred, AlignMode mode) {
    if (gt.segments.size() != pred.segments.size()) {
        fail(ErrorCode::kValidation, "prediction has " + std::to_string(pred.segments.size()) +
                                         " segments, ground truth " + std::to_string(gt.segments.size()));
    }
    const SplitTarget g = split_target(gt);
    const SplitTarget p = split_target(pred);
    const Alignment a = align_word_elements(g.words, p.words, mode);

    SampleMetrics m;
    m.word_accuracy = word_accuracy(g.words, p.words, a);
    m.elem_at_word = elem_at_word(g.words, p.words, a, false);
    m.elem_at_word_name = elem_at_word(g.words, p.words, a, true);
    m.elem_at_sentence = elem_at_sentence(g.holders, p.holders);
    m.word_degenerate = g.words.empty();
    m.sentence_degenerate = g.holders.empty();
    m.gt_word = g.words.size();
    m.pred_word = p.words.size();
    m.matched = a.pairs.size();
    for (auto [gi, pi] : a.pairs) {
        const double d = pair_dice(g.words[gi], p.words[pi]);
        m.matched_dice += d;
        if (d >= 0.5 && g.words[gi].category == p.words[pi].category) {
            ++m.word_hits;
            if (g.words[gi].name == p.words[pi].name) ++m.word_hits_name;
        }
    }
    m.gt_holders = g.holders.size();
    m.holder_jaccard_sum = m.elem_at_sentence * static_cast<double>(m.gt_holders);
    return m;
}

double overall_score(double wa, double ew, double es) noexcept { return 100.0 * (wa + ew + es); }

MetricReport evaluate_corpus(const std::vector<CompositionTarget>& gt, const std::vector<CompositionTarget>& pred,
                             const EvalOptions& opts, const std::vector<std::string>& sample_ids) {
    if (gt.size() != pred.size()) {
        fail(ErrorCode::kValidation, "sample count mismatch: " + std::to_string(gt.size()) + " ground-truth vs " +
                                         std::to_string(pred.size()) + " predictions");
    }
    MetricReport r;
    r.micro = opts.micro;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        SampleMetrics m = evaluate_sample(gt[i], pred[i], opts.align);
        if (i < sample_ids.size()) m.sample_id = sample_ids[i];
        r.per_sample.push_back(std::move(m));
    }
    const double n = static_cast<double>(r.per_sample.size());
    for (const auto& m : r.per_sample) {
        r.degenerate_word += m.word_degenerate ? 1 : 0;
        r.degenerate_sentence += m.sentence_degenerate ? 1 : 0;
        r.diagnostics += m.diagnostics;
    }
    if (r.per_sample.empty()) return r;

    if (!opts.micro) {
        for (const auto& m : r.per_sample) {
            r.word_accuracy += m.word_accuracy;
            r.elem_at_word += m.elem_at_word;
            r.elem_at_sentence += m.elem_at_sentence;
            r.elem_at_word_name += m.elem_at_word_name;
        }
        r.word_accuracy /= n;
        r.elem_at_word /= n;
        r.elem_at_sentence /= n;
        r.elem_at_word_name /= n;
    } else {
        double dice_sum = 0, jac_sum = 0;
        std::size_t union_size = 0, gt_words = 0, hits = 0, hits_name = 0, holders = 0;
        for (const auto& m : r.per_sample) {
            dice_sum += m.matched_dice;
            union_size += m.gt_word + m.pred_word - m.matched;
            gt_words += m.gt_word;
            hits += m.word_hits;
            hits_name += m.word_hits_name;
            jac_sum += m.holder_jaccard_sum;
            holders += m.gt_holders;
        }
        r.word_accuracy = union_size ? dice_sum / static_cast<double>(union_size) : 1.0;
        r.elem_at_word = gt_words ? static_cast<double>(hits) / static_cast<double>(gt_words) : 1.0;
        r.elem_at_word_name = gt_words ? static_cast<double>(hits_name) / static_cast<double>(gt_words) : 1.0;
        r.elem_at_sentence = holders ? jac_sum / static_cast<double>(holders) : 1.0;
    }
    r.overall = overall_score(r.word_accuracy, r.elem_at_word, r.elem_at_sentence);
    return r;
}

MetricReport evaluate_texts(const Corpus& gt, const std::vector<std::string>& pred_texts, const EffectPool& pool,
                            const FormatOptions& format, const EvalOptions& opts) {
    if (gt.size() != pred_texts.size()) {
        fail(ErrorCode::kValidation, "sample count mismatch: " + std::to_string(gt.size()) + " ground-truth vs " +
                                         std::to_string(pred_texts.size()) + " predictions");
    }
    std::vector<CompositionTarget> gts, preds;
    std::vector<std::string> ids;
    std::vector<ParseDiagnostics> diags;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const auto sentences = gt[i].sentences();
        ParseResult pr = parse(pred_texts[i], sentences, pool, format, false);
        gts.push_back(gt[i].target);
        preds.push_back(std::move(pr.target));
        diags.push_back(pr.diagnostics);
        ids.push_back(gt[i].sample_id);
    }
    MetricReport r = evaluate_corpus(gts, preds, opts, ids);
    r.diagnostics = {};
    for (std::size_t i = 0; i < diags.size(); ++i) {
        r.per_sample[i].diagnostics = diags[i];
        r.diagnostics += diags[i];
    }
    return r;
}

std::vector<PredictionRecord> parse_predictions(std::string_view jsonl) {
    std::vector<PredictionRecord> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= jsonl.size()) {
        std::size_t nl = jsonl.find('\n', pos);
        if (nl == std::string_view::npos) nl = jsonl.size();
        const std::string_view line = jsonl.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            fail(ErrorCode::kParse, "predictions line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("sample_id")) {
            fail(ErrorCode::kSchema, "predictions line " + std::to_string(line_no) + ": expected an object with sample_id");
        }
        PredictionRecord r;
        if (j.contains("segments")) {
            Sample s = sample_from_json_line(line, line_no - 1);
            r.sample_id = s.sample_id;
            r.target = std::move(s.target);
        } else if (j.contains("text") && j["text"].is_string() && j["sample_id"].is_string()) {
            r.sample_id = j["sample_id"].get<std::string>();
            r.text = j["text"].get<std::string>();
        } else {
            fail(ErrorCode::kSchema, "predictions line " + std::to_string(line_no) + ": needs \"text\" or \"segments\"");
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path) {
    return parse_predictions(read_file(path.string()));
}

std::string format_predictions(const std::vector<PredictionRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += json{{"sample_id", r.sample_id}, {"text", r.text}}.dump();
        out += '\n';
    }
    return out;
}

MetricReport evaluate_predictions(const Corpus& gt, const std::vector<PredictionRecord>& pred, const EffectPool& pool,
                                  const FormatOptions& format, const EvalOptions& opts) {
    std::map<std::string, const PredictionRecord*> by_id;
    for (const auto& r : pred) {
        if (!by_id.emplace(r.sample_id, &r).second) fail(ErrorCode::kDuplicate, "duplicate prediction for '" + r.sample_id + "'");
    }
    std::vector<CompositionTarget> gts, preds;
    std::vector<std::string> ids;
    std::vector<ParseDiagnostics> diags;
    for (const auto& s : gt) {
        const auto it = by_id.find(s.sample_id);
        if (it == by_id.end()) fail(ErrorCode::kNotFound, "no prediction for sample '" + s.sample_id + "'");
        const PredictionRecord& r = *it->second;
        if (r.target) {
            if (r.target->segments.size() != s.segments.size()) {
                fail(ErrorCode::kValidation, "prediction for '" + s.sample_id + "' has a different segment count");
            }
            preds.push_back(*r.target);
            diags.emplace_back();
        } else {
            ParseResult pr = parse(r.text, s.sentences(), pool, format, false);
            preds.push_back(std::move(pr.target));
            diags.push_back(pr.diagnostics);
        }
        gts.push_back(s.target);
        ids.push_back(s.sample_id);
    }
    if (by_id.size() != gt.size()) fail(ErrorCode::kValidation, "predictions for samples missing from ground truth");
    MetricReport r = evaluate_corpus(gts, preds, opts, ids);
    r.diagnostics = {};
    for (std::size_t i = 0; i < diags.size(); ++i) {
        r.per_sample[i].diagnostics = diags[i];
        r.diagnostics += diags[i];
    }
    return r;
}

MeanSem report_sem(const std::vector<double>& values) {
    if (values.size() < 2) fail(ErrorCode::kInvalidArgument, "standard error needs at least 2 runs");
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    return {mean, sd / std::sqrt(n)};
}

MetricReport combine_runs(const std::vector<MetricReport>& runs) {
    if (runs.size() < 2) fail(ErrorCode::kInvalidArgument, "combining runs needs at least 2 reports");
    MetricReport out = runs.front();
    const auto collect = [&](auto field) {
        std::vector<double> v;
        for (const auto& r : runs) v.push_back(r.*field);
        return report_sem(v);
    };
    out.sem["word_accuracy"] = collect(&MetricReport::word_accuracy);
    out.sem["elem_at_word"] = collect(&MetricReport::elem_at_word);
    out.sem["elem_at_sentence"] = collect(&MetricReport::elem_at_sentence);
    out.sem["overall"] = collect(&MetricReport::overall);
    out.sem["elem_at_word_name"] = collect(&MetricReport::elem_at_word_name);
    out.word_accuracy = out.sem["word_accuracy"].mean;
    out.elem_at_word = out.sem["elem_at_word"].mean;
    out.elem_at_sentence = out.sem["elem_at_sentence"].mean;
    out.overall = out.sem["overall"].mean;
    out.elem_at_word_name = out.sem["elem_at_word_name"].mean;
    out.runs = runs.size();
    return out;
}

CorpusStats measure_behavior(const std::vector<CompositionTarget>& predictions) {
    return compute_target_stats(predictions);
}

namespace {

json diag_json(const ParseDiagnostics& d) {
    return {{"malformed_lines", d.malformed_lines},
            {"malformed_elements", d.malformed_elements},
            {"unknown_effect", d.unknown_effect},
            {"ungroundable_trigger", d.ungroundable_trigger},
            {"duplicate_segment", d.duplicate_segment},
            {"segment_out_of_range", d.segment_out_of_range},
            {"extra_lines", d.extra_lines},
            {"dropped", d.dropped()}};
}

ParseDiagnostics diag_from_json(const json& j) {
    ParseDiagnostics d;
    d.malformed_lines = j.value("malformed_lines", std::size_t{0});
    d.malformed_elements = j.value("malformed_elements", std::size_t{0});
    d.unknown_effect = j.value("unknown_effect", std::size_t{0});
    d.ungroundable_trigger = j.value("ungroundable_trigger", std::size_t{0});
    d.duplicate_segment = j.value("duplicate_segment", std::size_t{0});
    d.segment_out_of_range = j.value("segment_out_of_range", std::size_t{0});
    d.extra_lines = j.value("extra_lines", std::size_t{0});
    return d;
}

}  // namespace

std::string report_to_json(const MetricReport& r, bool include_per_sample) {
    json j;
    j["word_accuracy"] = r.word_accuracy;
    j["elem_at_word"] = r.elem_at_word;
    j["elem_at_sentence"] = r.elem_at_sentence;
    j["overall"] = r.overall;
    j["elem_at_word_name"] = r.elem_at_word_name;
    j["aggregation"] = r.micro ? "micro" : "macro";
    j["num_samples"] = r.per_sample.size();
    j["degenerate_word"] = r.degenerate_word;
    j["degenerate_sentence"] = r.degenerate_sentence;
    j["diagnostics"] = diag_json(r.diagnostics);
    j["runs"] = r.runs;
    if (!r.sem.empty()) {
        json s = json::object();
        for (const auto& [k, v] : r.sem) s[k] = {{"mean", v.mean}, {"sem", v.sem}};
        j["sem"] = s;
    }
    if (include_per_sample) {
        json rows = json::array();
        for (const auto& m : r.per_sample) {
            rows.push_back({{"sample_id", m.sample_id},
                            {"word_accuracy", m.word_accuracy},
                            {"elem_at_word", m.elem_at_word},
                            {"elem_at_sentence", m.elem_at_sentence},
                            {"elem_at_word_name", m.elem_at_word_name},
                            {"word_degenerate", m.word_degenerate},
                            {"sentence_degenerate", m.sentence_degenerate},
                            {"gt_word", m.gt_word},
                            {"pred_word", m.pred_word},
                            {"matched", m.matched},
                            {"gt_holders", m.gt_holders},
                            {"diagnostics", diag_json(m.diagnostics)}});
        }
        j["per_sample"] = rows;
    }
    return j.dump(2);
}

MetricReport report_from_json(std::string_view text) {
    const json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail(ErrorCode::kSchema, "metric report is not a JSON object");
    MetricReport r;
    try {
        r.word_accuracy = j.at("word_accuracy").get<double>();
        r.elem_at_word = j.at("elem_at_word").get<double>();
        r.elem_at_sentence = j.at("elem_at_sentence").get<double>();
        r.overall = j.at("overall").get<double>();
        r.elem_at_word_name = j.value("elem_at_word_name", 0.0);
        r.micro = j.value("aggregation", std::string("macro")) == "micro";
        r.degenerate_word = j.value("degenerate_word", std::size_t{0});
        r.degenerate_sentence = j.value("degenerate_sentence", std::size_t{0});
        r.runs = j.value("runs", std::size_t{1});
        if (j.contains("diagnostics")) r.diagnostics = diag_from_json(j.at("diagnostics"));
        if (j.contains("sem")) {
            for (const auto& [k, v] : j.at("sem").items()) r.sem[k] = {v.at("mean").get<double>(), v.at("sem").get<double>()};
        }
        if (j.contains("per_sample")) {
            for (const auto& row : j.at("per_sample")) {
                SampleMetrics m;
                m.sample_id = row.value("sample_id", std::string());
                m.word_accuracy = row.at("word_accuracy").get<double>();
                m.elem_at_word = row.at("elem_at_word").get<double>();
                m.elem_at_sentence = row.at("elem_at_sentence").get<double>();
                m.elem_at_word_name = row.value("elem_at_word_name", 0.0);
                m.word_degenerate = row.value("word_degenerate", false);
                m.sentence_degenerate = row.value("sentence_degenerate", false);
                m.gt_word = row.value("gt_word", std::size_t{0});
                m.pred_word = row.value("pred_word", std::size_t{0});
                m.matched = row.value("matched", std::size_t{0});
                m.gt_holders = row.value("gt_holders", std::size_t{0});
                if (row.contains("diagnostics")) m.diagnostics = diag_from_json(row.at("diagnostics"));
                r.per_sample.push_back(std::move(m));
            }
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::kSchema, std::string("metric report: ") + e.what());
    }
    return r;
}

void write_report(const MetricReport& report, const std::filesystem::path& path) {
    write_file(path.string(), report_to_json(report) + "\n");
}

std::string reports_to_csv(const std::vector<std::pair<std::string, MetricReport>>& rows) {
    std::string out = "method,word_accuracy,elem_at_word,elem_at_sentence,overall\n";
    char buf[256];
    for (const auto& [name, r] : rows) {
        std::snprintf(buf, sizeof buf, ",%.2f,%.2f,%.2f,%.2f\n", 100.0 * r.word_accuracy, 100.0 * r.elem_at_word,
                      100.0 * r.elem_at_sentence, r.overall);
        out += name;
        out += buf;
    }
    return out;
}

std::string format_sem_lines(const MetricReport& r) {
    std::string out;
    char buf[160];
    for (const char* key : {"word_accuracy", "elem_at_word", "elem_at_sentence", "overall"}) {
        const auto it = r.sem.find(key);
        if (it == r.sem.end()) continue;
        // components in percent, like the overall score
        const double scale = std::string_view(key) == "overall" ? 1.0 : 100.0;
        std::snprintf(buf, sizeof buf, "%s: %.2f ± %.2f\n", key, scale * it->second.mean, scale * it->second.sem);
        out += buf;
    }
    return out;
}

}  // namespace vcomp
