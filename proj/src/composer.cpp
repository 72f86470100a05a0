#include "vcomp/composer.hpp"

#include "composer_model.hpp"
#include "vcomp/decode_constraint.hpp"
#include "vcomp/error.hpp"
#include "vcomp/util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace vcomp {

SequenceInput EncodedExample::sequence() const {
    SequenceInput in;
    const std::size_t n = context.slots.size() + target.size();
    in.kinds.reserve(n);
    in.tokens.reserve(n);
    in.features.reserve(n);
    in.segments.reserve(n);
    in.labels.reserve(n);
    for (const auto& s : context.slots) {
        in.kinds.push_back(static_cast<std::uint8_t>(s.kind));
        in.tokens.push_back(s.token);
        const bool media = s.kind == SlotKind::kVisual || s.kind == SlotKind::kAudio;
        in.features.push_back(media ? &s.features : nullptr);
        in.segments.push_back(s.kind == SlotKind::kPrompt ? -1 : static_cast<std::int32_t>(s.segment_index));
        in.labels.push_back(-1);
    }
    // <compose> predicts the first target token; the final <end> is never an input.
    for (std::size_t i = 0; i < target.size(); ++i) {
        in.kinds.push_back(kTargetKind);
        in.tokens.push_back(i == 0 ? Vocabulary::kCompose : target[i - 1]);
        in.features.push_back(nullptr);
        in.segments.push_back(target_segments.empty() ? -1 : target_segments[i]);
        in.labels.push_back(target[i]);
    }
    return in;
}

Composer::Composer(const ModelConfig& config, Vocabulary vocab, const FormatOptions& format,
                   const ContextOptions& context)
    : config_(config), vocab_(std::move(vocab)), format_(format), context_(context) {
    if (format_.order == OrderMode::kRandom && !format_.seed) {
        fail(ErrorCode::kInvalidArgument, "random target order needs an explicit seed");
    }
    context_.context_window = config_.context_window;
    layout_ = ParamLayout::build(config_, vocab_.size());
    detail::init_parameters(config_, layout_, params_);
}

namespace detail {

std::int32_t LineAnchor::next(TokenId input_token) {
    if (!enabled_) return -1;
    const std::string& piece = vocab_.piece(input_token);
    if (after_open_ && !piece.empty() && piece.size() <= 6 &&
        std::all_of(piece.begin(), piece.end(), [](char ch) { return ch >= '0' && ch <= '9'; })) {
        const std::size_t n = std::stoul(piece);
        current_ = n < max_ ? static_cast<std::int32_t>(n) : -1;
    }
    after_open_ = piece == "[";
    const std::int32_t out = current_;
    if (piece.find('\n') != std::string::npos) current_ = -1;
    return out;
}

}  // namespace detail

namespace {

Projector projector_from(const ParamVector& params, const ParamLayout& layout, MediaModality m,
                         const char* w_name, const char* b_name) {
    const ParamTensor& w = layout.get(w_name);
    const ParamTensor& b = layout.get(b_name);
    Projector p = Projector::zeros(m, w.cols, w.rows);
    for (std::size_t i = 0; i < w.rows; ++i) {
        for (std::size_t j = 0; j < w.cols; ++j) {
            p.weight(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = params[w.offset + i * w.cols + j];
        }
    }
    for (std::size_t j = 0; j < b.cols; ++j) p.bias(static_cast<Eigen::Index>(j)) = params[b.offset + j];
    return p;
}

}  // namespace

Projector Composer::visual_projector() const {
    return projector_from(params_, layout_, MediaModality::kVisual, "proj_v.w", "proj_v.b");
}

Projector Composer::audio_projector() const {
    return projector_from(params_, layout_, MediaModality::kAudio, "proj_a.w", "proj_a.b");
}

std::string Composer::target_text(const Sample& sample, std::uint64_t order_seed) const {
    const auto sentences = sample.sentences();
    const std::uint64_t seed = hash_combine(format_.seed.value_or(0), order_seed);
    CompositionTarget t = order_target(sample, format_.order, seed);
    if (format_.trigger_mode == TriggerMode::kWords) t = canonicalize_spans(std::move(t), sentences);
    return serialize(t, sentences, format_);
}

EncodedExample Composer::encode(const Sample& sample, std::string_view prompt_text, const ProviderSet& providers,
                                std::uint64_t order_seed) const {
    EncodedExample ex;
    ex.sample_id = sample.sample_id;
    ex.num_segments = sample.segments.size();
    ex.context = assemble_context(sample, prompt_text, vocab_, providers, context_);
    for (const auto& s : ex.context.slots) {
        if (s.kind == SlotKind::kVisual && s.features.size() != config_.visual_dim) {
            fail(ErrorCode::kInvalidArgument, "sample '" + sample.sample_id + "': visual features have " +
                                                  std::to_string(s.features.size()) + " dims, model expects " +
                                                  std::to_string(config_.visual_dim));
        }
        if (s.kind == SlotKind::kAudio && s.features.size() != config_.audio_dim) {
            fail(ErrorCode::kInvalidArgument, "sample '" + sample.sample_id + "': audio features have " +
                                                  std::to_string(s.features.size()) + " dims, model expects " +
                                                  std::to_string(config_.audio_dim));
        }
    }
    ex.target = vocab_.encode(target_text(sample, order_seed));
    ex.target.push_back(Vocabulary::kEnd);
    if (config_.index_anchor) {
        detail::LineAnchor anchor(vocab_, config_.max_segments, true);
        ex.target_segments.push_back(anchor.next(Vocabulary::kCompose));
        for (std::size_t i = 0; i + 1 < ex.target.size(); ++i) ex.target_segments.push_back(anchor.next(ex.target[i]));
    }
    const std::size_t total = ex.context.slots.size() + ex.target.size();
    if (total > config_.context_window) {
        fail(ErrorCode::kTooLong, "sample '" + sample.sample_id + "': context plus target is " + std::to_string(total) +
                                      " positions, window is " + std::to_string(config_.context_window));
    }
    return ex;
}

template <typename Real>
Real Composer::batch_loss(const AlignedVector<Real>& params, const std::vector<SequenceInput>& batch,
                          AlignedVector<Real>* grad) const {
    if (params.size() != layout_.total) fail(ErrorCode::kInvalidArgument, "parameter vector has the wrong size");
    std::size_t total = 0;
    for (const auto& in : batch) {
        for (TokenId l : in.labels) total += l >= 0 ? 1 : 0;
    }
    if (grad != nullptr) grad->assign(params.size(), Real(0));
    if (total == 0) return Real(0);
    const auto off = detail::Offsets::of(layout_, config_.depth);
    const Real scale = Real(1) / static_cast<Real>(total);
    detail::LossStats st;
    for (const auto& in : batch) {
        st += detail::forward_backward<Real>(config_, off, vocab_.size(), params.data(), in, scale,
                                             grad != nullptr ? grad->data() : nullptr, nullptr);
    }
    return static_cast<Real>(st.nll / static_cast<double>(total));
}

template float Composer::batch_loss<float>(const ParamVector&, const std::vector<SequenceInput>&,
                                           ParamVector*) const;
template double Composer::batch_loss<double>(const AlignedVector<double>&, const std::vector<SequenceInput>&,
                                             AlignedVector<double>*) const;

double Composer::loss(const std::vector<EncodedExample>& batch, ParamVector* grad) const {
    std::vector<SequenceInput> seqs;
    seqs.reserve(batch.size());
    for (const auto& ex : batch) seqs.push_back(ex.sequence());
    return batch_loss<float>(params_, seqs, grad);
}

std::vector<float> Composer::logits(const SequenceInput& input) const {
    const auto off = detail::Offsets::of(layout_, config_.depth);
    std::vector<float> out;
    detail::forward_backward<float>(config_, off, vocab_.size(), params_.data(), input, 1.0f, nullptr, &out);
    return out;
}

double Composer::token_accuracy(const std::vector<EncodedExample>& batch) const {
    const auto off = detail::Offsets::of(layout_, config_.depth);
    detail::LossStats st;
    for (const auto& ex : batch) {
        st += detail::forward_backward<float>(config_, off, vocab_.size(), params_.data(), ex.sequence(), 1.0f,
                                              nullptr, nullptr);
    }
    return st.count == 0 ? 0.0 : static_cast<double>(st.correct) / static_cast<double>(st.count);
}

namespace {

// Picks the next token. Pad, unknown and <compose> are never emitted.
TokenId choose_token(const std::vector<float>& logits, const Vocabulary& vocab, const DecodeOptions& decode,
                     const CompositionConstraint* constraint, const std::string& text, Rng& rng) {
    const auto allowed = [&](TokenId id) {
        if (id == Vocabulary::kEnd) return constraint == nullptr || constraint->accepts_end(text);
        if (vocab.is_special(id)) return false;
        return constraint == nullptr || constraint->accepts(text, vocab.piece(id));
    };
    const std::size_t v = logits.size();
    const bool greedy = decode.mode == DecodeOptions::Mode::kGreedy || !(decode.temperature > 0.0);
    if (greedy) {
        std::vector<TokenId> order(v);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](TokenId a, TokenId b) {
            return logits[static_cast<std::size_t>(a)] > logits[static_cast<std::size_t>(b)];
        });
        for (TokenId id : order) {
            if (allowed(id)) return id;
        }
        fail(ErrorCode::kInternal, "no admissible token");
    }
    std::vector<double> w(v, 0.0);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < v; ++i) {
        if (allowed(static_cast<TokenId>(i))) mx = std::max(mx, static_cast<double>(logits[i]));
    }
    if (!std::isfinite(mx)) fail(ErrorCode::kInternal, "no admissible token");
    double total = 0.0;
    for (std::size_t i = 0; i < v; ++i) {
        if (!allowed(static_cast<TokenId>(i))) continue;
        w[i] = std::exp((static_cast<double>(logits[i]) - mx) / decode.temperature);
        total += w[i];
    }
    double u = rng.uniform() * total;
    std::size_t last = 0;
    for (std::size_t i = 0; i < v; ++i) {
        if (w[i] <= 0.0) continue;
        last = i;
        if (u < w[i]) return static_cast<TokenId>(i);
        u -= w[i];
    }
    return static_cast<TokenId>(last);
}

}  // namespace

ComposeResult Composer::compose_text(const Sample& sample, std::string_view prompt_text, const DecodeOptions& decode,
                                     const EffectPool& pool, const ProviderSet& providers) const {
    const auto sentences = sample.sentences();
    const ContextSequence ctx = assemble_context(sample, prompt_text, vocab_, providers, context_);
    ComposeResult r;
    r.context_tokens = ctx.slots.size();
    r.budget = decode.max_new_tokens.value_or(generation_budget(sample.segments.size()));
    if (r.context_tokens + 1 + r.budget > config_.context_window) {
        fail(ErrorCode::kTooLong, "sample '" + sample.sample_id + "': context of " + std::to_string(r.context_tokens) +
                                      " slots leaves no room for a generation budget of " + std::to_string(r.budget) +
                                      " in a window of " + std::to_string(config_.context_window));
    }

    const auto off = detail::Offsets::of(layout_, config_.depth);
    detail::IncrementalDecoder dec(config_, off, vocab_.size(), params_.data());
    for (const auto& s : ctx.slots) {
        const bool media = s.kind == SlotKind::kVisual || s.kind == SlotKind::kAudio;
        const std::int32_t seg = s.kind == SlotKind::kPrompt ? -1 : static_cast<std::int32_t>(s.segment_index);
        dec.step(static_cast<std::uint8_t>(s.kind), s.token, media ? &s.features : nullptr, seg, nullptr);
    }
    std::vector<float> logits;
    detail::LineAnchor anchor(vocab_, config_.max_segments, config_.index_anchor);
    dec.step(kTargetKind, Vocabulary::kCompose, nullptr, anchor.next(Vocabulary::kCompose), &logits);

    std::optional<CompositionConstraint> constraint;
    if (decode.constrained) constraint.emplace(sentences, pool, format_);
    Rng rng(hash_combine(decode.seed, fnv1a64(sample.sample_id)));
    bool ended = false;
    for (std::size_t i = 0; i < r.budget; ++i) {
        const TokenId next = choose_token(logits, vocab_, decode, constraint ? &*constraint : nullptr, r.text, rng);
        if (next == Vocabulary::kEnd) {
            ended = true;
            break;
        }
        r.text += vocab_.piece(next);
        ++r.generated_tokens;
        if (i + 1 < r.budget) dec.step(kTargetKind, next, nullptr, anchor.next(next), &logits);
    }
    r.hit_budget = !ended;
    if (constraint) {
        if (!ended) r.text = constraint->finalize(r.text);
        try {
            r.parsed = parse(r.text, sentences, pool, format_, true);
        } catch (const Error& e) {
            fail(ErrorCode::kInternal, "constrained output of '" + sample.sample_id + "' failed strict parse: " + e.what());
        }
    } else {
        r.parsed = parse(r.text, sentences, pool, format_, false);
    }
    return r;
}

ComposeResult Composer::compose(const Sample& sample, const PromptSpec& prompt, const DecodeOptions& decode,
                                const EffectPool& pool, const ProviderSet& providers) const {
    return compose_text(sample, render_prompt(prompt), decode, pool, providers);
}

Vocabulary build_vocabulary(const Corpus& corpus, const EffectPool* pool, std::size_t max_index) {
    std::set<std::string> words;
    for (const auto& s : corpus) {
        for (const auto& seg : s.segments) {
            for (auto& w : seg.tokens()) words.insert(std::move(w));
        }
        for (const auto& seg : s.target.segments) {
            for (const auto& e : seg.elements) words.insert(e.name);
        }
    }
    if (pool != nullptr) {
        for (const auto& e : pool->effects()) words.insert(e.name);
    }
    return Vocabulary::build(std::vector<std::string>(words.begin(), words.end()), max_index);
}

std::vector<EncodedExample> encode_corpus(const Composer& model, const Corpus& corpus, const ProviderSet& providers,
                                          std::uint64_t order_seed) {
    std::vector<EncodedExample> out;
    out.reserve(corpus.size());
    for (const auto& sample : corpus) {
        const std::string prompt = sample.prompt.value_or("");
        try {
            out.push_back(model.encode(sample, prompt, providers, order_seed));
            continue;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::kTooLong) throw;
        }
        // Keep the longest leading run of segments whose context and target lines fit.
        const auto lines = split(model.target_text(sample, order_seed), '\n');
        std::vector<std::size_t> cost(sample.segments.size());
        for (std::size_t i = 0; i < cost.size(); ++i) {
            cost[i] = segment_slot_count(sample.segments[i], model.vocab(), model.context_options()) +
                      model.vocab().encode(i < lines.size() ? lines[i] : "").size() + 1;
        }
        const std::size_t fixed = model.vocab().encode_words(prompt).size() + 1;
        const Sample cut = truncate_sample(
            sample, model.config().context_window, 0, [&](const SegmentRecord& s) { return cost.at(s.index); }, fixed);
        out.push_back(model.encode(cut, prompt, providers, order_seed));
    }
    return out;
}

std::vector<ComposeResult> compose_corpus(const Composer& model, const Corpus& corpus, const EffectPool& pool,
                                          const DecodeOptions& decode, const std::optional<PromptSpec>& prompt,
                                          const ProviderSet& providers) {
    std::vector<ComposeResult> out;
    out.reserve(corpus.size());
    const std::string fixed = prompt ? render_prompt(*prompt) : std::string();
    for (const auto& sample : corpus) {
        out.push_back(model.compose_text(sample, prompt ? fixed : sample.prompt.value_or(""), decode, pool, providers));
    }
    return out;
}

}  // namespace vcomp
