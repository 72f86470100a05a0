#include "vcomp/context_encoding.hpp"

#include "vcomp/error.hpp"
#include "vcomp/util.hpp"

#include <cmath>

namespace vcomp {

namespace {

Embedding hashed_vector(std::uint64_t seed, std::size_t dim) {
    Rng rng(seed);
    Embedding v(dim);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    return v;
}

std::string file_bytes_for(const std::string& path, const char* what) {
    try {
        return read_file(path);
    } catch (const Error& e) {
        fail(ErrorCode::kIo, std::string(what) + " provider failed on '" + path + "': " + e.what());
    }
}

}  // namespace

std::size_t audio_sample_count(double duration_s) noexcept {
    if (!(duration_s > 0.0)) return 0;
    const auto n = static_cast<std::size_t>(std::floor(duration_s / kAudioSamplePeriod)) + 1;
    return std::min(n, kMaxAudioEmbeddings);
}

StubProvider::StubProvider(MediaModality modality, std::size_t dim, std::uint64_t seed)
    : modality_(modality), dim_(dim), seed_(seed) {
    if (dim == 0) fail(ErrorCode::kInvalidArgument, "provider dimension must be positive");
    id_ = std::string(modality == MediaModality::kVisual ? "stub-visual-" : "stub-audio-") + std::to_string(dim) + "-" +
          std::to_string(seed);
}

const Embedding& StubProvider::basis(std::size_t k) const {
    std::lock_guard<std::mutex> lock(mu_);
    const std::uint64_t salt = modality_ == MediaModality::kVisual ? 0x7669737561ULL : 0x617564696fULL;
    while (basis_.size() <= k) {
        const std::size_t idx = basis_.size();
        Embedding raw = hashed_vector(hash_combine(hash_combine(seed_, salt), idx), dim_);
        std::vector<double> v(raw.begin(), raw.end());
        if (idx < dim_) {
            // Gram-Schmidt against the unit-normalized earlier vectors.
            for (std::size_t j = 0; j < idx; ++j) {
                const Embedding& b = basis_[j];
                double dot = 0.0, nb = 0.0;
                for (std::size_t d = 0; d < dim_; ++d) {
                    dot += v[d] * b[d];
                    nb += static_cast<double>(b[d]) * b[d];
                }
                for (std::size_t d = 0; d < dim_; ++d) v[d] -= dot / nb * b[d];
            }
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        const double scale = std::sqrt(static_cast<double>(dim_)) / (norm > 0 ? norm : 1.0);
        Embedding out(dim_);
        for (std::size_t d = 0; d < dim_; ++d) out[d] = static_cast<float>(v[d] * scale);
        basis_.push_back(std::move(out));
    }
    return basis_[k];
}

std::vector<Embedding> StubProvider::encode(const ProviderInput& input) const {
    if (const auto* latent = std::get_if<LatentClass>(&input)) {
        const Embedding& b = basis(latent->id);
        if (modality_ == MediaModality::kVisual) return {b};
        return std::vector<Embedding>(audio_sample_count(latent->duration_s), b);
    }
    if (const auto* frame = std::get_if<FrameRef>(&input)) {
        if (modality_ != MediaModality::kVisual) fail(ErrorCode::kInvalidArgument, "audio provider given a frame");
        const std::string bytes = file_bytes_for(frame->path, "visual");
        const auto t = static_cast<std::uint64_t>(std::llround(frame->time_s * 1000.0));
        return {hashed_vector(hash_combine(hash_combine(seed_, fnv1a64(bytes)), t), dim_)};
    }
    const auto& clip = std::get<AudioClip>(input);
    if (modality_ != MediaModality::kAudio) fail(ErrorCode::kInvalidArgument, "visual provider given an audio clip");
    const std::string bytes = file_bytes_for(clip.path, "audio");
    const std::uint64_t h = hash_combine(seed_, fnv1a64(bytes));
    const std::size_t n = static_cast<std::size_t>(std::floor(std::max(0.0, clip.duration()) / kAudioSamplePeriod)) + 1;
    std::vector<Embedding> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto t = static_cast<std::uint64_t>(std::llround((clip.start_s + i * kAudioSamplePeriod) * 1000.0));
        out.push_back(hashed_vector(hash_combine(h, t), dim_));
    }
    return out;
}

std::unique_ptr<EmbeddingProvider> stub_provider(MediaModality modality, std::size_t dim, std::uint64_t seed) {
    return std::make_unique<StubProvider>(modality, dim, seed);
}

Projector Projector::zeros(MediaModality m, std::size_t joint_dim, std::size_t input_dim) {
    Projector p;
    p.modality = m;
    p.weight = Eigen::MatrixXf::Zero(static_cast<Eigen::Index>(joint_dim), static_cast<Eigen::Index>(input_dim));
    p.bias = Eigen::VectorXf::Zero(static_cast<Eigen::Index>(joint_dim));
    return p;
}

Projector Projector::identity(MediaModality m, std::size_t dim) {
    Projector p = zeros(m, dim, dim);
    p.weight.setIdentity();
    return p;
}

Embedding Projector::apply(const Embedding& x) const {
    if (x.size() != input_dim()) {
        fail(ErrorCode::kInvalidArgument, "projector expects " + std::to_string(input_dim()) + "-d input, got " +
                                              std::to_string(x.size()));
    }
    const Eigen::Map<const Eigen::VectorXf> in(x.data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::VectorXf out = weight * in + bias;
    return Embedding(out.data(), out.data() + out.size());
}

VisualSource select_frame(const SegmentRecord& segment) {
    if (segment.visual_embedding) return *segment.visual_embedding;
    if (!segment.frame_ref) return VisualAbsent{};
    return FrameRef{*segment.frame_ref, 0.5 * (segment.start_s() + segment.end_s())};
}

Embedding encode_visual(const FrameRef& frame, const EmbeddingProvider& provider, const Projector& projector) {
    if (provider.modality() != MediaModality::kVisual) {
        fail(ErrorCode::kInvalidArgument, "encode_visual needs a visual provider, got " + provider.provider_id());
    }
    std::vector<Embedding> summary;
    try {
        summary = provider.encode(frame);
    } catch (const Error& e) {
        fail(e.code(), "frame '" + frame.path + "' @" + std::to_string(frame.time_s) + "s: " + e.what());
    }
    if (summary.size() != 1) fail(ErrorCode::kInternal, "visual provider must return exactly one summary vector");
    return projector.apply(summary.front());
}

std::vector<Embedding> encode_audio(const AudioClip& clip, const EmbeddingProvider& provider,
                                    const Projector& projector) {
    if (provider.modality() != MediaModality::kAudio) {
        fail(ErrorCode::kInvalidArgument, "encode_audio needs an audio provider, got " + provider.provider_id());
    }
    std::vector<Embedding> samples = provider.encode(clip);
    if (samples.size() > kMaxAudioEmbeddings) samples.resize(kMaxAudioEmbeddings);
    std::vector<Embedding> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(projector.apply(s));
    return out;
}

std::optional<Embedding> segment_visual_features(const SegmentRecord& segment, const ProviderSet& providers,
                                                 const ContextOptions& opts) {
    if (!opts.use_visual) return std::nullopt;
    const VisualSource src = select_frame(segment);
    if (std::holds_alternative<VisualAbsent>(src)) return std::nullopt;
    if (const auto* e = std::get_if<Embedding>(&src)) return *e;
    if (providers.visual == nullptr) fail(ErrorCode::kInvalidArgument, "segment has a frame reference but no visual provider");
    const auto& frame = std::get<FrameRef>(src);
    std::vector<Embedding> v;
    try {
        v = providers.visual->encode(frame);
    } catch (const Error& e) {
        fail(e.code(), "frame '" + frame.path + "': " + e.what());
    }
    return v.at(0);
}

std::vector<Embedding> segment_audio_features(const SegmentRecord& segment, const ProviderSet& providers,
                                              const ContextOptions& opts) {
    if (!opts.use_audio) return {};
    std::vector<Embedding> out;
    if (segment.audio_embeddings) {
        out = *segment.audio_embeddings;
    } else if (segment.audio_ref) {
        if (providers.audio == nullptr) fail(ErrorCode::kInvalidArgument, "segment has an audio reference but no audio provider");
        out = providers.audio->encode(AudioClip{*segment.audio_ref, segment.start_s(), segment.end_s()});
    }
    if (out.size() > kMaxAudioEmbeddings) out.resize(kMaxAudioEmbeddings);
    return out;
}

SegmentEmbeddings embed_segment(const SegmentRecord& segment, const Vocabulary& vocab, const ProviderSet& providers,
                                const Projector& visual_projector, const Projector& audio_projector,
                                const ContextOptions& opts) {
    SegmentEmbeddings out;
    for (const auto& w : segment.tokens()) {
        const auto ids = vocab.encode_word(w);
        out.text_tokens.insert(out.text_tokens.end(), ids.begin(), ids.end());
    }
    if (auto v = segment_visual_features(segment, providers, opts)) out.visual = visual_projector.apply(*v);
    for (const auto& a : segment_audio_features(segment, providers, opts)) out.audio.push_back(audio_projector.apply(a));
    return out;
}

std::size_t segment_slot_count(const SegmentRecord& segment, const Vocabulary& vocab, const ContextOptions& opts) {
    std::size_t n = opts.include_indices ? 1 : 0;
    for (const auto& w : segment.tokens()) n += vocab.encode_word(w).size();
    if (opts.use_visual && (segment.visual_embedding || segment.frame_ref)) n += 1;
    if (opts.use_audio) {
        if (segment.audio_embeddings) {
            n += std::min(segment.audio_embeddings->size(), kMaxAudioEmbeddings);
        } else if (segment.audio_ref) {
            n += audio_sample_count(segment.end_s() - segment.start_s());
        }
    }
    return n;
}

ContextSequence assemble_context(const Sample& sample, std::string_view prompt_text, const Vocabulary& vocab,
                                 const ProviderSet& providers, const ContextOptions& opts) {
    ContextSequence seq;
    for (std::size_t i = 0; i < sample.segments.size(); ++i) {
        const SegmentRecord& seg = sample.segments[i];
        if (seg.index != i) fail(ErrorCode::kValidation, "segments must be ascending from 0");
        if (opts.include_indices) {
            const TokenId marker = vocab.id_of(std::to_string(i));
            if (marker == Vocabulary::kUnk) {
                fail(ErrorCode::kOutOfRange, "segment index " + std::to_string(i) + " has no marker token");
            }
            seq.slots.push_back({i, SlotKind::kIndexMarker, marker, {}});
        }
        for (const auto& w : seg.tokens()) {
            for (TokenId id : vocab.encode_word(w)) seq.slots.push_back({i, SlotKind::kText, id, {}});
        }
        if (auto v = segment_visual_features(seg, providers, opts)) {
            seq.slots.push_back({i, SlotKind::kVisual, Vocabulary::kPad, std::move(*v)});
        }
        for (auto& a : segment_audio_features(seg, providers, opts)) {
            seq.slots.push_back({i, SlotKind::kAudio, Vocabulary::kPad, std::move(a)});
        }
    }
    const std::size_t prompt_segment = sample.segments.size();
    for (TokenId id : vocab.encode_words(prompt_text)) seq.slots.push_back({prompt_segment, SlotKind::kPrompt, id, {}});
    seq.total_token_count = seq.slots.size();
    if (seq.total_token_count > opts.context_window) {
        fail(ErrorCode::kTooLong, "context of " + std::to_string(seq.total_token_count) + " slots exceeds window of " +
                                      std::to_string(opts.context_window));
    }
    return seq;
}

}  // namespace vcomp
