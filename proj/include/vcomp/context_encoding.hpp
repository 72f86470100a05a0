#pragma once

#include "vcomp/dataset.hpp"
#include "vcomp/vocabulary.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace vcomp {

enum class MediaModality : std::uint8_t { kVisual, kAudio };

inline constexpr std::size_t kMaxAudioEmbeddings = 3;
inline constexpr double kAudioSamplePeriod = 0.5;
/// Reference encoder shapes: 336x336 frames summarized by a 2048-d [CLS]
/// vector; audio features of 1024 dimensions.
inline constexpr std::size_t kReferenceFrameSize = 336;
inline constexpr std::size_t kReferenceVisualDim = 2048;
inline constexpr std::size_t kReferenceAudioDim = 1024;

/// floor(duration / 0.5) + 1 samples, capped at 3; zero for an empty clip.
std::size_t audio_sample_count(double duration_s) noexcept;

struct FrameRef {
    std::string path;
    double time_s = 0.0;
};

struct AudioClip {
    std::string path;
    double start_s = 0.0;
    double end_s = 0.0;
    double duration() const noexcept { return end_s - start_s; }
};

/// What a provider is asked to encode: a media reference, raw bytes, or a
/// synthetic latent class (topic or emotion id).
struct LatentClass {
    std::size_t id = 0;
    double duration_s = 0.0;  // audio only
};
using ProviderInput = std::variant<FrameRef, AudioClip, LatentClass>;

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual MediaModality modality() const noexcept = 0;
    virtual std::size_t output_dim() const noexcept = 0;
    virtual const std::string& provider_id() const noexcept = 0;
    /// Visual providers return one summary vector; audio providers return one
    /// vector per 0.5 s sample of the clip.
    virtual std::vector<Embedding> encode(const ProviderInput& input) const = 0;
};

/// Deterministic desk-scale provider. Latent class k maps to basis[k], where
/// the first `dim` basis vectors are orthogonal; media references hash the
/// referenced file's bytes (plus the frame time / sample ordinal).
class StubProvider final : public EmbeddingProvider {
public:
    StubProvider(MediaModality modality, std::size_t dim, std::uint64_t seed);

    MediaModality modality() const noexcept override { return modality_; }
    std::size_t output_dim() const noexcept override { return dim_; }
    const std::string& provider_id() const noexcept override { return id_; }
    std::vector<Embedding> encode(const ProviderInput& input) const override;

    const Embedding& basis(std::size_t k) const;

private:
    MediaModality modality_;
    std::size_t dim_;
    std::uint64_t seed_;
    std::string id_;
    mutable std::mutex mu_;
    mutable std::vector<Embedding> basis_;
};

std::unique_ptr<EmbeddingProvider> stub_provider(MediaModality modality, std::size_t dim, std::uint64_t seed);

/// Affine map from a provider's space into the joint (model) space.
struct Projector {
    MediaModality modality = MediaModality::kVisual;
    Eigen::MatrixXf weight;  // joint_dim x input_dim
    Eigen::VectorXf bias;    // joint_dim

    static Projector zeros(MediaModality m, std::size_t joint_dim, std::size_t input_dim);
    static Projector identity(MediaModality m, std::size_t dim);
    std::size_t input_dim() const noexcept { return static_cast<std::size_t>(weight.cols()); }
    std::size_t joint_dim() const noexcept { return static_cast<std::size_t>(weight.rows()); }
    Embedding apply(const Embedding& x) const;
};

struct VisualAbsent {};
using VisualSource = std::variant<VisualAbsent, Embedding, FrameRef>;

/// Middle frame of the segment's word-timing span; a precomputed embedding
/// bypasses frame selection.
VisualSource select_frame(const SegmentRecord& segment);

Embedding encode_visual(const FrameRef& frame, const EmbeddingProvider& provider, const Projector& projector);
std::vector<Embedding> encode_audio(const AudioClip& clip, const EmbeddingProvider& provider,
                                    const Projector& projector);

/// Per-segment joint-space content: text token ids, 0-1 visual vectors and
/// 0-3 audio vectors.
struct SegmentEmbeddings {
    std::vector<TokenId> text_tokens;
    std::optional<Embedding> visual;
    std::vector<Embedding> audio;
};

struct ProviderSet {
    const EmbeddingProvider* visual = nullptr;
    const EmbeddingProvider* audio = nullptr;
};

struct ContextOptions {
    bool include_indices = true;
    bool use_visual = true;
    bool use_audio = true;
    std::size_t context_window = 2048;
};

/// Raw (pre-projection) provider vectors of a segment; empty/absent when the
/// modality is disabled or has no source.
std::optional<Embedding> segment_visual_features(const SegmentRecord& segment, const ProviderSet& providers,
                                                 const ContextOptions& opts);
std::vector<Embedding> segment_audio_features(const SegmentRecord& segment, const ProviderSet& providers,
                                              const ContextOptions& opts);

SegmentEmbeddings embed_segment(const SegmentRecord& segment, const Vocabulary& vocab, const ProviderSet& providers,
                                const Projector& visual_projector, const Projector& audio_projector,
                                const ContextOptions& opts);

enum class SlotKind : std::uint8_t { kIndexMarker, kText, kVisual, kAudio, kPrompt };
inline constexpr std::size_t kNumSlotKinds = 5;

struct ContextSlot {
    std::size_t segment_index = 0;
    SlotKind kind = SlotKind::kText;
    TokenId token = Vocabulary::kPad;  // marker / text / prompt slots
    Embedding features;                 // visual / audio slots (provider space)

    friend bool operator==(const ContextSlot&, const ContextSlot&) = default;
};

struct ContextSequence {
    std::vector<ContextSlot> slots;
    std::size_t total_token_count = 0;

    friend bool operator==(const ContextSequence&, const ContextSequence&) = default;
};

/// Slots one segment contributes: marker (if enabled) + text tokens +
/// visual (0/1) + audio (0-3).
std::size_t segment_slot_count(const SegmentRecord& segment, const Vocabulary& vocab, const ContextOptions& opts);

/// Layout per segment: index marker, sentence tokens, visual slot, audio
/// slots; prompt tokens follow the last segment. Throws Error(kTooLong) when
/// the total exceeds opts.context_window.
ContextSequence assemble_context(const Sample& sample, std::string_view prompt_text, const Vocabulary& vocab,
                                 const ProviderSet& providers, const ContextOptions& opts);

}  // namespace vcomp
