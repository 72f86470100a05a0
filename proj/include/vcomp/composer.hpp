#pragma once

#include "vcomp/composition_grammar.hpp"
#include "vcomp/context_encoding.hpp"
#include "vcomp/dataset.hpp"
#include "vcomp/evaluation.hpp"
#include "vcomp/prompt.hpp"
#include "vcomp/vocabulary.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <new>
#include <optional>
#include <string>
#include <vector>

namespace vcomp {

// 64-byte aligned storage: vectorized kernels then take the same path (and
// round the same way) no matter where a buffer was allocated, which keeps
// resumed training bit-identical.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t alignment{64};
    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }
    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;
using ParamVector = AlignedVector<float>;

struct ModelConfig {
    std::size_t width = 256;
    std::size_t depth = 4;
    std::size_t heads = 4;
    std::size_t ffn_mult = 4;
    std::size_t context_window = 2048;
    std::size_t max_segments = 128;  // rows of the segment embedding table
    std::size_t visual_dim = 32;  // provider dims feeding the projectors
    std::size_t audio_dim = 16;
    std::uint64_t init_seed = 0;
    double init_scale = 0.0;  // weight init std; <= 0 picks 1.2/sqrt(width)
    /// Rotary position encoding of queries and keys; 0 leaves attention
    /// position-agnostic (learned position embeddings only).
    double rope_base = 0.0;
    /// Output head reuses the token embedding table (plus its own bias).
    bool tie_embeddings = true;
    /// Keys of each block add a learned per-channel share of the previous
    /// position's normalized input, so a key can say what precedes it.
    bool token_shift = true;
    /// Target tokens of a line that opens with "[i]" carry segment i's
    /// segment embedding (through the line's newline). Lines without an
    /// index carry none.
    bool index_anchor = true;
};

/// Input slot kinds seen by the model: the five context kinds plus the
/// composition region (<compose> and everything generated after it).
inline constexpr std::size_t kNumInputKinds = kNumSlotKinds + 1;
inline constexpr std::uint8_t kTargetKind = static_cast<std::uint8_t>(kNumSlotKinds);

/// One named tensor inside the flat parameter vector (row-major rows x cols).
struct ParamTensor {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t size() const noexcept { return rows * cols; }
};

/// Flat parameter layout. Weights are stored input-major (in x out) so a row
/// of activations times the weight gives the output row.
struct ParamLayout {
    std::vector<ParamTensor> tensors;
    std::size_t total = 0;

    static ParamLayout build(const ModelConfig& config, std::size_t vocab_size);
    const ParamTensor& get(const std::string& name) const;
};

/// Model input: context slots, then <compose>, then target tokens. Labels are
/// next-token targets; -1 marks positions excluded from the loss.
struct SequenceInput {
    std::vector<std::uint8_t> kinds;
    std::vector<TokenId> tokens;
    std::vector<const Embedding*> features;  // non-null for visual/audio slots
    std::vector<std::int32_t> segments;      // owning segment of a content slot, -1 elsewhere
    std::vector<TokenId> labels;

    std::size_t size() const noexcept { return kinds.size(); }
};

/// Tokenized training example: owns its context so SequenceInput pointers stay valid.
struct EncodedExample {
    std::string sample_id;
    ContextSequence context;
    std::vector<TokenId> target;  // composition tokens followed by <end>
    std::vector<std::int32_t> target_segments;  // per target input position (see index_anchor); empty: none
    std::size_t num_segments = 0;

    SequenceInput sequence() const;
};

struct DecodeOptions {
    enum class Mode : std::uint8_t { kGreedy, kSample };
    Mode mode = Mode::kGreedy;
    double temperature = 1.0;
    std::uint64_t seed = 0;
    bool constrained = false;
    /// Defaults to 16 tokens per segment + 8.
    std::optional<std::size_t> max_new_tokens;
};

struct ComposeResult {
    std::string text;
    ParseResult parsed;  // lenient parse of `text` (strict-valid when constrained)
    std::size_t generated_tokens = 0;
    std::size_t budget = 0;
    bool hit_budget = false;  // stopped without an end token
    std::size_t context_tokens = 0;
};

class Composer {
public:
    Composer() = default;
    /// Fresh model with seeded initialization.
    Composer(const ModelConfig& config, Vocabulary vocab, const FormatOptions& format = {},
             const ContextOptions& context = {});

    const ModelConfig& config() const noexcept { return config_; }
    const Vocabulary& vocab() const noexcept { return vocab_; }
    const FormatOptions& format() const noexcept { return format_; }
    const ContextOptions& context_options() const noexcept { return context_; }
    const ParamLayout& layout() const noexcept { return layout_; }
    ParamVector& parameters() noexcept { return params_; }
    const ParamVector& parameters() const noexcept { return params_; }
    std::size_t num_parameters() const noexcept { return params_.size(); }

    /// Projectors as affine maps (weights transposed to joint x input).
    Projector visual_projector() const;
    Projector audio_projector() const;

    /// Target text of a sample under the model's format; random order derives
    /// its shuffle from `order_seed`.
    std::string target_text(const Sample& sample, std::uint64_t order_seed = 0) const;
    EncodedExample encode(const Sample& sample, std::string_view prompt_text, const ProviderSet& providers = {},
                          std::uint64_t order_seed = 0) const;

    /// Mean NLL over all label positions of the batch. When `grad` is given it
    /// is resized to the parameter count and receives d(loss)/d(params).
    template <typename Real>
    Real batch_loss(const AlignedVector<Real>& params, const std::vector<SequenceInput>& batch,
                    AlignedVector<Real>* grad) const;
    double loss(const std::vector<EncodedExample>& batch, ParamVector* grad = nullptr) const;

    /// Logits for every position (rows = positions, row-major, V columns).
    std::vector<float> logits(const SequenceInput& input) const;

    /// Token accuracy of greedy next-token predictions at label positions.
    double token_accuracy(const std::vector<EncodedExample>& batch) const;

    ComposeResult compose(const Sample& sample, const PromptSpec& prompt, const DecodeOptions& decode,
                          const EffectPool& pool, const ProviderSet& providers = {}) const;
    ComposeResult compose_text(const Sample& sample, std::string_view prompt_text, const DecodeOptions& decode,
                               const EffectPool& pool, const ProviderSet& providers = {}) const;

    std::size_t generation_budget(std::size_t num_segments) const noexcept { return 16 * num_segments + 8; }

private:
    ModelConfig config_;
    Vocabulary vocab_;
    FormatOptions format_;
    ContextOptions context_;
    ParamLayout layout_;
    ParamVector params_;
};

/// Vocabulary for a corpus: the standard pieces plus every distinct sentence
/// token and effect name of the corpus (and of `pool` when given), so each
/// word and name is a single token.
Vocabulary build_vocabulary(const Corpus& corpus, const EffectPool* pool = nullptr, std::size_t max_index = 127);

struct TrainConfig {
    std::string optimizer = "adamw";
    double learning_rate = 1e-4;
    double min_lr_ratio = 0.0;  // cosine decays to learning_rate * min_lr_ratio
    std::size_t warmup_steps = 0;
    std::size_t batch_size = 8;
    std::size_t steps = 1000;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;
    double grad_clip = 1.0;  // global norm; 0 disables
    std::size_t log_interval = 10;
    std::size_t eval_interval = 0;  // 0: only at the end
    std::size_t eval_samples = 64;  // validation samples composed per evaluation
    bool eval_constrained = true;
    std::size_t val_loss_samples = 128;
    std::size_t checkpoint_interval = 0;
    std::optional<std::filesystem::path> checkpoint_path;
    std::optional<std::filesystem::path> report_path;
    /// Stop early when the training token accuracy over the last log window
    /// reaches this value (0 disables).
    double stop_at_token_accuracy = 0.0;
};

double learning_rate_at(const TrainConfig& config, std::size_t step) noexcept;

struct TrainingState {
    std::size_t step = 0;
    ParamVector adam_m;
    ParamVector adam_v;
};

struct LogEntry {
    std::size_t step = 0;
    double loss = 0.0;
    double learning_rate = 0.0;
    double token_accuracy = 0.0;
    double grad_norm = 0.0;
};

struct ValEntry {
    std::size_t step = 0;
    double val_loss = 0.0;
    std::optional<MetricReport> metrics;
};

struct TrainReport {
    std::vector<double> step_losses;  // one per step
    std::vector<LogEntry> log;
    std::vector<ValEntry> validation;
    double initial_val_loss = 0.0;
    double final_val_loss = 0.0;
    std::size_t steps_run = 0;
    double seconds = 0.0;
};

struct TrainHooks {
    std::function<void(const LogEntry&)> on_log;
};

/// Trains in place. Resumes from `state` when it carries a nonzero step.
/// Throws Error(kNumerical) when the loss becomes non-finite.
TrainReport train(Composer& model, const Corpus& train_set, const Corpus& val_set, const TrainConfig& config,
                  const EffectPool& pool, const ProviderSet& providers = {}, TrainingState* state = nullptr,
                  const TrainHooks& hooks = {});

/// Prepares training examples, truncating samples that do not fit the window.
std::vector<EncodedExample> encode_corpus(const Composer& model, const Corpus& corpus, const ProviderSet& providers,
                                          std::uint64_t order_seed);

/// Composes every sample of `corpus` (prompt from the sample unless `prompt`
/// is given) and returns the generated texts.
std::vector<ComposeResult> compose_corpus(const Composer& model, const Corpus& corpus, const EffectPool& pool,
                                          const DecodeOptions& decode, const std::optional<PromptSpec>& prompt,
                                          const ProviderSet& providers = {});

/// Checkpoint: magic, length-prefixed JSON metadata (config, vocabulary,
/// format, training state, train config), then raw little-endian float32
/// parameters and optional optimizer moments.
void save_checkpoint(const Composer& model, const std::filesystem::path& path, const TrainingState* state = nullptr,
                     const TrainConfig* train_config = nullptr);
Composer load_checkpoint(const std::filesystem::path& path, TrainingState* state = nullptr,
                         TrainConfig* train_config = nullptr);

// Config (de)serialization shared by checkpoints, run reports and the CLI.
std::string model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(std::string_view text);
std::string train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(std::string_view text);
std::string format_options_to_json(const FormatOptions& f);
FormatOptions format_options_from_json(std::string_view text);
std::string context_options_to_json(const ContextOptions& c);
ContextOptions context_options_from_json(std::string_view text);

}  // namespace vcomp
