#pragma once

// Internal: the decoder-only transformer behind Composer.

#include "vcomp/composer.hpp"

#include <vector>

namespace vcomp::detail {

struct LayerOffsets {
    std::size_t ln1_g, ln1_b, qkv_w, qkv_b, out_w, out_b, ln2_g, ln2_b, ff1_w, ff1_b, ff2_w, ff2_b;
    std::size_t shift = 0;  // valid when has_shift
    bool has_shift = false;
};

struct Offsets {
    std::size_t tok, kind, pos, seg, pv_w, pv_b, pa_w, pa_b;
    std::vector<LayerOffsets> layers;
    std::size_t lnf_g, lnf_b, head_w, head_b;
    bool tied = false;  // head_w unused; logits use tok_emb transposed

    static Offsets of(const ParamLayout& layout, std::size_t depth);
};

struct LossStats {
    double nll = 0.0;  // summed over label positions
    std::size_t count = 0;
    std::size_t correct = 0;  // argmax == label

    LossStats& operator+=(const LossStats& o) noexcept {
        nll += o.nll;
        count += o.count;
        correct += o.correct;
        return *this;
    }
};

/// Forward pass over one sequence. Logits are computed at label positions
/// (or at every position when `all_logits` is given). With `grad`, the
/// gradient of scale * summed NLL is accumulated into it.
template <typename Real>
LossStats forward_backward(const ModelConfig& config, const Offsets& off, std::size_t vocab, const Real* params,
                           const SequenceInput& input, Real scale, Real* grad, std::vector<float>* all_logits);

void init_parameters(const ModelConfig& config, const ParamLayout& layout, ParamVector& params);

/// Segment of each target input token under ModelConfig::index_anchor: the
/// piece after "[" that spells a number opens segment n for the rest of the
/// line, newline included.
class LineAnchor {
public:
    LineAnchor(const Vocabulary& vocab, std::size_t max_segments, bool enabled)
        : vocab_(vocab), max_(max_segments), enabled_(enabled) {}
    std::int32_t next(TokenId input_token);

private:
    const Vocabulary& vocab_;
    std::size_t max_;
    bool enabled_;
    bool after_open_ = false;
    std::int32_t current_ = -1;
};

/// Single-position inference with a key/value cache.
class IncrementalDecoder {
public:
    IncrementalDecoder(const ModelConfig& config, const Offsets& off, std::size_t vocab, const float* params);

    void step(std::uint8_t kind, TokenId token, const Embedding* features, std::int32_t segment,
              std::vector<float>* logits);
    std::size_t length() const noexcept { return t_; }

private:
    const ModelConfig& c_;
    const Offsets& o_;
    std::size_t vocab_;
    const float* p_;
    std::size_t t_ = 0;
    std::vector<std::vector<float>> k_, v_;  // per layer, context_window x width
    std::vector<std::vector<float>> prev_a_;  // per layer, last normalized input (token shift)
};

}  // namespace vcomp::detail
