#pragma once

#include "vcomp/effect_catalog.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vcomp {

/// User intent for a composition: how often to trigger effects and which
/// categories to favour.
struct PromptSpec {
    std::optional<int> density_percent;  // [0, 100]
    std::vector<EffectCategory> preferred_categories;  // rendered in the given order

    bool empty() const noexcept { return !density_percent && preferred_categories.empty(); }
    friend bool operator==(const PromptSpec&, const PromptSpec&) = default;
};

/// "animated text", "text effects", "text templates", "sound effects", "image stickers".
std::string_view category_phrase(EffectCategory c) noexcept;

/// Deterministic template rendering; the empty spec renders as "".
///   {density 50}                 -> "Please edit a video with a 50% frequency of trigger positions"
///   {density 70, [sticker, ani]} -> "... 70% frequency of trigger positions, simultaneously
///                                     incorporating image stickers and animated text"
///   {[sticker]}                  -> "... a suitable frequency of trigger positions, simultaneously ..."
std::string render_prompt(const PromptSpec& spec);

/// Inverse of render_prompt for strings it produced; nullopt otherwise.
std::optional<PromptSpec> parse_prompt(std::string_view text);

/// Percentage stated for a realized trigger ratio (nearest multiple of 10).
int quantize_density_percent(double ratio) noexcept;

}  // namespace vcomp
