#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace vcomp {

/// The five effect categories. The enumerator order is the canonical
/// category sequence used by ordering and tie-breaking.
enum class EffectCategory : std::uint8_t {
    kTextAnimation = 0,
    kTextEffect = 1,
    kTextTemplate = 2,
    kSoundEffect = 3,
    kImageSticker = 4,
};

inline constexpr std::size_t kNumCategories = 5;

inline constexpr std::array<EffectCategory, kNumCategories> kAllCategories = {
    EffectCategory::kTextAnimation, EffectCategory::kTextEffect,
    EffectCategory::kTextTemplate, EffectCategory::kSoundEffect,
    EffectCategory::kImageSticker};

enum class Modality : std::uint8_t { kTextual, kAudio, kVisual };

std::string_view category_tag(EffectCategory c) noexcept;
std::optional<EffectCategory> parse_category(std::string_view tag) noexcept;
Modality category_modality(EffectCategory c) noexcept;
/// Name prefix used by synthetic pools ("ta", "te", "tt", "se", "sticker").
std::string_view synthetic_prefix(EffectCategory c) noexcept;
inline std::size_t category_rank(EffectCategory c) noexcept { return static_cast<std::size_t>(c); }

/// True when `name` is a legal effect identifier: non-empty and free of the
/// characters the composition grammar reserves.
bool is_valid_effect_name(std::string_view name) noexcept;

using EffectParams = std::map<std::string, std::string>;

struct Effect {
    EffectCategory category = EffectCategory::kTextEffect;
    std::string name;
    EffectParams default_params;

    /// "category:name"
    std::string key() const;

    friend bool operator==(const Effect&, const Effect&) = default;
};

/// Immutable catalog of effects. Per-category lists keep insertion order,
/// which is what index-based selection (e.g. synthetic generation) refers to.
class EffectPool {
public:
    EffectPool() = default;
    explicit EffectPool(std::vector<Effect> effects);

    const Effect& lookup(EffectCategory category, std::string_view name) const;
    const Effect* find(EffectCategory category, std::string_view name) const noexcept;
    bool contains(EffectCategory category, std::string_view name) const noexcept {
        return find(category, name) != nullptr;
    }

    std::size_t count(EffectCategory category) const noexcept {
        return by_category_[category_rank(category)].size();
    }
    std::size_t size() const noexcept { return effects_.size(); }
    bool empty() const noexcept { return effects_.empty(); }

    const std::vector<Effect>& effects() const noexcept { return effects_; }
    /// Indices into effects() for one category, in insertion order.
    const std::vector<std::size_t>& indices(EffectCategory category) const noexcept {
        return by_category_[category_rank(category)];
    }
    const Effect& at(EffectCategory category, std::size_t ordinal) const;
    std::map<EffectCategory, std::size_t> counts_by_category() const;

    /// Content hash of the canonical serialization, e.g. "pool-3f2a9c01d4e5b677".
    const std::string& id() const noexcept { return id_; }

    friend bool operator==(const EffectPool& a, const EffectPool& b) { return a.effects_ == b.effects_; }

private:
    std::vector<Effect> effects_;
    std::array<std::vector<std::size_t>, kNumCategories> by_category_;
    std::unordered_map<std::string, std::size_t> by_key_;
    std::string id_;
};

EffectPool parse_pool(std::string_view text);
EffectPool load_pool(const std::filesystem::path& path);
std::string format_pool(const EffectPool& pool);
void save_pool(const EffectPool& pool, const std::filesystem::path& path);

using CategorySizes = std::map<EffectCategory, std::size_t>;

/// Pool whose names are "{prefix}{index:04}" per category with empty default
/// parameters. Names do not depend on the seed; it is kept so synthetic
/// pools are addressed the same way as every other seeded artifact.
EffectPool make_synthetic_pool(const CategorySizes& sizes, std::uint64_t seed);

/// Full-size catalog counts: 10,000 image stickers, 1,000 in every other category.
CategorySizes full_scale_sizes();

}  // namespace vcomp
