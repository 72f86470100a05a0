#include "vcomp/effect_catalog.hpp"

#include "vcomp/error.hpp"
#include "vcomp/util.hpp"

#include <cstdio>

namespace vcomp {

namespace {

constexpr std::array<std::string_view, kNumCategories> kTags = {
    "text-animation", "text-effect", "text-template", "sound-effect", "image-sticker"};
constexpr std::array<std::string_view, kNumCategories> kPrefixes = {"ta", "te", "tt", "se", "sticker"};

std::string format_params(const EffectParams& params) {
    std::string out;
    for (const auto& [k, v] : params) {
        if (!out.empty()) out += ',';
        out += k;
        out += '=';
        out += v;
    }
    return out;
}

EffectParams parse_params(std::string_view text, std::size_t line_no) {
    EffectParams params;
    text = trim(text);
    if (text.empty()) return params;
    for (const std::string& pair : split(text, ',')) {
        const auto eq = pair.find('=');
        if (eq == std::string::npos || eq == 0) {
            fail(ErrorCode::kParse, "pool line " + std::to_string(line_no) + ": malformed parameter '" + pair + "'");
        }
        params[pair.substr(0, eq)] = pair.substr(eq + 1);
    }
    return params;
}

}  // namespace

std::string_view category_tag(EffectCategory c) noexcept { return kTags[category_rank(c)]; }

std::optional<EffectCategory> parse_category(std::string_view tag) noexcept {
    for (std::size_t i = 0; i < kNumCategories; ++i) {
        if (kTags[i] == tag) return kAllCategories[i];
    }
    return std::nullopt;
}

Modality category_modality(EffectCategory c) noexcept {
    switch (c) {
        case EffectCategory::kSoundEffect: return Modality::kAudio;
        case EffectCategory::kImageSticker: return Modality::kVisual;
        default: return Modality::kTextual;
    }
}

std::string_view synthetic_prefix(EffectCategory c) noexcept { return kPrefixes[category_rank(c)]; }

bool is_valid_effect_name(std::string_view name) noexcept {
    if (name.empty()) return false;
    if (name.find("->") != std::string_view::npos) return false;
    for (char ch : name) {
        switch (ch) {
            case '\n': case '\r': case ';': case '(': case ')': case '[': case ']': case ':':
                return false;
            default:
                break;
        }
    }
    return true;
}

std::string Effect::key() const {
    std::string k(category_tag(category));
    k += ':';
    k += name;
    return k;
}

EffectPool::EffectPool(std::vector<Effect> effects) : effects_(std::move(effects)) {
    for (std::size_t i = 0; i < effects_.size(); ++i) {
        const Effect& e = effects_[i];
        if (!is_valid_effect_name(e.name)) {
            fail(ErrorCode::kValidation, "invalid effect name '" + e.name + "'");
        }
        auto [it, inserted] = by_key_.emplace(e.key(), i);
        if (!inserted) fail(ErrorCode::kDuplicate, "duplicate effect " + e.key());
        by_category_[category_rank(e.category)].push_back(i);
    }
    id_ = "pool-" + hex64(fnv1a64(format_pool(*this)));
}

const Effect* EffectPool::find(EffectCategory category, std::string_view name) const noexcept {
    std::string key(category_tag(category));
    key += ':';
    key += name;
    const auto it = by_key_.find(key);
    return it == by_key_.end() ? nullptr : &effects_[it->second];
}

const Effect& EffectPool::lookup(EffectCategory category, std::string_view name) const {
    if (const Effect* e = find(category, name)) return *e;
    fail(ErrorCode::kNotFound,
         "effect not found: category '" + std::string(category_tag(category)) + "', name '" + std::string(name) + "'");
}

const Effect& EffectPool::at(EffectCategory category, std::size_t ordinal) const {
    const auto& idx = indices(category);
    if (ordinal >= idx.size()) {
        fail(ErrorCode::kOutOfRange, "no effect #" + std::to_string(ordinal) + " in " + std::string(category_tag(category)));
    }
    return effects_[idx[ordinal]];
}

std::map<EffectCategory, std::size_t> EffectPool::counts_by_category() const {
    std::map<EffectCategory, std::size_t> counts;
    for (EffectCategory c : kAllCategories) counts[c] = count(c);
    return counts;
}

EffectPool parse_pool(std::string_view text) {
    std::vector<Effect> effects;
    std::unordered_map<std::string, std::size_t> first_seen;
    std::size_t line_no = 0;
    for (const std::string& raw : split(text, '\n')) {
        ++line_no;
        std::string_view line = raw;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (trim(line).empty() || trim(line).front() == '#') continue;

        const auto tab = line.find('\t');
        const std::string_view head = line.substr(0, tab);
        const std::string_view tail = tab == std::string_view::npos ? std::string_view{} : line.substr(tab + 1);
        const auto colon = head.find(':');
        if (colon == std::string_view::npos) {
            fail(ErrorCode::kParse, "pool line " + std::to_string(line_no) + ": expected 'category:name'");
        }
        const auto category = parse_category(head.substr(0, colon));
        if (!category) {
            fail(ErrorCode::kParse, "pool line " + std::to_string(line_no) + ": unknown category '" +
                                        std::string(head.substr(0, colon)) + "'");
        }
        Effect e;
        e.category = *category;
        e.name = std::string(head.substr(colon + 1));
        if (!is_valid_effect_name(e.name)) {
            fail(ErrorCode::kParse, "pool line " + std::to_string(line_no) + ": invalid effect name '" + e.name + "'");
        }
        e.default_params = parse_params(tail, line_no);
        const auto [it, inserted] = first_seen.emplace(e.key(), line_no);
        if (!inserted) {
            fail(ErrorCode::kDuplicate, "pool line " + std::to_string(line_no) + ": duplicate effect " + e.key() +
                                            " (first defined on line " + std::to_string(it->second) + ")");
        }
        effects.push_back(std::move(e));
    }
    return EffectPool(std::move(effects));
}

EffectPool load_pool(const std::filesystem::path& path) { return parse_pool(read_file(path.string())); }

std::string format_pool(const EffectPool& pool) {
    std::string out;
    for (const Effect& e : pool.effects()) {
        out += e.key();
        out += '\t';
        out += format_params(e.default_params);
        out += '\n';
    }
    return out;
}

void save_pool(const EffectPool& pool, const std::filesystem::path& path) {
    write_file(path.string(), format_pool(pool));
}

EffectPool make_synthetic_pool(const CategorySizes& sizes, std::uint64_t /*seed*/) {
    std::vector<Effect> effects;
    for (EffectCategory c : kAllCategories) {
        const auto it = sizes.find(c);
        const std::size_t n = it == sizes.end() ? 0 : it->second;
        for (std::size_t i = 0; i < n; ++i) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%04zu", i);
            effects.push_back(Effect{c, std::string(synthetic_prefix(c)) + buf, {}});
        }
    }
    return EffectPool(std::move(effects));
}

CategorySizes full_scale_sizes() {
    return {{EffectCategory::kTextAnimation, 1000},
            {EffectCategory::kTextEffect, 1000},
            {EffectCategory::kTextTemplate, 1000},
            {EffectCategory::kSoundEffect, 1000},
            {EffectCategory::kImageSticker, 10000}};
}

}  // namespace vcomp
