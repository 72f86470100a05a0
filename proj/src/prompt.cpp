#include "vcomp/prompt.hpp"

#include "vcomp/error.hpp"

#include <algorithm>
#include <cmath>

namespace vcomp {

namespace {

constexpr std::string_view kLead = "Please edit a video with a ";
constexpr std::string_view kFrequency = " frequency of trigger positions";
constexpr std::string_view kSuitable = "suitable";
constexpr std::string_view kIncorporating = ", simultaneously incorporating ";

std::string join_phrases(const std::vector<EffectCategory>& cats) {
    std::string out;
    for (std::size_t i = 0; i < cats.size(); ++i) {
        if (i > 0) out += (i + 1 == cats.size()) ? " and " : ", ";
        out += category_phrase(cats[i]);
    }
    return out;
}

}  // namespace

std::string_view category_phrase(EffectCategory c) noexcept {
    switch (c) {
        case EffectCategory::kTextAnimation: return "animated text";
        case EffectCategory::kTextEffect: return "text effects";
        case EffectCategory::kTextTemplate: return "text templates";
        case EffectCategory::kSoundEffect: return "sound effects";
        case EffectCategory::kImageSticker: return "image stickers";
    }
    return "";
}

std::string render_prompt(const PromptSpec& spec) {
    if (spec.empty()) return {};
    std::string out(kLead);
    if (spec.density_percent) {
        const int p = *spec.density_percent;
        if (p < 0 || p > 100) fail(ErrorCode::kOutOfRange, "density percent " + std::to_string(p) + " outside [0, 100]");
        out += std::to_string(p);
        out += '%';
    } else {
        out += kSuitable;
    }
    out += kFrequency;
    std::vector<EffectCategory> cats;
    for (EffectCategory c : spec.preferred_categories) {
        if (std::find(cats.begin(), cats.end(), c) == cats.end()) cats.push_back(c);
    }
    if (!cats.empty()) {
        out += kIncorporating;
        out += join_phrases(cats);
    }
    return out;
}

std::optional<PromptSpec> parse_prompt(std::string_view text) {
    if (text.empty()) return PromptSpec{};
    if (text.substr(0, kLead.size()) != kLead) return std::nullopt;
    text.remove_prefix(kLead.size());
    PromptSpec spec;
    if (text.substr(0, kSuitable.size()) == kSuitable) {
        text.remove_prefix(kSuitable.size());
    } else {
        const auto pct = text.find('%');
        if (pct == std::string_view::npos || pct == 0 || pct > 3) return std::nullopt;
        int v = 0;
        for (char c : text.substr(0, pct)) {
            if (c < '0' || c > '9') return std::nullopt;
            v = v * 10 + (c - '0');
        }
        if (v > 100) return std::nullopt;
        spec.density_percent = v;
        text.remove_prefix(pct + 1);
    }
    if (text.substr(0, kFrequency.size()) != kFrequency) return std::nullopt;
    text.remove_prefix(kFrequency.size());
    if (!text.empty()) {
        if (text.substr(0, kIncorporating.size()) != kIncorporating) return std::nullopt;
        text.remove_prefix(kIncorporating.size());
        while (!text.empty()) {
            bool matched = false;
            for (EffectCategory c : kAllCategories) {
                const std::string_view phrase = category_phrase(c);
                if (text.substr(0, phrase.size()) == phrase) {
                    spec.preferred_categories.push_back(c);
                    text.remove_prefix(phrase.size());
                    matched = true;
                    break;
                }
            }
            if (!matched) return std::nullopt;
            if (text.substr(0, 5) == " and ") {
                text.remove_prefix(5);
            } else if (text.substr(0, 2) == ", ") {
                text.remove_prefix(2);
            } else if (!text.empty()) {
                return std::nullopt;
            }
        }
    }
    if (!spec.density_percent && spec.preferred_categories.empty()) return std::nullopt;
    return spec;
}

int quantize_density_percent(double ratio) noexcept {
    const double clamped = std::clamp(ratio, 0.0, 1.0);
    return static_cast<int>(std::lround(clamped * 10.0)) * 10;
}

}  // namespace vcomp
