#pragma once

#include "vcomp/dataset.hpp"
#include "vcomp/effect_catalog.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace vcomp {

struct TimelineEvent {
    EffectCategory category = EffectCategory::kTextEffect;
    std::string name;
    double start_s = 0.0;
    double end_s = 0.0;
    std::size_t track = 0;  // 0 is "{category}", n > 0 is "{category}.n"
    EffectParams params;
    std::size_t segment = 0;
    TriggerPosition trigger;

    friend bool operator==(const TimelineEvent&, const TimelineEvent&) = default;
};

struct CompositionDocument {
    std::string sample_id;
    std::string pool_id;
    std::vector<TimelineEvent> events;  // sorted by start_s

    friend bool operator==(const CompositionDocument&, const CompositionDocument&) = default;
};

std::string track_name(EffectCategory category, std::size_t track);

/// Lays the target out on a timeline. Word spans run from the first word's
/// start to the last word's end, whole-sentence elements cover the sentence.
/// Same-category events that overlap go to the lowest free sibling track.
/// Throws kValidation for a target that does not fit the sample, kNotFound
/// for an effect missing from the pool.
CompositionDocument render(const Sample& sample, const CompositionTarget& target, const EffectPool& pool);

/// indent < 0 gives a single line.
std::string document_to_json(const CompositionDocument& doc, int indent = 2);
CompositionDocument document_from_json(std::string_view text);
void write_document(const CompositionDocument& doc, const std::filesystem::path& path);

}  // namespace vcomp
