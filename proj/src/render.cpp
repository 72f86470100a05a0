#include "vcomp/render.hpp"

#include "vcomp/error.hpp"
#include "vcomp/util.hpp"

#include "json.hpp"

#include <algorithm>

namespace vcomp {

using nlohmann::json;

std::string track_name(EffectCategory category, std::size_t track) {
    std::string out(category_tag(category));
    if (track > 0) out += "." + std::to_string(track);
    return out;
}

CompositionDocument render(const Sample& sample, const CompositionTarget& target, const EffectPool& pool) {
    const auto sentences = sample.sentences();
    if (target.segments.size() != sample.segments.size()) {
        fail(ErrorCode::kValidation, "sample '" + sample.sample_id + "': target has " +
                                         std::to_string(target.segments.size()) + " segments, sample has " +
                                         std::to_string(sample.segments.size()));
    }
    validate_target(target, sentences);

    CompositionDocument doc;
    doc.sample_id = sample.sample_id;
    doc.pool_id = pool.id();
    for (std::size_t i = 0; i < target.segments.size(); ++i) {
        const auto& seg = sample.segments[i];
        for (const auto& e : target.segments[i].elements) {
            const Effect& effect = pool.lookup(e.category, e.name);
            if (seg.words.empty()) {
                fail(ErrorCode::kValidation, "sample '" + sample.sample_id + "': segment " + std::to_string(i) +
                                                 " has an element but no word timings");
            }
            if (!e.trigger.is_whole() && e.trigger.last >= seg.words.size()) {
                fail(ErrorCode::kValidation, "sample '" + sample.sample_id + "': segment " + std::to_string(i) +
                                                 " has fewer word timings than sentence tokens");
            }
            TimelineEvent ev;
            ev.category = e.category;
            ev.name = e.name;
            ev.start_s = e.trigger.is_whole() ? seg.words.front().start_s : seg.words[e.trigger.first].start_s;
            ev.end_s = e.trigger.is_whole() ? seg.words.back().end_s : seg.words[e.trigger.last].end_s;
            if (!(ev.end_s > ev.start_s)) {
                fail(ErrorCode::kValidation, "sample '" + sample.sample_id + "': empty time window in segment " +
                                                 std::to_string(i));
            }
            ev.params = effect.default_params;
            ev.segment = i;
            ev.trigger = e.trigger;
            doc.events.push_back(std::move(ev));
        }
    }
    std::stable_sort(doc.events.begin(), doc.events.end(),
                     [](const TimelineEvent& a, const TimelineEvent& b) { return a.start_s < b.start_s; });

    // Half-open windows: an event may start exactly when the previous one ends.
    std::array<std::vector<double>, kNumCategories> track_end;
    for (auto& ev : doc.events) {
        auto& ends = track_end[category_rank(ev.category)];
        std::size_t t = 0;
        while (t < ends.size() && ends[t] > ev.start_s) ++t;
        if (t == ends.size()) ends.push_back(0.0);
        ends[t] = ev.end_s;
        ev.track = t;
    }
    return doc;
}

std::string document_to_json(const CompositionDocument& doc, int indent) {
    json events = json::array();
    for (const auto& ev : doc.events) {
        json trigger = {{"kind", ev.trigger.is_whole() ? "whole_sentence" : "words"}, {"span", nullptr}};
        if (!ev.trigger.is_whole()) trigger["span"] = {ev.trigger.first, ev.trigger.last};
        events.push_back({{"category", category_tag(ev.category)},
                          {"name", ev.name},
                          {"start_s", ev.start_s},
                          {"end_s", ev.end_s},
                          {"track", ev.track},
                          {"track_name", track_name(ev.category, ev.track)},
                          {"params", ev.params},
                          {"source", {{"segment", ev.segment}, {"trigger", trigger}}}});
    }
    json out = {{"sample_id", doc.sample_id}, {"pool_id", doc.pool_id}, {"events", events}};
    return out.dump(indent);
}

CompositionDocument document_from_json(std::string_view text) {
    CompositionDocument doc;
    try {
        const json j = json::parse(text);
        doc.sample_id = j.at("sample_id").get<std::string>();
        doc.pool_id = j.at("pool_id").get<std::string>();
        for (const auto& e : j.at("events")) {
            TimelineEvent ev;
            const auto tag = e.at("category").get<std::string>();
            const auto cat = parse_category(tag);
            if (!cat) fail(ErrorCode::kSchema, "unknown category '" + tag + "'");
            ev.category = *cat;
            ev.name = e.at("name").get<std::string>();
            ev.start_s = e.at("start_s").get<double>();
            ev.end_s = e.at("end_s").get<double>();
            ev.track = e.at("track").get<std::size_t>();
            ev.params = e.at("params").get<EffectParams>();
            const auto& src = e.at("source");
            ev.segment = src.at("segment").get<std::size_t>();
            const auto& trig = src.at("trigger");
            if (trig.at("kind").get<std::string>() == "words") {
                const auto& span = trig.at("span");
                ev.trigger = TriggerPosition::span(span.at(0).get<std::size_t>(), span.at(1).get<std::size_t>());
            }
            doc.events.push_back(std::move(ev));
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::kSchema, std::string("composition document: ") + e.what());
    }
    return doc;
}

void write_document(const CompositionDocument& doc, const std::filesystem::path& path) {
    write_file(path.string(), document_to_json(doc) + "\n");
}

}  // namespace vcomp
