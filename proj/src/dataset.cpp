#include "vcomp/dataset.hpp"

#include "vcomp/context_encoding.hpp"
#include "vcomp/error.hpp"
#include "vcomp/prompt.hpp"
#include "vcomp/util.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vcomp {

using nlohmann::json;

Sentence SegmentRecord::tokens() const {
    if (words.empty()) return whitespace_tokenize(sentence);
    Sentence out;
    out.reserve(words.size());
    for (const auto& w : words) out.push_back(w.word);
    return out;
}

std::vector<Sentence> Sample::sentences() const {
    std::vector<Sentence> out;
    out.reserve(segments.size());
    for (const auto& s : segments) out.push_back(s.tokens());
    return out;
}

std::vector<double> element_start_times(const SegmentRecord& segment, const SegmentComposition& composition) {
    std::vector<double> out;
    out.reserve(composition.elements.size());
    for (const auto& e : composition.elements) {
        if (segment.words.empty()) {
            out.push_back(0.0);
        } else if (e.trigger.is_whole()) {
            out.push_back(segment.words.front().start_s);
        } else {
            out.push_back(segment.words.at(e.trigger.first).start_s);
        }
    }
    return out;
}

CompositionTarget order_target(const Sample& sample, OrderMode order, std::uint64_t seed) {
    CompositionTarget out = sample.target;
    const std::uint64_t sample_seed = hash_combine(seed, fnv1a64(sample.sample_id));
    for (std::size_t i = 0; i < out.segments.size(); ++i) {
        const auto times = element_start_times(sample.segments.at(i), out.segments[i]);
        out.segments[i] = order_elements(out.segments[i], order, times, hash_combine(sample_seed, i));
    }
    return out;
}

void validate_sample(const Sample& sample) {
    const auto where = [&](const std::string& msg) { return "sample '" + sample.sample_id + "': " + msg; };
    if (sample.segments.empty()) fail(ErrorCode::kValidation, where("no segments"));
    for (std::size_t i = 0; i < sample.segments.size(); ++i) {
        const auto& seg = sample.segments[i];
        if (seg.index != i) fail(ErrorCode::kValidation, where("segment indices must be 0..S-1 in order"));
        double prev_end = -1.0;
        for (const auto& w : seg.words) {
            if (!(w.start_s >= 0.0) || !(w.end_s > w.start_s)) {
                fail(ErrorCode::kValidation, where("bad timing for word '" + w.word + "' in segment " + std::to_string(i)));
            }
            if (w.start_s < prev_end) {
                fail(ErrorCode::kValidation, where("overlapping word timings in segment " + std::to_string(i)));
            }
            prev_end = w.end_s;
        }
        if (seg.audio_embeddings && seg.audio_embeddings->size() > kMaxAudioEmbeddings) {
            fail(ErrorCode::kValidation, where("more than 3 audio embeddings in segment " + std::to_string(i)));
        }
    }
    validate_target(sample.target, sample.sentences());
}

Corpus filter_samples(const Corpus& corpus, std::size_t min_sentences) {
    Corpus out;
    std::copy_if(corpus.begin(), corpus.end(), std::back_inserter(out),
                 [&](const Sample& s) { return s.segments.size() >= min_sentences; });
    return out;
}

Corpus filter_by_meta(const Corpus& corpus, const std::string& key, double threshold) {
    Corpus out;
    for (const auto& s : corpus) {
        const auto it = s.meta.find(key);
        if (it == s.meta.end()) continue;
        const json v = json::parse(it->second, nullptr, false);
        if (v.is_number() && v.get<double>() >= threshold) out.push_back(s);
    }
    return out;
}

Sample truncate_sample(const Sample& sample, std::size_t max_context_tokens, std::size_t window_start,
                       const SegmentCost& cost, std::size_t fixed_cost) {
    const std::size_t S = sample.segments.size();
    if (window_start >= S) {
        fail(ErrorCode::kOutOfRange, "window start " + std::to_string(window_start) + " outside sample of " +
                                         std::to_string(S) + " segments");
    }
    std::size_t used = fixed_cost;
    std::size_t end = window_start;
    while (end < S) {
        const std::size_t c = cost(sample.segments[end]);
        if (used + c > max_context_tokens) break;
        used += c;
        ++end;
    }
    if (end == window_start) {
        fail(ErrorCode::kTooLong, "segment " + std::to_string(window_start) + " of sample '" + sample.sample_id +
                                      "' alone exceeds the budget of " + std::to_string(max_context_tokens) + " tokens");
    }
    if (window_start == 0 && end == S) return sample;

    Sample out;
    out.sample_id = sample.sample_id + "@" + std::to_string(window_start);
    out.prompt = sample.prompt;
    out.meta = sample.meta;
    for (std::size_t i = window_start; i < end; ++i) {
        SegmentRecord seg = sample.segments[i];
        seg.index = i - window_start;
        out.segments.push_back(std::move(seg));
        SegmentComposition comp = sample.target.segments.at(i);
        comp.index = i - window_start;
        out.target.segments.push_back(std::move(comp));
    }
    return out;
}

CorpusSplit split_corpus(const Corpus& corpus, double val_fraction, std::uint64_t seed) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
        fail(ErrorCode::kInvalidArgument, "val_fraction must lie in (0, 1)");
    }
    const std::size_t n = corpus.size();
    // Round first so that e.g. 53,100 x (2,100 / 53,100) does not become 2,101.
    const double exact = static_cast<double>(n) * val_fraction;
    std::size_t n_val = static_cast<std::size_t>(std::ceil(exact - 1e-9));
    if (n >= 1) n_val = std::max<std::size_t>(n_val, 1);
    n_val = std::min(n_val, n);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(splitmix64(seed ^ 0x73706c6974ULL));
    rng.shuffle(order);
    std::vector<bool> is_val(n, false);
    for (std::size_t k = 0; k < n_val; ++k) is_val[order[k]] = true;

    CorpusSplit out;
    for (std::size_t i = 0; i < n; ++i) (is_val[i] ? out.val : out.train).push_back(corpus[i]);
    return out;
}

double CorpusStats::mean_trigger_ratio() const noexcept {
    if (trigger_ratios.empty()) return 0.0;
    return std::accumulate(trigger_ratios.begin(), trigger_ratios.end(), 0.0) /
           static_cast<double>(trigger_ratios.size());
}

double trigger_ratio(const CompositionTarget& target) noexcept {
    if (target.segments.empty()) return 0.0;
    std::size_t hit = 0;
    for (const auto& s : target.segments) hit += s.elements.empty() ? 0 : 1;
    return static_cast<double>(hit) / static_cast<double>(target.segments.size());
}

CorpusStats compute_target_stats(const std::vector<CompositionTarget>& targets) {
    CorpusStats st;
    st.trigger_ratio_histogram.assign(10, 0);
    for (const auto& t : targets) {
        ++st.num_samples;
        st.num_segments += t.segments.size();
        ++st.length_histogram[t.segments.size()];
        const double r = trigger_ratio(t);
        st.trigger_ratios.push_back(r);
        ++st.trigger_ratio_histogram[std::min<std::size_t>(9, static_cast<std::size_t>(r * 10.0))];
        for (const auto& seg : t.segments) {
            for (const auto& e : seg.elements) {
                ++st.num_elements;
                ++st.effect_usage[e.effect_key()];
                ++st.category_usage[e.category];
            }
        }
    }
    return st;
}

CorpusStats compute_stats(const Corpus& corpus) {
    std::vector<CompositionTarget> targets;
    targets.reserve(corpus.size());
    for (const auto& s : corpus) targets.push_back(s.target);
    return compute_target_stats(targets);
}

const std::vector<std::string>& synthetic_lexicon() {
    static const std::vector<std::string> words = {
        "apple",  "bread",   "cream",  "glass",   "wipes",  "great",  "delicious", "video",
        "morning", "kitchen", "garden", "summer",  "winter", "pack",   "fresh",     "bright",
        "simple", "quick",   "secret", "family",  "market", "coffee", "butter",    "lemon",
        "honey",  "pepper",  "salad",  "noodle",  "cookie", "window", "mirror",    "carpet",
        "pillow", "blanket", "basket", "bottle",  "candle", "castle", "forest",    "river",
        "island", "rocket",  "planet", "silver",  "golden", "purple", "orange",    "yellow",
        "happy",  "lucky",   "smooth", "crispy",  "tender", "sweet",  "spicy",     "little",
        "giant",  "modern",  "classic", "cozy",   "shiny",  "soft",   "warm",      "clean"};
    return words;
}

std::string cue_token(std::size_t level) { return "CUE" + std::to_string(level); }

std::uint64_t synthetic_text_effect_hash(std::size_t topic) noexcept {
    return hash_combine(0x7465787465ULL, topic);
}
std::uint64_t synthetic_sound_effect_hash(std::size_t emotion, std::size_t topic) noexcept {
    return hash_combine(hash_combine(0x736f756e64ULL, emotion), topic);
}
std::uint64_t synthetic_sticker_hash(std::size_t topic) noexcept {
    return hash_combine(0x737469636bULL, topic);
}

std::vector<SyntheticSample> generate_synthetic_detailed(const SyntheticConfig& config, const EffectPool& pool) {
    if (!(config.density >= 0.0 && config.density <= 1.0)) {
        fail(ErrorCode::kInvalidArgument, "density must lie in [0, 1]");
    }
    if (!(config.prompt_rate >= 0.0 && config.prompt_rate <= 1.0)) {
        fail(ErrorCode::kInvalidArgument, "prompt_rate must lie in [0, 1]");
    }
    const auto [seg_lo, seg_hi] = config.segments_range;
    const auto [w_lo, w_hi] = config.words_range;
    const auto& lexicon = synthetic_lexicon();
    if (seg_lo < 1 || seg_lo > seg_hi || w_lo < 1 || w_lo > w_hi || w_hi > lexicon.size()) {
        fail(ErrorCode::kInvalidArgument, "bad segments_range / words_range");
    }
    if (config.num_topics == 0 || config.num_emotions == 0) fail(ErrorCode::kInvalidArgument, "need topics and emotions");
    if (config.density > 0.0) {
        for (EffectCategory c : {EffectCategory::kTextEffect, EffectCategory::kSoundEffect, EffectCategory::kImageSticker}) {
            if (pool.count(c) == 0) {
                fail(ErrorCode::kInvalidArgument, "pool has no " + std::string(category_tag(c)) + " effects");
            }
        }
    }

    const StubProvider visual(MediaModality::kVisual, config.visual_dim, config.provider_seed);
    const StubProvider audio(MediaModality::kAudio, config.audio_dim, config.provider_seed);
    const auto n_te = pool.count(EffectCategory::kTextEffect);
    const auto n_se = pool.count(EffectCategory::kSoundEffect);
    const auto n_st = pool.count(EffectCategory::kImageSticker);

    std::vector<SyntheticSample> out;
    out.reserve(config.num_samples);
    for (std::size_t n = 0; n < config.num_samples; ++n) {
        Rng rng(hash_combine(config.seed, n));
        SyntheticSample item;
        Sample& sample = item.sample;
        char id[64];
        std::snprintf(id, sizeof id, "synth-%llu-%06zu", static_cast<unsigned long long>(config.seed), n);
        sample.sample_id = id;
        sample.meta["source"] = "\"synthetic\"";

        const auto S = static_cast<std::size_t>(rng.range(static_cast<std::int64_t>(seg_lo), static_cast<std::int64_t>(seg_hi)));
        const bool prompted = rng.bernoulli(config.prompt_rate);
        const std::uint64_t variant = rng.below(3);  // 0: density, 1: stickers, 2: both
        const bool density_prompt = prompted && variant != 1;
        const bool sticker_prompt = prompted && variant != 0;
        // Density prompts raise the trigger threshold: cue levels below the
        // boost level fire as well.
        const auto min_level = static_cast<std::int64_t>(std::ceil(config.density * 10.0 - 1e-9));
        const std::size_t boost_level =
            density_prompt ? static_cast<std::size_t>(rng.range(min_level, 10)) : 0;

        double clock = 0.0;
        sample.target = CompositionTarget::empty(S);
        for (std::size_t i = 0; i < S; ++i) {
            SyntheticSegmentLatent lat;
            lat.topic = static_cast<std::size_t>(rng.below(config.num_topics));
            lat.emotion = static_cast<std::size_t>(rng.below(config.num_emotions));
            lat.salience = rng.uniform();
            const auto nw = static_cast<std::size_t>(rng.range(static_cast<std::int64_t>(w_lo), static_cast<std::int64_t>(w_hi)));

            std::vector<std::size_t> pick(lexicon.size());
            std::iota(pick.begin(), pick.end(), std::size_t{0});
            for (std::size_t k = 0; k < nw; ++k) {
                const std::size_t j = k + static_cast<std::size_t>(rng.below(pick.size() - k));
                std::swap(pick[k], pick[j]);
            }
            lat.cue_position = static_cast<std::size_t>(rng.below(nw));
            const bool emphasized = lat.salience < config.density;
            const std::size_t level = std::min<std::size_t>(9, static_cast<std::size_t>(lat.salience * 10.0));
            const bool triggered = emphasized || level < boost_level;

            std::vector<std::string> tokens;
            for (std::size_t k = 0; k < nw; ++k) {
                if (k == lat.cue_position) tokens.push_back(emphasized ? std::string(kEmphasisMarker) : cue_token(level));
                tokens.push_back(lexicon[pick[k]]);
            }

            SegmentRecord seg;
            seg.index = i;
            for (const auto& tok : tokens) {
                const double dur = rng.uniform(0.2, 0.5);
                seg.words.push_back({tok, clock, clock + dur});
                clock += dur + 0.05;
            }
            clock += 0.3;
            seg.sentence = join(tokens, " ");
            seg.visual_embedding = visual.encode(LatentClass{lat.topic, 0.0}).front();
            seg.audio_embeddings = audio.encode(LatentClass{lat.emotion, seg.end_s() - seg.start_s()});

            if (triggered) {
                auto& elements = sample.target.segments[i].elements;
                if (lat.emotion == 0) {
                    elements.push_back({TriggerPosition::whole(), EffectCategory::kSoundEffect,
                                        pool.at(EffectCategory::kSoundEffect,
                                                synthetic_sound_effect_hash(lat.emotion, lat.topic) % n_se).name});
                }
                if (i % 3 == 2 || sticker_prompt) {
                    elements.push_back({TriggerPosition::whole(), EffectCategory::kImageSticker,
                                        pool.at(EffectCategory::kImageSticker, synthetic_sticker_hash(lat.topic) % n_st).name});
                }
                const std::size_t w = lat.cue_position + 1;
                elements.push_back({TriggerPosition::span(w, w), EffectCategory::kTextEffect,
                                    pool.at(EffectCategory::kTextEffect, synthetic_text_effect_hash(lat.topic) % n_te).name});
            }
            sample.segments.push_back(std::move(seg));
            item.latents.push_back(lat);
        }
        if (prompted) {
            PromptSpec spec;
            if (density_prompt) spec.density_percent = quantize_density_percent(trigger_ratio(sample.target));
            if (sticker_prompt) spec.preferred_categories.push_back(EffectCategory::kImageSticker);
            sample.prompt = render_prompt(spec);
        }
        out.push_back(std::move(item));
    }
    return out;
}

Corpus generate_synthetic(const SyntheticConfig& config, const EffectPool& pool) {
    Corpus out;
    for (auto& s : generate_synthetic_detailed(config, pool)) out.push_back(std::move(s.sample));
    return out;
}

// ---------------------------------------------------------------------------
// JSON lines

namespace {

json embedding_json(const Embedding& e) {
    json a = json::array();
    for (float x : e) a.push_back(x);
    return a;
}

[[noreturn]] void schema_fail(std::size_t record, const std::string& msg) {
    fail(ErrorCode::kSchema, "record " + std::to_string(record) + ": " + msg);
}

const json& require(const json& obj, const char* key, std::size_t record) {
    if (!obj.is_object() || !obj.contains(key)) schema_fail(record, std::string("missing field '") + key + "'");
    return obj.at(key);
}

Embedding parse_embedding(const json& a, std::size_t record) {
    if (!a.is_array()) schema_fail(record, "embedding must be an array");
    Embedding e;
    e.reserve(a.size());
    for (const auto& x : a) {
        if (!x.is_number()) schema_fail(record, "embedding entries must be numbers");
        e.push_back(x.get<float>());
    }
    return e;
}

std::optional<std::string> optional_string(const json& obj, const char* key, std::size_t record) {
    if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    if (!obj.at(key).is_string()) schema_fail(record, std::string("'") + key + "' must be a string or null");
    return obj.at(key).get<std::string>();
}

}  // namespace

std::string sample_to_json_line(const Sample& sample) {
    json j;
    j["sample_id"] = sample.sample_id;
    j["prompt"] = sample.prompt ? json(*sample.prompt) : json(nullptr);
    json meta = json::object();
    for (const auto& [k, v] : sample.meta) {
        json parsed = json::parse(v, nullptr, false);
        meta[k] = parsed.is_discarded() ? json(v) : parsed;
    }
    j["meta"] = meta;
    json segs = json::array();
    for (const auto& s : sample.segments) {
        json js;
        js["index"] = s.index;
        js["sentence"] = s.sentence;
        json words = json::array();
        for (const auto& w : s.words) words.push_back({{"w", w.word}, {"start_s", w.start_s}, {"end_s", w.end_s}});
        js["words"] = words;
        js["visual_embedding"] = s.visual_embedding ? embedding_json(*s.visual_embedding) : json(nullptr);
        if (s.audio_embeddings) {
            json a = json::array();
            for (const auto& e : *s.audio_embeddings) a.push_back(embedding_json(e));
            js["audio_embeddings"] = a;
        } else {
            js["audio_embeddings"] = nullptr;
        }
        js["frame_ref"] = s.frame_ref ? json(*s.frame_ref) : json(nullptr);
        js["audio_ref"] = s.audio_ref ? json(*s.audio_ref) : json(nullptr);
        segs.push_back(std::move(js));
    }
    j["segments"] = segs;
    json target = json::array();
    for (const auto& seg : sample.target.segments) {
        json elements = json::array();
        for (const auto& e : seg.elements) {
            json trig;
            if (e.trigger.is_whole()) {
                trig = {{"kind", "whole_sentence"}, {"span", nullptr}};
            } else {
                trig = {{"kind", "words"}, {"span", {e.trigger.first, e.trigger.last}}};
            }
            elements.push_back({{"trigger", trig}, {"category", category_tag(e.category)}, {"name", e.name}});
        }
        target.push_back({{"index", seg.index}, {"elements", elements}});
    }
    j["target"] = target;
    return j.dump();
}

Sample sample_from_json_line(std::string_view line, std::size_t record) {
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) schema_fail(record, "not a JSON object");
    Sample s;
    const json& id = require(j, "sample_id", record);
    if (!id.is_string()) schema_fail(record, "sample_id must be a string");
    s.sample_id = id.get<std::string>();
    s.prompt = optional_string(j, "prompt", record);
    if (j.contains("meta") && !j.at("meta").is_null()) {
        if (!j.at("meta").is_object()) schema_fail(record, "meta must be an object");
        for (const auto& [k, v] : j.at("meta").items()) s.meta[k] = v.dump();
    }
    const json& segs = require(j, "segments", record);
    if (!segs.is_array() || segs.empty()) schema_fail(record, "segments must be a non-empty array");
    for (const auto& js : segs) {
        SegmentRecord seg;
        const json& idx = require(js, "index", record);
        if (!idx.is_number_unsigned()) schema_fail(record, "segment index must be a non-negative integer");
        seg.index = idx.get<std::size_t>();
        const json& sentence = require(js, "sentence", record);
        if (!sentence.is_string()) schema_fail(record, "sentence must be a string");
        seg.sentence = sentence.get<std::string>();
        const json& words = require(js, "words", record);
        if (!words.is_array()) schema_fail(record, "segment " + std::to_string(seg.index) + ": words must be an array");
        for (const auto& w : words) {
            const json& wt = require(w, "w", record);
            const json& st = require(w, "start_s", record);
            const json& en = require(w, "end_s", record);
            if (!wt.is_string() || !st.is_number() || !en.is_number()) schema_fail(record, "malformed word timing");
            seg.words.push_back({wt.get<std::string>(), st.get<double>(), en.get<double>()});
        }
        if (js.contains("visual_embedding") && !js.at("visual_embedding").is_null()) {
            seg.visual_embedding = parse_embedding(js.at("visual_embedding"), record);
        }
        if (js.contains("audio_embeddings") && !js.at("audio_embeddings").is_null()) {
            const json& a = js.at("audio_embeddings");
            if (!a.is_array() || a.size() > kMaxAudioEmbeddings) schema_fail(record, "audio_embeddings: array of at most 3");
            std::vector<Embedding> v;
            for (const auto& e : a) v.push_back(parse_embedding(e, record));
            seg.audio_embeddings = std::move(v);
        }
        seg.frame_ref = optional_string(js, "frame_ref", record);
        seg.audio_ref = optional_string(js, "audio_ref", record);
        s.segments.push_back(std::move(seg));
    }
    for (std::size_t i = 0; i < s.segments.size(); ++i) {
        if (s.segments[i].index != i) schema_fail(record, "segment indices must be 0..S-1 in order");
    }

    const std::size_t S = s.segments.size();
    s.target = CompositionTarget::empty(S);
    const json& target = require(j, "target", record);
    if (!target.is_array()) schema_fail(record, "target must be an array");
    std::vector<bool> seen(S, false);
    for (const auto& jt : target) {
        const json& idx = require(jt, "index", record);
        if (!idx.is_number_unsigned()) schema_fail(record, "target index must be a non-negative integer");
        const auto i = idx.get<std::size_t>();
        if (i >= S) {
            fail(ErrorCode::kValidation, "record " + std::to_string(record) + ": target references segment " +
                                             std::to_string(i) + " but the sample has " + std::to_string(S));
        }
        if (seen[i]) schema_fail(record, "duplicate target index " + std::to_string(i));
        seen[i] = true;
        const json& elements = require(jt, "elements", record);
        if (!elements.is_array()) schema_fail(record, "elements must be an array");
        for (const auto& je : elements) {
            EffectElement e;
            const json& trig = require(je, "trigger", record);
            const json& kind = require(trig, "kind", record);
            if (kind == "whole_sentence") {
                e.trigger = TriggerPosition::whole();
            } else if (kind == "words") {
                const json& span = require(trig, "span", record);
                if (!span.is_array() || span.size() != 2 || !span[0].is_number_unsigned() || !span[1].is_number_unsigned()) {
                    schema_fail(record, "word trigger needs span [first, last]");
                }
                e.trigger = TriggerPosition::span(span[0].get<std::size_t>(), span[1].get<std::size_t>());
            } else {
                schema_fail(record, "unknown trigger kind");
            }
            const json& cat = require(je, "category", record);
            const auto c = cat.is_string() ? parse_category(cat.get<std::string>()) : std::nullopt;
            if (!c) schema_fail(record, "unknown category");
            e.category = *c;
            const json& name = require(je, "name", record);
            if (!name.is_string()) schema_fail(record, "name must be a string");
            e.name = name.get<std::string>();
            s.target.segments[i].elements.push_back(std::move(e));
        }
    }
    try {
        validate_sample(s);
    } catch (const Error& e) {
        fail(e.code(), "record " + std::to_string(record) + ": " + e.what());
    }
    return s;
}

Corpus parse_jsonl(std::string_view text) {
    Corpus out;
    std::size_t record = 0;
    for (const std::string& line : split(text, '\n')) {
        if (trim(line).empty()) continue;
        out.push_back(sample_from_json_line(line, record++));
    }
    return out;
}

Corpus ingest_jsonl(const std::filesystem::path& path) { return parse_jsonl(read_file(path.string())); }

std::string format_jsonl(const Corpus& corpus) {
    std::string out;
    for (const auto& s : corpus) {
        out += sample_to_json_line(s);
        out += '\n';
    }
    return out;
}

void export_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
    write_file(path.string(), format_jsonl(corpus));
}

}  // namespace vcomp
