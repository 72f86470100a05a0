#include "vcomp/vcomp.h"

#include "vcomp/composer.hpp"
#include "vcomp/dataset.hpp"
#include "vcomp/error.hpp"
#include "vcomp/evaluation.hpp"
#include "vcomp/render.hpp"
#include "vcomp/util.hpp"

#include "json.hpp"

#include <cstring>
#include <new>

using nlohmann::json;
using namespace vcomp;

struct vcomp_pool {
    EffectPool pool;
};
struct vcomp_corpus {
    Corpus corpus;
};
struct vcomp_model {
    Composer model;
};

namespace {

thread_local std::string last_error;

template <typename Fn>
vcomp_status guarded(Fn&& fn) {
    try {
        fn();
        last_error.clear();
        return VCOMP_OK;
    } catch (const Error& e) {
        last_error = e.what();
        return static_cast<vcomp_status>(e.code());
    } catch (const json::exception& e) {
        last_error = e.what();
        return VCOMP_E_SCHEMA;
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
        return VCOMP_E_INTERNAL;
    } catch (const std::exception& e) {
        last_error = e.what();
        return VCOMP_E_INTERNAL;
    }
}

void need(const void* p, const char* what) {
    if (p == nullptr) fail(ErrorCode::kInvalidArgument, std::string(what) + " must not be null");
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void put(char** out, const json& j) {
    if (out != nullptr) *out = dup_string(j.dump());
}

// Flattens known sections into one object; top-level keys win over sections.
json config_of(const char* text) {
    if (text == nullptr || *text == '\0') return json::object();
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorCode::kParse, std::string("config: ") + e.what());
    }
    if (!j.is_object()) fail(ErrorCode::kSchema, "config must be a JSON object");
    json flat = json::object();
    for (const char* section : {"synth", "model", "format", "context", "train", "decode", "eval"}) {
        const auto it = j.find(section);
        if (it != j.end() && it->is_object()) {
            for (const auto& [k, v] : it->items()) flat[k] = v;
        }
    }
    for (const auto& [k, v] : j.items()) {
        if (!v.is_object()) flat[k] = v;
    }
    return flat;
}

template <typename T>
T opt(const json& j, const char* key, T fallback) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception& e) {
        fail(ErrorCode::kSchema, std::string("config field '") + key + "': " + e.what());
    }
}

std::pair<std::size_t, std::size_t> range_of(const json& j, const char* key, std::pair<std::size_t, std::size_t> d) {
    const auto v = opt<std::vector<std::size_t>>(j, key, {d.first, d.second});
    if (v.size() != 2 || v[0] > v[1]) fail(ErrorCode::kInvalidArgument, std::string(key) + " must be [lo, hi]");
    return {v[0], v[1]};
}

EffectCategory category_of(const std::string& tag) {
    const auto c = parse_category(tag);
    if (!c) fail(ErrorCode::kInvalidArgument, "unknown category '" + tag + "'");
    return *c;
}

json stats_json(const CorpusStats& s) {
    json lengths = json::object();
    for (const auto& [k, v] : s.length_histogram) lengths[std::to_string(k)] = v;
    json categories = json::object();
    for (const auto& [c, v] : s.category_usage) categories[std::string(category_tag(c))] = v;
    return {{"num_samples", s.num_samples},
            {"num_segments", s.num_segments},
            {"num_elements", s.num_elements},
            {"mean_trigger_ratio", s.mean_trigger_ratio()},
            {"length_histogram", lengths},
            {"trigger_ratio_histogram", s.trigger_ratio_histogram},
            {"category_usage", categories},
            {"effect_usage", s.effect_usage}};
}

json metrics_summary(const MetricReport& r) {
    return {{"word_accuracy", r.word_accuracy},
            {"elem_at_word", r.elem_at_word},
            {"elem_at_sentence", r.elem_at_sentence},
            {"overall", r.overall},
            {"dropped", r.diagnostics.dropped()}};
}

}  // namespace

extern "C" {

const char* vcomp_version(void) { return "0.1.0"; }

const char* vcomp_status_name(vcomp_status status) { return error_code_name(static_cast<ErrorCode>(status)); }

const char* vcomp_last_error(void) { return last_error.c_str(); }

void vcomp_free_string(char* s) { std::free(s); }

vcomp_status vcomp_pool_load(const char* path, vcomp_pool** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new vcomp_pool{load_pool(path)};
    });
}

vcomp_status vcomp_pool_synthetic(const char* sizes_json, uint64_t seed, vcomp_pool** out) {
    return guarded([&] {
        need(out, "out");
        CategorySizes sizes = {{EffectCategory::kTextAnimation, 8},
                               {EffectCategory::kTextEffect, 16},
                               {EffectCategory::kTextTemplate, 8},
                               {EffectCategory::kSoundEffect, 8},
                               {EffectCategory::kImageSticker, 16}};
        const json j = config_of(sizes_json);
        for (const auto& [tag, n] : j.items()) {
            if (tag == "full_scale" && n.get<bool>()) {
                sizes = full_scale_sizes();
                continue;
            }
            if (!parse_category(tag)) continue;
            sizes[category_of(tag)] = n.get<std::size_t>();
        }
        *out = new vcomp_pool{make_synthetic_pool(sizes, seed)};
    });
}

vcomp_status vcomp_pool_save(const vcomp_pool* pool, const char* path) {
    return guarded([&] {
        need(pool, "pool");
        need(path, "path");
        save_pool(pool->pool, path);
    });
}

vcomp_status vcomp_pool_describe(const vcomp_pool* pool, char** json_out) {
    return guarded([&] {
        need(pool, "pool");
        json counts = json::object();
        for (const auto c : kAllCategories) counts[std::string(category_tag(c))] = pool->pool.count(c);
        put(json_out, {{"pool_id", pool->pool.id()}, {"size", pool->pool.size()}, {"counts", counts}});
    });
}

void vcomp_pool_free(vcomp_pool* pool) { delete pool; }

vcomp_status vcomp_corpus_load(const char* path, vcomp_corpus** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new vcomp_corpus{ingest_jsonl(path)};
    });
}

vcomp_status vcomp_corpus_save(const vcomp_corpus* corpus, const char* path) {
    return guarded([&] {
        need(corpus, "corpus");
        need(path, "path");
        export_jsonl(corpus->corpus, path);
    });
}

size_t vcomp_corpus_size(const vcomp_corpus* corpus) { return corpus ? corpus->corpus.size() : 0; }

vcomp_status vcomp_corpus_generate(const char* config_json, const vcomp_pool* pool, vcomp_corpus** out) {
    return guarded([&] {
        need(pool, "pool");
        need(out, "out");
        const json j = config_of(config_json);
        SyntheticConfig c;
        c.num_samples = opt(j, "num_samples", c.num_samples);
        c.segments_range = range_of(j, "segments_range", c.segments_range);
        c.words_range = range_of(j, "words_range", c.words_range);
        c.density = opt(j, "density", c.density);
        c.prompt_rate = opt(j, "prompt_rate", c.prompt_rate);
        c.seed = opt(j, "seed", c.seed);
        c.num_topics = opt(j, "num_topics", c.num_topics);
        c.num_emotions = opt(j, "num_emotions", c.num_emotions);
        c.visual_dim = opt(j, "visual_dim", c.visual_dim);
        c.audio_dim = opt(j, "audio_dim", c.audio_dim);
        c.provider_seed = opt(j, "provider_seed", c.provider_seed);
        *out = new vcomp_corpus{generate_synthetic(c, pool->pool)};
    });
}

vcomp_status vcomp_corpus_filter(const vcomp_corpus* corpus, size_t min_sentences, vcomp_corpus** out) {
    return guarded([&] {
        need(corpus, "corpus");
        need(out, "out");
        *out = new vcomp_corpus{filter_samples(corpus->corpus, min_sentences)};
    });
}

vcomp_status vcomp_corpus_split(const vcomp_corpus* corpus, double val_fraction, uint64_t seed,
                                vcomp_corpus** train_out, vcomp_corpus** val_out) {
    return guarded([&] {
        need(corpus, "corpus");
        need(train_out, "train_out");
        need(val_out, "val_out");
        CorpusSplit s = split_corpus(corpus->corpus, val_fraction, seed);
        auto* t = new vcomp_corpus{std::move(s.train)};
        *val_out = new vcomp_corpus{std::move(s.val)};
        *train_out = t;
    });
}

vcomp_status vcomp_corpus_stats(const vcomp_corpus* corpus, char** json_out) {
    return guarded([&] {
        need(corpus, "corpus");
        put(json_out, stats_json(compute_stats(corpus->corpus)));
    });
}

vcomp_status vcomp_corpus_validate(const vcomp_corpus* corpus, const vcomp_pool* pool) {
    return guarded([&] {
        need(corpus, "corpus");
        for (const auto& s : corpus->corpus) {
            validate_sample(s);
            if (pool == nullptr) continue;
            for (const auto& seg : s.target.segments) {
                for (const auto& e : seg.elements) pool->pool.lookup(e.category, e.name);
            }
        }
    });
}

void vcomp_corpus_free(vcomp_corpus* corpus) { delete corpus; }

vcomp_status vcomp_model_create(const char* config_json, const vcomp_corpus* corpus, const vcomp_pool* pool,
                                vcomp_model** out) {
    return guarded([&] {
        need(corpus, "corpus");
        need(out, "out");
        const std::string flat = config_of(config_json).dump();
        const ModelConfig mc = model_config_from_json(flat);
        const FormatOptions fo = format_options_from_json(flat);
        const ContextOptions co = context_options_from_json(flat);
        const std::size_t max_index = std::max<std::size_t>(127, mc.max_segments);
        *out = new vcomp_model{Composer(mc, build_vocabulary(corpus->corpus, pool ? &pool->pool : nullptr, max_index),
                                        fo, co)};
    });
}

vcomp_status vcomp_model_load(const char* path, vcomp_model** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new vcomp_model{load_checkpoint(path)};
    });
}

vcomp_status vcomp_model_save(const vcomp_model* model, const char* path) {
    return guarded([&] {
        need(model, "model");
        need(path, "path");
        save_checkpoint(model->model, path);
    });
}

vcomp_status vcomp_model_describe(const vcomp_model* model, char** json_out) {
    return guarded([&] {
        need(model, "model");
        const Composer& m = model->model;
        put(json_out, {{"model", json::parse(model_config_to_json(m.config()))},
                       {"format", json::parse(format_options_to_json(m.format()))},
                       {"context", json::parse(context_options_to_json(m.context_options()))},
                       {"vocab_size", m.vocab().size()},
                       {"num_parameters", m.num_parameters()}});
    });
}

vcomp_status vcomp_model_train(vcomp_model* model, const vcomp_corpus* train_set, const vcomp_corpus* val_set,
                               const vcomp_pool* pool, const char* config_json, vcomp_log_fn on_log, void* user,
                               char** summary_json) {
    return guarded([&] {
        need(model, "model");
        need(train_set, "train_set");
        need(pool, "pool");
        const TrainConfig tc = train_config_from_json(config_of(config_json).dump());
        TrainHooks hooks;
        if (on_log != nullptr) {
            hooks.on_log = [&](const LogEntry& e) {
                const std::string line = json{{"step", e.step},
                                              {"loss", e.loss},
                                              {"learning_rate", e.learning_rate},
                                              {"token_accuracy", e.token_accuracy},
                                              {"grad_norm", e.grad_norm}}
                                             .dump();
                on_log(line.c_str(), user);
            };
        }
        const Corpus empty;
        const TrainReport r =
            train(model->model, train_set->corpus, val_set ? val_set->corpus : empty, tc, pool->pool, {}, nullptr, hooks);
        json summary = {{"steps_run", r.steps_run},
                        {"seconds", r.seconds},
                        {"initial_val_loss", r.initial_val_loss},
                        {"final_val_loss", r.final_val_loss},
                        {"final_train_loss", r.step_losses.empty() ? 0.0 : r.step_losses.back()}};
        if (!r.validation.empty() && r.validation.back().metrics) {
            summary["metrics"] = metrics_summary(*r.validation.back().metrics);
        }
        put(summary_json, summary);
    });
}

vcomp_status vcomp_model_compose(const vcomp_model* model, const vcomp_corpus* corpus, const vcomp_pool* pool,
                                 const char* config_json, const char* out_path, char** summary_json) {
    return guarded([&] {
        need(model, "model");
        need(corpus, "corpus");
        need(pool, "pool");
        need(out_path, "out_path");
        const json j = config_of(config_json);
        DecodeOptions d;
        const auto mode = opt<std::string>(j, "mode", "greedy");
        if (mode == "greedy") {
            d.mode = DecodeOptions::Mode::kGreedy;
        } else if (mode == "sample") {
            d.mode = DecodeOptions::Mode::kSample;
        } else {
            fail(ErrorCode::kInvalidArgument, "decode mode must be greedy or sample");
        }
        d.temperature = opt(j, "temperature", d.temperature);
        d.seed = opt(j, "seed", d.seed);
        d.constrained = opt(j, "constrained", true);
        if (j.contains("max_new_tokens") && !j["max_new_tokens"].is_null()) {
            d.max_new_tokens = opt<std::size_t>(j, "max_new_tokens", 0);
        }
        std::optional<PromptSpec> prompt;
        PromptSpec spec;
        if (j.contains("density") && !j["density"].is_null()) spec.density_percent = opt<int>(j, "density", 0);
        for (const auto& tag : opt<std::vector<std::string>>(j, "categories", {})) {
            spec.preferred_categories.push_back(category_of(tag));
        }
        if (!spec.empty() || !opt(j, "use_sample_prompt", true)) prompt = spec;

        const auto results = compose_corpus(model->model, corpus->corpus, pool->pool, d, prompt);
        std::vector<PredictionRecord> records;
        std::vector<CompositionTarget> parsed;
        std::size_t budget_hits = 0;
        for (std::size_t i = 0; i < results.size(); ++i) {
            records.push_back({corpus->corpus[i].sample_id, results[i].text, std::nullopt});
            parsed.push_back(results[i].parsed.target);
            budget_hits += results[i].hit_budget ? 1 : 0;
        }
        write_file(out_path, format_predictions(records));
        const CorpusStats st = measure_behavior(parsed);
        put(summary_json, {{"predictions", out_path},
                           {"num_samples", records.size()},
                           {"mean_trigger_ratio", st.mean_trigger_ratio()},
                           {"num_elements", st.num_elements},
                           {"budget_hits", budget_hits}});
    });
}

void vcomp_model_free(vcomp_model* model) { delete model; }

vcomp_status vcomp_evaluate(const vcomp_corpus* gt, const char* predictions_path, const vcomp_pool* pool,
                            const char* config_json, const char* report_path, char** summary_json) {
    return guarded([&] {
        need(gt, "gt");
        need(predictions_path, "predictions_path");
        need(pool, "pool");
        const json j = config_of(config_json);
        const FormatOptions fo = format_options_from_json(j.dump());
        EvalOptions eo;
        const auto align = opt<std::string>(j, "align", "optimal");
        if (align == "optimal") {
            eo.align = AlignMode::kOptimal;
        } else if (align == "greedy") {
            eo.align = AlignMode::kGreedy;
        } else {
            fail(ErrorCode::kInvalidArgument, "align must be optimal or greedy");
        }
        eo.micro = opt(j, "micro", false);
        const MetricReport r = evaluate_predictions(gt->corpus, load_predictions(predictions_path), pool->pool, fo, eo);
        if (report_path != nullptr) write_report(r, report_path);
        put(summary_json, metrics_summary(r));
    });
}

vcomp_status vcomp_combine_reports(const char* const* report_paths, size_t n, const char* out_path,
                                   char** summary_json) {
    return guarded([&] {
        need(report_paths, "report_paths");
        std::vector<MetricReport> runs;
        for (size_t i = 0; i < n; ++i) {
            need(report_paths[i], "report path");
            runs.push_back(report_from_json(read_file(report_paths[i])));
        }
        const MetricReport r = combine_runs(runs);
        if (out_path != nullptr) write_report(r, out_path);
        json summary = metrics_summary(r);
        summary["runs"] = r.runs;
        json sem = json::object();
        for (const auto& [k, v] : r.sem) sem[k] = {{"mean", v.mean}, {"sem", v.sem}};
        summary["sem"] = sem;
        summary["text"] = format_sem_lines(r);
        put(summary_json, summary);
    });
}

vcomp_status vcomp_render(const vcomp_corpus* corpus, const char* predictions_path, const vcomp_pool* pool,
                          const char* config_json, const char* out_path, char** summary_json) {
    return guarded([&] {
        need(corpus, "corpus");
        need(pool, "pool");
        need(out_path, "out_path");
        const FormatOptions fo = format_options_from_json(config_of(config_json).dump());
        std::map<std::string, PredictionRecord> preds;
        if (predictions_path != nullptr) {
            for (auto& r : load_predictions(predictions_path)) preds.emplace(r.sample_id, std::move(r));
        }
        std::string out;
        std::size_t events = 0;
        for (const auto& s : corpus->corpus) {
            CompositionTarget target = s.target;
            if (predictions_path != nullptr) {
                const auto it = preds.find(s.sample_id);
                if (it == preds.end()) fail(ErrorCode::kNotFound, "no prediction for sample '" + s.sample_id + "'");
                target = it->second.target ? *it->second.target
                                           : parse(it->second.text, s.sentences(), pool->pool, fo, false).target;
            }
            const CompositionDocument doc = render(s, target, pool->pool);
            events += doc.events.size();
            out += document_to_json(doc, -1);
            out += '\n';
        }
        write_file(out_path, out);
        put(summary_json, {{"documents", out_path}, {"num_documents", corpus->corpus.size()}, {"num_events", events}});
    });
}

}  // extern "C"
