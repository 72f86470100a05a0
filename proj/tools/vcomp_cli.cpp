// Command-line front end. Talks to the library only through vcomp.h.

#include "vcomp/vcomp.h"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using nlohmann::json;

namespace {

struct Failure {
    vcomp_status status;
    std::string message;
};

void check(vcomp_status s) {
    if (s != VCOMP_OK) throw Failure{s, vcomp_last_error()};
}

struct PoolDel {
    void operator()(vcomp_pool* p) const { vcomp_pool_free(p); }
};
struct CorpusDel {
    void operator()(vcomp_corpus* p) const { vcomp_corpus_free(p); }
};
struct ModelDel {
    void operator()(vcomp_model* p) const { vcomp_model_free(p); }
};
using Pool = std::unique_ptr<vcomp_pool, PoolDel>;
using Corpus = std::unique_ptr<vcomp_corpus, CorpusDel>;
using Model = std::unique_ptr<vcomp_model, ModelDel>;

// Takes ownership of a library string and parses it.
json take_json(char* s) {
    if (s == nullptr) return json::object();
    json j = json::parse(s);
    vcomp_free_string(s);
    return j;
}

// Config files are JSON objects or flat "key = value" lines ('#' comments).
json read_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw Failure{VCOMP_E_IO, "cannot read config " + path};
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        try {
            return json::parse(text);
        } catch (const json::exception& e) {
            throw Failure{VCOMP_E_PARSE, "config " + path + ": " + e.what()};
        }
    }
    json out = json::object();
    std::istringstream lines(text);
    std::string line;
    std::size_t no = 0;
    while (std::getline(lines, line)) {
        ++no;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        const auto eq = line.find('=');
        const auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
        };
        if (trim(line).empty()) continue;
        if (eq == std::string::npos) throw Failure{VCOMP_E_PARSE, path + ":" + std::to_string(no) + ": expected key = value"};
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            out[key] = json::parse(value);
        } catch (const json::exception&) {
            out[key] = value;
        }
    }
    return out;
}

struct Common {
    std::optional<std::uint64_t> seed;
    std::string config;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--seed", c.seed, "Random seed");
    sub->add_option("--config", c.config, "Config file (JSON object or key = value lines)")->check(CLI::ExistingFile);
}

// Config file overlaid with the flags given on the command line.
struct Settings {
    json j;
    explicit Settings(const Common& c) : j(read_config(c.config)) {}
    template <typename T>
    void set(const char* key, const std::optional<T>& v) {
        if (v) j[key] = *v;
    }
    std::string str() const { return j.dump(); }
};

Pool open_pool(const std::string& path) {
    vcomp_pool* p = nullptr;
    if (path.empty()) {
        check(vcomp_pool_synthetic(nullptr, 0, &p));
    } else {
        check(vcomp_pool_load(path.c_str(), &p));
    }
    return Pool(p);
}

Corpus open_corpus(const std::string& path) {
    vcomp_corpus* c = nullptr;
    check(vcomp_corpus_load(path.c_str(), &c));
    return Corpus(c);
}

void emit(const std::string& command, const json& outputs, const json& summary = json::object()) {
    std::cout << json{{"command", command}, {"outputs", outputs}, {"summary", summary}}.dump() << std::endl;
}

struct FormatFlags {
    std::optional<std::string> order;
    std::optional<std::string> trigger_mode;
    bool no_indices = false;

    void add(CLI::App* sub) {
        sub->add_option("--order", order, "Element order: time, string, category, random");
        sub->add_option("--trigger-mode", trigger_mode, "Trigger text: words or indices");
        sub->add_flag("--no-indices", no_indices, "Targets without [k] segment indices");
    }
    void apply(Settings& s) const {
        s.set("order", order);
        s.set("trigger_mode", trigger_mode);
        if (no_indices) s.j["include_indices"] = false;
    }
};

// Format options of a checkpoint, as a base for reading its predictions.
void inherit_format(Settings& s, const std::string& model_path) {
    if (model_path.empty()) return;
    vcomp_model* m = nullptr;
    check(vcomp_model_load(model_path.c_str(), &m));
    Model model(m);
    char* out = nullptr;
    check(vcomp_model_describe(model.get(), &out));
    const json d = take_json(out);
    for (const auto& [k, v] : d["format"].items()) {
        if (!s.j.contains(k)) s.j[k] = v;
    }
}

void log_line(const char* line, void*) {
    std::cerr << line << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Composition toolkit: synthetic data, composer training, decoding, scoring and rendering"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(vcomp_version()));

    // gen-synth
    Common gs_c;
    std::string gs_out, gs_pool, gs_pool_out;
    std::optional<std::size_t> gs_num, gs_min_seg, gs_max_seg, gs_min_words, gs_max_words;
    std::optional<double> gs_density, gs_prompt_rate;
    auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic dataset");
    add_common(gen, gs_c);
    gen->add_option("--num", gs_num, "Number of samples");
    gen->add_option("--density", gs_density, "Trigger density in [0, 1]");
    gen->add_option("--prompt-rate", gs_prompt_rate, "Fraction of samples carrying a density prompt");
    gen->add_option("--min-segments", gs_min_seg);
    gen->add_option("--max-segments", gs_max_seg);
    gen->add_option("--min-words", gs_min_words);
    gen->add_option("--max-words", gs_max_words);
    gen->add_option("--pool", gs_pool, "Effect pool file (default: built-in synthetic pool)");
    gen->add_option("--pool-out", gs_pool_out, "Also write the pool used");
    gen->add_option("--out", gs_out, "Output dataset (JSON lines)")->required();

    // filter
    Common fl_c;
    std::string fl_in, fl_out;
    std::size_t fl_min = 3;
    auto* filter = app.add_subcommand("filter", "Drop samples with too few sentences");
    add_common(filter, fl_c);
    filter->add_option("--in", fl_in)->required()->check(CLI::ExistingFile);
    filter->add_option("--out", fl_out)->required();
    filter->add_option("--min-sentences", fl_min, "Minimum segment count (inclusive)");

    // stats
    Common st_c;
    std::string st_in, st_out;
    auto* stats = app.add_subcommand("stats", "Corpus statistics");
    add_common(stats, st_c);
    stats->add_option("--in", st_in)->required()->check(CLI::ExistingFile);
    stats->add_option("--out", st_out, "Write the full statistics JSON here");

    // split
    Common sp_c;
    std::string sp_in, sp_train, sp_val;
    double sp_frac = 0.1;
    auto* split = app.add_subcommand("split", "Seeded train/validation split");
    add_common(split, sp_c);
    split->add_option("--in", sp_in)->required()->check(CLI::ExistingFile);
    split->add_option("--train-out", sp_train)->required();
    split->add_option("--val-out", sp_val)->required();
    split->add_option("--val-fraction", sp_frac);

    // train
    Common tr_c;
    std::string tr_train, tr_val, tr_pool, tr_out, tr_report;
    std::optional<std::size_t> tr_steps, tr_batch, tr_warmup, tr_width, tr_depth, tr_heads, tr_window, tr_eval;
    std::optional<double> tr_lr;
    bool tr_text_only = false, tr_quiet = false;
    FormatFlags tr_fmt;
    auto* trn = app.add_subcommand("train", "Train a composer");
    add_common(trn, tr_c);
    trn->add_option("--train", tr_train, "Training dataset")->required()->check(CLI::ExistingFile);
    trn->add_option("--val", tr_val, "Validation dataset")->check(CLI::ExistingFile);
    trn->add_option("--pool", tr_pool, "Effect pool file (default: built-in synthetic pool)");
    trn->add_option("--out", tr_out, "Checkpoint path")->required();
    trn->add_option("--report", tr_report, "Run report (JSON lines)");
    trn->add_option("--steps", tr_steps);
    trn->add_option("--lr", tr_lr, "Peak learning rate");
    trn->add_option("--batch-size", tr_batch);
    trn->add_option("--warmup", tr_warmup, "Warmup steps");
    trn->add_option("--width", tr_width);
    trn->add_option("--depth", tr_depth);
    trn->add_option("--heads", tr_heads);
    trn->add_option("--context-window", tr_window);
    trn->add_option("--eval-samples", tr_eval, "Validation samples composed at the end");
    trn->add_flag("--text-only", tr_text_only, "Ignore visual and audio inputs");
    trn->add_flag("--quiet", tr_quiet, "No progress lines on stderr");
    tr_fmt.add(trn);

    // compose
    Common co_c;
    std::string co_model, co_in, co_pool, co_out, co_mode;
    std::optional<int> co_density;
    std::optional<double> co_temp;
    std::optional<std::size_t> co_max_new;
    std::vector<std::string> co_cats;
    bool co_no_prompt = false, co_unconstrained = false;
    auto* comp = app.add_subcommand("compose", "Generate compositions with a trained model");
    add_common(comp, co_c);
    comp->add_option("--model", co_model, "Checkpoint")->required()->check(CLI::ExistingFile);
    comp->add_option("--in", co_in, "Dataset to compose for")->required()->check(CLI::ExistingFile);
    comp->add_option("--pool", co_pool, "Effect pool file (default: built-in synthetic pool)");
    comp->add_option("--out", co_out, "Predictions (JSON lines of sample_id, text)")->required();
    comp->add_option("--density", co_density, "Density prompt in percent");
    comp->add_option("--categories", co_cats, "Preferred categories for the prompt (tags)");
    comp->add_flag("--no-prompt", co_no_prompt, "Ignore prompts stored in the dataset");
    comp->add_option("--mode", co_mode, "greedy or sample");
    comp->add_option("--temperature", co_temp);
    comp->add_option("--max-new-tokens", co_max_new);
    comp->add_flag("--unconstrained", co_unconstrained, "Decode without the grammar constraint");

    // eval
    Common ev_c;
    std::string ev_gt, ev_pred, ev_pool, ev_report, ev_model, ev_align;
    std::vector<std::string> ev_combine;
    bool ev_micro = false;
    FormatFlags ev_fmt;
    auto* eval = app.add_subcommand("eval", "Score predictions, or combine repeated-run reports");
    add_common(eval, ev_c);
    eval->add_option("--gt", ev_gt, "Ground-truth dataset")->check(CLI::ExistingFile);
    eval->add_option("--pred", ev_pred, "Predictions: composition texts or dataset records")->check(CLI::ExistingFile);
    eval->add_option("--pool", ev_pool, "Effect pool file (default: built-in synthetic pool)");
    eval->add_option("--model", ev_model, "Take the target format from this checkpoint")->check(CLI::ExistingFile);
    eval->add_option("--report", ev_report, "Metric report JSON")->required();
    eval->add_option("--align", ev_align, "optimal or greedy");
    eval->add_flag("--micro", ev_micro, "Pool counts across samples");
    eval->add_option("--combine", ev_combine, "Report files of repeated runs to summarize as mean +- SEM")
        ->check(CLI::ExistingFile);
    ev_fmt.add(eval);

    // render
    Common rn_c;
    std::string rn_in, rn_pred, rn_pool, rn_out, rn_model;
    FormatFlags rn_fmt;
    auto* rend = app.add_subcommand("render", "Write composition documents");
    add_common(rend, rn_c);
    rend->add_option("--in", rn_in, "Dataset with word timings")->required()->check(CLI::ExistingFile);
    rend->add_option("--pred", rn_pred, "Predictions to render instead of the dataset targets")
        ->check(CLI::ExistingFile);
    rend->add_option("--pool", rn_pool, "Effect pool file (default: built-in synthetic pool)");
    rend->add_option("--model", rn_model, "Take the target format from this checkpoint")->check(CLI::ExistingFile);
    rend->add_option("--out", rn_out, "Documents (JSON lines)")->required();
    rn_fmt.add(rend);

    // pool
    auto* pool = app.add_subcommand("pool", "Effect pool tools");
    pool->require_subcommand(1);
    Common pv_c;
    std::string pv_pool, pv_data;
    auto* pvalidate = pool->add_subcommand("validate", "Check a pool file (and a dataset against it)");
    add_common(pvalidate, pv_c);
    pvalidate->add_option("--pool", pv_pool, "Pool file")->required()->check(CLI::ExistingFile);
    pvalidate->add_option("--in", pv_data, "Dataset whose effects must exist in the pool")->check(CLI::ExistingFile);
    Common ps_c;
    std::string ps_out;
    bool ps_full = false;
    auto* psynth = pool->add_subcommand("synth", "Write a synthetic pool");
    add_common(psynth, ps_c);
    psynth->add_option("--out", ps_out)->required();
    psynth->add_flag("--full-scale", ps_full, "10,000 stickers and 1,000 of every other category");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*gen) {
            Settings s(gs_c);
            s.set("num_samples", gs_num);
            s.set("density", gs_density);
            s.set("prompt_rate", gs_prompt_rate);
            s.set("seed", gs_c.seed);
            if (gs_min_seg || gs_max_seg) {
                auto r = s.j.value("segments_range", std::vector<std::size_t>{3, 12});
                s.j["segments_range"] = {gs_min_seg.value_or(r[0]), gs_max_seg.value_or(r[1])};
            }
            if (gs_min_words || gs_max_words) {
                auto r = s.j.value("words_range", std::vector<std::size_t>{4, 12});
                s.j["words_range"] = {gs_min_words.value_or(r[0]), gs_max_words.value_or(r[1])};
            }
            Pool p = open_pool(gs_pool);
            vcomp_corpus* c = nullptr;
            check(vcomp_corpus_generate(s.str().c_str(), p.get(), &c));
            Corpus corpus(c);
            check(vcomp_corpus_save(corpus.get(), gs_out.c_str()));
            json outputs = {{"dataset", gs_out}};
            if (!gs_pool_out.empty()) {
                check(vcomp_pool_save(p.get(), gs_pool_out.c_str()));
                outputs["pool"] = gs_pool_out;
            }
            emit("gen-synth", outputs, {{"num_samples", vcomp_corpus_size(corpus.get())}});
        } else if (*filter) {
            Corpus in = open_corpus(fl_in);
            vcomp_corpus* c = nullptr;
            check(vcomp_corpus_filter(in.get(), fl_min, &c));
            Corpus out(c);
            check(vcomp_corpus_save(out.get(), fl_out.c_str()));
            emit("filter", {{"dataset", fl_out}},
                 {{"kept", vcomp_corpus_size(out.get())}, {"dropped", vcomp_corpus_size(in.get()) - vcomp_corpus_size(out.get())}});
        } else if (*stats) {
            Corpus in = open_corpus(st_in);
            char* out = nullptr;
            check(vcomp_corpus_stats(in.get(), &out));
            const json st = take_json(out);
            json outputs = json::object();
            if (!st_out.empty()) {
                std::ofstream f(st_out);
                if (!f) throw Failure{VCOMP_E_IO, "cannot write " + st_out};
                f << st.dump(2) << '\n';
                outputs["stats"] = st_out;
            }
            emit("stats", outputs,
                 {{"num_samples", st["num_samples"]},
                  {"num_segments", st["num_segments"]},
                  {"num_elements", st["num_elements"]},
                  {"mean_trigger_ratio", st["mean_trigger_ratio"]}});
        } else if (*split) {
            Settings s(sp_c);
            Corpus in = open_corpus(sp_in);
            vcomp_corpus *t = nullptr, *v = nullptr;
            check(vcomp_corpus_split(in.get(), s.j.value("val_fraction", sp_frac),
                                     sp_c.seed.value_or(s.j.value("seed", std::uint64_t{0})), &t, &v));
            Corpus tc(t), vc(v);
            check(vcomp_corpus_save(tc.get(), sp_train.c_str()));
            check(vcomp_corpus_save(vc.get(), sp_val.c_str()));
            emit("split", {{"train", sp_train}, {"val", sp_val}},
                 {{"train", vcomp_corpus_size(tc.get())}, {"val", vcomp_corpus_size(vc.get())}});
        } else if (*trn) {
            Settings s(tr_c);
            s.set("seed", tr_c.seed);
            s.set("init_seed", tr_c.seed);
            s.set("steps", tr_steps);
            s.set("learning_rate", tr_lr);
            s.set("batch_size", tr_batch);
            s.set("warmup_steps", tr_warmup);
            s.set("width", tr_width);
            s.set("depth", tr_depth);
            s.set("heads", tr_heads);
            s.set("context_window", tr_window);
            s.set("eval_samples", tr_eval);
            if (!tr_report.empty()) s.j["report_path"] = tr_report;
            if (tr_text_only) {
                s.j["use_visual"] = false;
                s.j["use_audio"] = false;
            }
            tr_fmt.apply(s);
            Pool p = open_pool(tr_pool);
            Corpus train_set = open_corpus(tr_train);
            Corpus val_set = tr_val.empty() ? nullptr : open_corpus(tr_val);
            vcomp_model* m = nullptr;
            check(vcomp_model_create(s.str().c_str(), train_set.get(), p.get(), &m));
            Model model(m);
            char* out = nullptr;
            check(vcomp_model_train(model.get(), train_set.get(), val_set.get(), p.get(), s.str().c_str(),
                                    tr_quiet ? nullptr : log_line, nullptr, &out));
            const json summary = take_json(out);
            check(vcomp_model_save(model.get(), tr_out.c_str()));
            json outputs = {{"checkpoint", tr_out}};
            if (!tr_report.empty()) outputs["report"] = tr_report;
            emit("train", outputs, summary);
        } else if (*comp) {
            Settings s(co_c);
            s.set("seed", co_c.seed);
            s.set("density", co_density);
            s.set("temperature", co_temp);
            s.set("max_new_tokens", co_max_new);
            if (!co_mode.empty()) s.j["mode"] = co_mode;
            if (!co_cats.empty()) s.j["categories"] = co_cats;
            if (co_no_prompt) s.j["use_sample_prompt"] = false;
            if (co_unconstrained) s.j["constrained"] = false;
            vcomp_model* m = nullptr;
            check(vcomp_model_load(co_model.c_str(), &m));
            Model model(m);
            Pool p = open_pool(co_pool);
            Corpus in = open_corpus(co_in);
            char* out = nullptr;
            check(vcomp_model_compose(model.get(), in.get(), p.get(), s.str().c_str(), co_out.c_str(), &out));
            emit("compose", {{"predictions", co_out}}, take_json(out));
        } else if (*eval) {
            Settings s(ev_c);
            char* out = nullptr;
            if (!ev_combine.empty()) {
                std::vector<const char*> paths;
                for (const auto& r : ev_combine) paths.push_back(r.c_str());
                check(vcomp_combine_reports(paths.data(), paths.size(), ev_report.c_str(), &out));
                const json summary = take_json(out);
                std::cerr << summary.value("text", "");
                emit("eval", {{"report", ev_report}}, summary);
            } else {
                if (ev_gt.empty() || ev_pred.empty()) {
                    throw Failure{VCOMP_E_INVALID_ARGUMENT, "eval needs --gt and --pred (or --combine)"};
                }
                ev_fmt.apply(s);
                inherit_format(s, ev_model);
                if (!ev_align.empty()) s.j["align"] = ev_align;
                if (ev_micro) s.j["micro"] = true;
                Pool p = open_pool(ev_pool);
                Corpus gt = open_corpus(ev_gt);
                check(vcomp_evaluate(gt.get(), ev_pred.c_str(), p.get(), s.str().c_str(), ev_report.c_str(), &out));
                emit("eval", {{"report", ev_report}}, take_json(out));
            }
        } else if (*rend) {
            Settings s(rn_c);
            rn_fmt.apply(s);
            inherit_format(s, rn_model);
            Pool p = open_pool(rn_pool);
            Corpus in = open_corpus(rn_in);
            char* out = nullptr;
            check(vcomp_render(in.get(), rn_pred.empty() ? nullptr : rn_pred.c_str(), p.get(), s.str().c_str(),
                               rn_out.c_str(), &out));
            emit("render", {{"documents", rn_out}}, take_json(out));
        } else if (*pvalidate) {
            Pool p = open_pool(pv_pool);
            char* out = nullptr;
            check(vcomp_pool_describe(p.get(), &out));
            json summary = take_json(out);
            if (!pv_data.empty()) {
                Corpus in = open_corpus(pv_data);
                check(vcomp_corpus_validate(in.get(), p.get()));
                summary["dataset_checked"] = pv_data;
            }
            emit("pool validate", json::object(), summary);
        } else if (*psynth) {
            vcomp_pool* raw = nullptr;
            check(vcomp_pool_synthetic(ps_full ? R"({"full_scale": true})" : nullptr, ps_c.seed.value_or(0), &raw));
            Pool p(raw);
            check(vcomp_pool_save(p.get(), ps_out.c_str()));
            char* out = nullptr;
            check(vcomp_pool_describe(p.get(), &out));
            emit("pool synth", {{"pool", ps_out}}, take_json(out));
        }
    } catch (const Failure& f) {
        std::cerr << "error: " << vcomp_status_name(f.status) << ": " << f.message << '\n';
        return 1 + static_cast<int>(f.status);
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
