#include "vcomp/composer.hpp"

#include "composer_model.hpp"
#include "json.hpp"
#include "vcomp/error.hpp"
#include "vcomp/util.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace vcomp {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'V', 'C', 'O', 'M', 'P', 'C', 'K', '1'};

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception& e) {
        fail(ErrorCode::kSchema, std::string("config field '") + key + "': " + e.what());
    }
}

json parse_object(std::string_view text, const char* what) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorCode::kParse, std::string(what) + ": " + e.what());
    }
    if (!j.is_object()) fail(ErrorCode::kSchema, std::string(what) + " must be a JSON object");
    return j;
}

json model_json(const ModelConfig& c) {
    return {{"width", c.width},         {"depth", c.depth},
            {"heads", c.heads},         {"ffn_mult", c.ffn_mult},
            {"context_window", c.context_window}, {"max_segments", c.max_segments},
            {"visual_dim", c.visual_dim},
            {"audio_dim", c.audio_dim}, {"init_seed", c.init_seed},
            {"init_scale", c.init_scale}, {"rope_base", c.rope_base},
            {"tie_embeddings", c.tie_embeddings},
            {"token_shift", c.token_shift},
            {"index_anchor", c.index_anchor}};
}

json train_json(const TrainConfig& c) {
    return {{"optimizer", c.optimizer},
            {"learning_rate", c.learning_rate},
            {"schedule", "cosine"},
            {"min_lr_ratio", c.min_lr_ratio},
            {"warmup_steps", c.warmup_steps},
            {"batch_size", c.batch_size},
            {"steps", c.steps},
            {"seed", c.seed},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"epsilon", c.epsilon},
            {"weight_decay", c.weight_decay},
            {"grad_clip", c.grad_clip},
            {"log_interval", c.log_interval},
            {"eval_interval", c.eval_interval},
            {"eval_samples", c.eval_samples},
            {"eval_constrained", c.eval_constrained},
            {"val_loss_samples", c.val_loss_samples},
            {"checkpoint_interval", c.checkpoint_interval},
            {"checkpoint_path", c.checkpoint_path ? json(c.checkpoint_path->string()) : json(nullptr)},
            {"report_path", c.report_path ? json(c.report_path->string()) : json(nullptr)},
            {"stop_at_token_accuracy", c.stop_at_token_accuracy}};
}

json format_json(const FormatOptions& f) {
    return {{"order", order_mode_name(f.order)},
            {"include_indices", f.include_indices},
            {"trigger_mode", trigger_mode_name(f.trigger_mode)},
            {"seed", f.seed ? json(*f.seed) : json(nullptr)}};
}

FormatOptions format_from(const json& j) {
    FormatOptions f;
    const auto order = parse_order_mode(get_or<std::string>(j, "order", "time"));
    const auto trig = parse_trigger_mode(get_or<std::string>(j, "trigger_mode", "words"));
    if (!order || !trig) fail(ErrorCode::kSchema, "unknown order or trigger mode");
    f.order = *order;
    f.trigger_mode = *trig;
    f.include_indices = get_or<bool>(j, "include_indices", true);
    if (j.contains("seed") && !j["seed"].is_null()) f.seed = get_or<std::uint64_t>(j, "seed", 0);
    return f;
}

json context_json(const ContextOptions& c) {
    return {{"include_indices", c.include_indices},
            {"use_visual", c.use_visual},
            {"use_audio", c.use_audio},
            {"context_window", c.context_window}};
}

ContextOptions context_from(const json& j) {
    ContextOptions c;
    c.include_indices = get_or<bool>(j, "include_indices", true);
    c.use_visual = get_or<bool>(j, "use_visual", true);
    c.use_audio = get_or<bool>(j, "use_audio", true);
    c.context_window = get_or<std::size_t>(j, "context_window", c.context_window);
    return c;
}

ModelConfig model_from(const json& j) {
    ModelConfig c;
    c.width = get_or(j, "width", c.width);
    c.depth = get_or(j, "depth", c.depth);
    c.heads = get_or(j, "heads", c.heads);
    c.ffn_mult = get_or(j, "ffn_mult", c.ffn_mult);
    c.context_window = get_or(j, "context_window", c.context_window);
    c.max_segments = get_or(j, "max_segments", c.max_segments);
    c.visual_dim = get_or(j, "visual_dim", c.visual_dim);
    c.audio_dim = get_or(j, "audio_dim", c.audio_dim);
    c.init_seed = get_or(j, "init_seed", c.init_seed);
    c.init_scale = get_or(j, "init_scale", c.init_scale);
    c.rope_base = get_or(j, "rope_base", c.rope_base);
    c.tie_embeddings = get_or(j, "tie_embeddings", c.tie_embeddings);
    c.token_shift = get_or(j, "token_shift", c.token_shift);
    c.index_anchor = get_or(j, "index_anchor", c.index_anchor);
    return c;
}

TrainConfig train_from(const json& j) {
    TrainConfig c;
    c.optimizer = get_or(j, "optimizer", c.optimizer);
    c.learning_rate = get_or(j, "learning_rate", c.learning_rate);
    c.min_lr_ratio = get_or(j, "min_lr_ratio", c.min_lr_ratio);
    c.warmup_steps = get_or(j, "warmup_steps", c.warmup_steps);
    c.batch_size = get_or(j, "batch_size", c.batch_size);
    c.steps = get_or(j, "steps", c.steps);
    c.seed = get_or(j, "seed", c.seed);
    c.beta1 = get_or(j, "beta1", c.beta1);
    c.beta2 = get_or(j, "beta2", c.beta2);
    c.epsilon = get_or(j, "epsilon", c.epsilon);
    c.weight_decay = get_or(j, "weight_decay", c.weight_decay);
    c.grad_clip = get_or(j, "grad_clip", c.grad_clip);
    c.log_interval = get_or(j, "log_interval", c.log_interval);
    c.eval_interval = get_or(j, "eval_interval", c.eval_interval);
    c.eval_samples = get_or(j, "eval_samples", c.eval_samples);
    c.eval_constrained = get_or(j, "eval_constrained", c.eval_constrained);
    c.val_loss_samples = get_or(j, "val_loss_samples", c.val_loss_samples);
    c.checkpoint_interval = get_or(j, "checkpoint_interval", c.checkpoint_interval);
    if (const auto p = get_or<std::string>(j, "checkpoint_path", ""); !p.empty()) c.checkpoint_path = p;
    if (const auto p = get_or<std::string>(j, "report_path", ""); !p.empty()) c.report_path = p;
    c.stop_at_token_accuracy = get_or(j, "stop_at_token_accuracy", c.stop_at_token_accuracy);
    return c;
}

void check_train_config(const TrainConfig& c) {
    if (c.optimizer != "adamw" && c.optimizer != "adam" && c.optimizer != "sgd") {
        fail(ErrorCode::kInvalidArgument, "unknown optimizer '" + c.optimizer + "' (adamw, adam, sgd)");
    }
    if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) {
        fail(ErrorCode::kInvalidArgument, "learning rate must be positive");
    }
    if (c.batch_size == 0) fail(ErrorCode::kInvalidArgument, "batch size must be positive");
    if (c.log_interval == 0) fail(ErrorCode::kInvalidArgument, "log interval must be positive");
    if (!(c.min_lr_ratio >= 0.0 && c.min_lr_ratio <= 1.0)) fail(ErrorCode::kInvalidArgument, "min_lr_ratio must lie in [0, 1]");
}

json metrics_json(const MetricReport& r) {
    return {{"word_accuracy", r.word_accuracy},
            {"elem_at_word", r.elem_at_word},
            {"elem_at_sentence", r.elem_at_sentence},
            {"overall", r.overall},
            {"dropped_elements", r.diagnostics.dropped()}};
}

// Raw float arrays are stored little-endian.
void write_floats(std::ofstream& out, const ParamVector& v) {
    const std::uint64_t n = v.size();
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
    } else {
        for (float f : v) {
            auto u = std::bit_cast<std::uint32_t>(f);
            u = (u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24);
            out.write(reinterpret_cast<const char*>(&u), sizeof u);
        }
    }
}

ParamVector read_floats(std::ifstream& in, const std::string& what) {
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    if (!in || n > (std::uint64_t{1} << 34)) fail(ErrorCode::kSchema, "checkpoint truncated before " + what);
    ParamVector v(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(float)));
    if (!in) fail(ErrorCode::kSchema, "checkpoint truncated inside " + what);
    if constexpr (std::endian::native != std::endian::little) {
        for (float& f : v) {
            auto u = std::bit_cast<std::uint32_t>(f);
            u = (u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24);
            f = std::bit_cast<float>(u);
        }
    }
    return v;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& c) { return model_json(c).dump(); }
ModelConfig model_config_from_json(std::string_view text) { return model_from(parse_object(text, "model config")); }
std::string train_config_to_json(const TrainConfig& c) { return train_json(c).dump(); }
TrainConfig train_config_from_json(std::string_view text) { return train_from(parse_object(text, "train config")); }
std::string format_options_to_json(const FormatOptions& f) { return format_json(f).dump(); }
FormatOptions format_options_from_json(std::string_view text) { return format_from(parse_object(text, "format options")); }
std::string context_options_to_json(const ContextOptions& c) { return context_json(c).dump(); }
ContextOptions context_options_from_json(std::string_view text) { return context_from(parse_object(text, "context options")); }

double learning_rate_at(const TrainConfig& c, std::size_t step) noexcept {
    if (c.warmup_steps > 0 && step < c.warmup_steps) {
        return c.learning_rate * static_cast<double>(step + 1) / static_cast<double>(c.warmup_steps);
    }
    const double floor_lr = c.learning_rate * c.min_lr_ratio;
    // the last step lands exactly on the floor
    const double span = c.steps > c.warmup_steps + 1 ? static_cast<double>(c.steps - c.warmup_steps - 1) : 1.0;
    const double progress = std::min(1.0, static_cast<double>(step - c.warmup_steps) / span);
    return floor_lr + (c.learning_rate - floor_lr) * 0.5 * (1.0 + std::cos(3.141592653589793 * progress));
}

void save_checkpoint(const Composer& model, const std::filesystem::path& path, const TrainingState* state,
                     const TrainConfig* train_config) {
    json meta = {{"format_version", 1},
                 {"model", model_json(model.config())},
                 {"format", format_json(model.format())},
                 {"context", context_json(model.context_options())},
                 {"vocab_size", model.vocab().size()},
                 {"num_parameters", model.num_parameters()},
                 {"step", state ? state->step : 0},
                 {"has_moments", state != nullptr && !state->adam_m.empty()}};
    if (train_config != nullptr) {
        meta["train"] = train_json(*train_config);
        if (state != nullptr) meta["learning_rate_at_step"] = learning_rate_at(*train_config, state->step);
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorCode::kIo, "cannot write checkpoint " + path.string());
        out.write(kMagic, sizeof kMagic);
        const std::string text = meta.dump();
        const std::uint64_t len = text.size();
        out.write(reinterpret_cast<const char*>(&len), sizeof len);
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        // vocabulary pieces are raw bytes (some are not valid UTF-8), so they live outside the JSON
        const std::uint64_t count = model.vocab().size();
        out.write(reinterpret_cast<const char*>(&count), sizeof count);
        for (const auto& p : model.vocab().pieces()) {
            const std::uint32_t n = static_cast<std::uint32_t>(p.size());
            out.write(reinterpret_cast<const char*>(&n), sizeof n);
            out.write(p.data(), n);
        }
        write_floats(out, model.parameters());
        if (state != nullptr && !state->adam_m.empty()) {
            write_floats(out, state->adam_m);
            write_floats(out, state->adam_v);
        }
        if (!out) fail(ErrorCode::kIo, "write failed for checkpoint " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

Composer load_checkpoint(const std::filesystem::path& path, TrainingState* state, TrainConfig* train_config) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::kIo, "cannot open checkpoint " + path.string());
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) {
        fail(ErrorCode::kSchema, path.string() + " is not a composer checkpoint");
    }
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    if (!in || len > (1u << 30)) fail(ErrorCode::kSchema, "checkpoint header is corrupt");
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    const json meta = parse_object(text, "checkpoint metadata");
    std::uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof count);
    if (!in || count > (1u << 24)) fail(ErrorCode::kSchema, "checkpoint vocabulary is corrupt");
    std::vector<std::string> pieces(count);
    for (auto& p : pieces) {
        std::uint32_t n = 0;
        in.read(reinterpret_cast<char*>(&n), sizeof n);
        if (!in || n > 4096) fail(ErrorCode::kSchema, "checkpoint vocabulary is corrupt");
        p.resize(n);
        in.read(p.data(), n);
    }
    if (!in) fail(ErrorCode::kSchema, "checkpoint truncated inside vocabulary");

    Composer model(model_from(meta.at("model")), Vocabulary(std::move(pieces)), format_from(meta.at("format")),
                   context_from(meta.at("context")));
    auto params = read_floats(in, "parameters");
    if (params.size() != model.num_parameters()) {
        fail(ErrorCode::kSchema, "checkpoint has " + std::to_string(params.size()) + " parameters, config implies " +
                                     std::to_string(model.num_parameters()));
    }
    model.parameters() = std::move(params);
    if (state != nullptr) {
        *state = TrainingState{};
        state->step = meta.value("step", std::size_t{0});
        if (meta.value("has_moments", false)) {
            state->adam_m = read_floats(in, "first moments");
            state->adam_v = read_floats(in, "second moments");
            if (state->adam_m.size() != model.num_parameters() || state->adam_v.size() != model.num_parameters()) {
                fail(ErrorCode::kSchema, "checkpoint optimizer state does not match the parameters");
            }
        }
    }
    if (train_config != nullptr && meta.contains("train")) *train_config = train_from(meta["train"]);
    return model;
}

TrainReport train(Composer& model, const Corpus& train_set, const Corpus& val_set, const TrainConfig& cfg,
                  const EffectPool& pool, const ProviderSet& providers, TrainingState* state, const TrainHooks& hooks) {
    check_train_config(cfg);
    if (train_set.empty()) fail(ErrorCode::kInvalidArgument, "training corpus is empty");
    const auto t0 = std::chrono::steady_clock::now();

    const std::vector<EncodedExample> train_ex = encode_corpus(model, train_set, providers, 0);
    const Corpus val_loss_set(val_set.begin(), val_set.begin() + static_cast<std::ptrdiff_t>(
                                                                       std::min(cfg.val_loss_samples, val_set.size())));
    const std::vector<EncodedExample> val_ex = encode_corpus(model, val_loss_set, providers, 0);
    const Corpus val_compose(val_set.begin(),
                             val_set.begin() + static_cast<std::ptrdiff_t>(std::min(cfg.eval_samples, val_set.size())));

    TrainingState local;
    TrainingState& st = state != nullptr ? *state : local;
    const std::size_t np = model.num_parameters();
    if (st.adam_m.size() != np || st.adam_v.size() != np) {
        if (st.step > 0 && cfg.optimizer != "sgd") {
            fail(ErrorCode::kInvalidArgument, "resumed state lacks optimizer moments for this model");
        }
        st.adam_m.assign(np, 0.0f);
        st.adam_v.assign(np, 0.0f);
    }
    const bool resumed = st.step > 0;

    std::ofstream log_out;
    if (cfg.report_path) {
        if (cfg.report_path->has_parent_path()) std::filesystem::create_directories(cfg.report_path->parent_path());
        log_out.open(*cfg.report_path, resumed ? std::ios::app : std::ios::trunc);
        if (!log_out) fail(ErrorCode::kIo, "cannot write run report " + cfg.report_path->string());
    }
    const auto emit = [&](const json& j) {
        if (log_out) log_out << j.dump() << '\n' << std::flush;
    };
    emit({{"type", "config"},
          {"model", model_json(model.config())},
          {"train", train_json(cfg)},
          {"format", format_json(model.format())},
          {"context", context_json(model.context_options())},
          {"vocab_size", model.vocab().size()},
          {"num_parameters", np},
          {"num_train", train_ex.size()},
          {"num_val", val_set.size()},
          {"resumed_from", st.step}});

    TrainReport report;
    const auto evaluate = [&](bool with_metrics) {
        ValEntry v;
        v.step = st.step;
        v.val_loss = val_ex.empty() ? 0.0 : model.loss(val_ex);
        json j = {{"type", "val"}, {"step", v.step}, {"val_loss", v.val_loss}};
        if (with_metrics && !val_compose.empty()) {
            DecodeOptions d;
            d.constrained = cfg.eval_constrained;
            const auto results = compose_corpus(model, val_compose, pool, d, std::nullopt, providers);
            std::vector<std::string> texts;
            for (const auto& r : results) texts.push_back(r.text);
            v.metrics = evaluate_texts(val_compose, texts, pool, model.format());
            j["metrics"] = metrics_json(*v.metrics);
        }
        emit(j);
        report.validation.push_back(v);
        return v;
    };
    report.initial_val_loss = evaluate(false).val_loss;

    const std::size_t n = train_ex.size();
    std::vector<std::size_t> perm;
    std::size_t perm_epoch = static_cast<std::size_t>(-1);
    const auto example_at = [&](std::size_t position) -> const EncodedExample& {
        const std::size_t epoch = position / n;
        if (epoch != perm_epoch) {
            perm.resize(n);
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            Rng rng(hash_combine(cfg.seed, epoch));
            rng.shuffle(perm);
            perm_epoch = epoch;
        }
        return train_ex[perm[position % n]];
    };

    const auto off = detail::Offsets::of(model.layout(), model.config().depth);
    ParamVector& params = model.parameters();
    ParamVector grad(np);
    double win_loss = 0.0, win_norm = 0.0;
    std::size_t win_steps = 0, win_correct = 0, win_count = 0;
    bool stop = false;
    while (st.step < cfg.steps && !stop) {
        const std::size_t step = st.step;
        std::vector<SequenceInput> batch;
        batch.reserve(cfg.batch_size);
        std::size_t labels = 0;
        for (std::size_t j = 0; j < cfg.batch_size; ++j) {
            batch.push_back(example_at(step * cfg.batch_size + j).sequence());
            for (TokenId l : batch.back().labels) labels += l >= 0 ? 1 : 0;
        }
        std::fill(grad.begin(), grad.end(), 0.0f);
        detail::LossStats ls;
        const float scale = 1.0f / static_cast<float>(std::max<std::size_t>(labels, 1));
        for (const auto& in : batch) {
            ls += detail::forward_backward<float>(model.config(), off, model.vocab().size(), params.data(), in, scale,
                                                  grad.data(), nullptr);
        }
        const double loss = ls.count ? ls.nll / static_cast<double>(ls.count) : 0.0;
        double norm = 0.0;
        for (float g : grad) norm += static_cast<double>(g) * g;
        norm = std::sqrt(norm);
        if (!std::isfinite(loss) || !std::isfinite(norm)) {
            emit({{"type", "abort"}, {"step", step}, {"reason", "non-finite loss"}});
            fail(ErrorCode::kNumerical, "loss became non-finite at step " + std::to_string(step));
        }
        const float clip = cfg.grad_clip > 0.0 && norm > cfg.grad_clip ? static_cast<float>(cfg.grad_clip / norm) : 1.0f;
        const double lr = learning_rate_at(cfg, step);
        if (cfg.optimizer == "sgd") {
            for (std::size_t i = 0; i < np; ++i) params[i] -= static_cast<float>(lr) * clip * grad[i];
        } else {
            const double b1 = cfg.beta1, b2 = cfg.beta2;
            const double c1 = 1.0 - std::pow(b1, static_cast<double>(step + 1));
            const double c2 = 1.0 - std::pow(b2, static_cast<double>(step + 1));
            const float wd = cfg.optimizer == "adamw" ? static_cast<float>(cfg.weight_decay) : 0.0f;
            const float step_size = static_cast<float>(lr / c1);
            const float inv_c2 = static_cast<float>(1.0 / c2);
            const float eps = static_cast<float>(cfg.epsilon);
            const float fb1 = static_cast<float>(b1), fb2 = static_cast<float>(b2);
            for (std::size_t i = 0; i < np; ++i) {
                const float g = grad[i] * clip;
                st.adam_m[i] = fb1 * st.adam_m[i] + (1.0f - fb1) * g;
                st.adam_v[i] = fb2 * st.adam_v[i] + (1.0f - fb2) * g * g;
                params[i] -= step_size * st.adam_m[i] / (std::sqrt(st.adam_v[i] * inv_c2) + eps) +
                             static_cast<float>(lr) * wd * params[i];
            }
        }
        report.step_losses.push_back(loss);
        st.step += 1;
        win_loss += loss;
        win_norm += norm;
        win_steps += 1;
        win_correct += ls.correct;
        win_count += ls.count;

        if (st.step % cfg.log_interval == 0 || st.step == cfg.steps) {
            LogEntry e{st.step, win_loss / static_cast<double>(win_steps), lr,
                       win_count ? static_cast<double>(win_correct) / static_cast<double>(win_count) : 0.0,
                       win_norm / static_cast<double>(win_steps)};
            report.log.push_back(e);
            emit({{"type", "train"},
                  {"step", e.step},
                  {"loss", e.loss},
                  {"learning_rate", e.learning_rate},
                  {"token_accuracy", e.token_accuracy},
                  {"grad_norm", e.grad_norm}});
            if (hooks.on_log) hooks.on_log(e);
            if (cfg.stop_at_token_accuracy > 0.0 && e.token_accuracy >= cfg.stop_at_token_accuracy) stop = true;
            win_loss = win_norm = 0.0;
            win_steps = win_correct = win_count = 0;
        }
        if (cfg.eval_interval > 0 && st.step % cfg.eval_interval == 0 && st.step < cfg.steps && !stop) evaluate(true);
        if (cfg.checkpoint_path && cfg.checkpoint_interval > 0 && st.step % cfg.checkpoint_interval == 0) {
            save_checkpoint(model, *cfg.checkpoint_path, &st, &cfg);
            emit({{"type", "checkpoint"}, {"step", st.step}, {"path", cfg.checkpoint_path->string()}});
        }
    }
    report.steps_run = report.step_losses.size();
    report.final_val_loss = evaluate(cfg.eval_samples > 0).val_loss;
    if (cfg.checkpoint_path) {
        save_checkpoint(model, *cfg.checkpoint_path, &st, &cfg);
        emit({{"type", "checkpoint"}, {"step", st.step}, {"path", cfg.checkpoint_path->string()}});
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    emit({{"type", "final"},
          {"step", st.step},
          {"steps_run", report.steps_run},
          {"initial_val_loss", report.initial_val_loss},
          {"final_val_loss", report.final_val_loss},
          {"seconds", report.seconds}});
    return report;
}

}  // namespace vcomp
