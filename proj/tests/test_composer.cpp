#include "doctest.h"

#include "composer_model.hpp"
#include "test_support.hpp"
#include "vcomp/composer.hpp"
#include "vcomp/decode_constraint.hpp"

#include <cmath>

using namespace vcomp;
using vcomp::testing::code_of;

namespace {

const EffectPool& pool() {
    static const EffectPool p = vcomp::testing::small_pool();
    return p;
}

Corpus tiny_corpus(std::size_t n, std::uint64_t seed, double prompt_rate = 0.0) {
    SyntheticConfig sc;
    sc.num_samples = n;
    sc.segments_range = {2, 4};
    sc.words_range = {3, 6};
    sc.seed = seed;
    sc.prompt_rate = prompt_rate;
    return generate_synthetic(sc, pool());
}

ModelConfig tiny_config() {
    ModelConfig c;
    c.width = 16;
    c.depth = 2;
    c.heads = 2;
    c.ffn_mult = 2;
    c.context_window = 256;
    c.init_seed = 3;
    c.init_scale = 0.2;  // large enough that every path carries gradient
    return c;
}

Composer tiny_model(const Corpus& corpus, const FormatOptions& fmt = {}, const ContextOptions& ctx = {}) {
    return Composer(tiny_config(), build_vocabulary(corpus, &pool()), fmt, ctx);
}

}  // namespace

TEST_CASE("parameter layout names every tensor once and tiles the vector") {
    const Corpus corpus = tiny_corpus(4, 1);
    const Composer m = tiny_model(corpus);
    std::size_t expect = 0;
    for (const auto& t : m.layout().tensors) {
        CHECK(t.offset == expect);
        expect += t.size();
    }
    CHECK(expect == m.num_parameters());
    CHECK(m.layout().get("proj_v.w").rows == m.config().visual_dim);
    CHECK(m.layout().get("head.b").cols == m.vocab().size());
    CHECK(code_of([&] { (void)m.layout().get("head.w"); }) == ErrorCode::kNotFound);  // tied by default
    ModelConfig untied = tiny_config();
    untied.tie_embeddings = false;
    const Composer mu(untied, m.vocab());
    CHECK(mu.layout().get("head.w").cols == m.vocab().size());
    CHECK(mu.num_parameters() == m.num_parameters() + untied.width * m.vocab().size());
    CHECK(code_of([&] { (void)m.layout().get("nope"); }) == ErrorCode::kNotFound);

    ModelConfig bad = tiny_config();
    bad.heads = 3;
    CHECK(code_of([&] { Composer(bad, m.vocab()); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("projectors expose the projection parameters") {
    const Corpus corpus = tiny_corpus(2, 1);
    const Composer m = tiny_model(corpus);
    const Projector p = m.visual_projector();
    const auto& w = m.layout().get("proj_v.w");
    CHECK(p.input_dim() == m.config().visual_dim);
    CHECK(p.joint_dim() == m.config().width);
    CHECK(p.weight(5, 2) == m.parameters()[w.offset + 2 * w.cols + 5]);
}

TEST_CASE("encoding: target follows the context and ends with the end token") {
    const Corpus corpus = tiny_corpus(3, 2);
    const Composer m = tiny_model(corpus);
    const auto ex = m.encode(corpus[0], "", {});
    CHECK(ex.target.back() == Vocabulary::kEnd);
    CHECK(m.vocab().decode(ex.target) == m.target_text(corpus[0]));
    const SequenceInput in = ex.sequence();
    CHECK(in.size() == ex.context.slots.size() + ex.target.size());
    std::size_t labelled = 0;
    for (std::size_t t = 0; t < in.size(); ++t) {
        if (t < ex.context.slots.size()) CHECK(in.labels[t] == -1);
        if (in.labels[t] >= 0) ++labelled;
    }
    CHECK(labelled == ex.target.size());
    CHECK(in.tokens[ex.context.slots.size()] == Vocabulary::kCompose);

    // every synthetic name is a single token
    const auto& name = corpus[0].target.segments[0].elements;
    for (const auto& e : name) CHECK(m.vocab().id_of(e.name) != Vocabulary::kUnk);

    ModelConfig small = tiny_config();
    small.context_window = 8;
    const Composer cramped(small, m.vocab());
    CHECK(code_of([&] { (void)cramped.encode(corpus[0], "", {}); }) == ErrorCode::kTooLong);
}

TEST_CASE("loss counts target positions only") {
    const Corpus corpus = tiny_corpus(2, 4);
    const Composer m = tiny_model(corpus);
    const auto ex = m.encode(corpus[0], "", {});
    const SequenceInput in = ex.sequence();
    const auto logits = m.logits(in);
    const std::size_t v = m.vocab().size();
    double nll = 0.0;
    std::size_t n = 0;
    for (std::size_t t = ex.context.slots.size(); t < in.size(); ++t) {
        const float* row = logits.data() + t * v;
        double mx = row[0];
        for (std::size_t k = 0; k < v; ++k) mx = std::max(mx, static_cast<double>(row[k]));
        double z = 0.0;
        for (std::size_t k = 0; k < v; ++k) z += std::exp(row[k] - mx);
        nll += mx + std::log(z) - row[in.labels[t]];
        ++n;
    }
    CHECK(m.loss({ex}) == doctest::Approx(nll / static_cast<double>(n)).epsilon(1e-5));

    // labels placed on context positions change the loss, so masking is what keeps them out
    SequenceInput leaky = in;
    leaky.labels[0] = 5;
    CHECK(m.batch_loss<float>(m.parameters(), {leaky}, nullptr) != doctest::Approx(m.loss({ex})).epsilon(1e-7));

    // a different context changes conditioning but not which positions count
    const auto ex2 = m.encode(corpus[0], "Please edit a video with a 50% frequency of trigger positions", {});
    std::size_t labelled = 0;
    for (TokenId l : ex2.sequence().labels) labelled += l >= 0;
    CHECK(labelled == ex.target.size());
}

TEST_CASE("uniform output head gives ln|V| and a confident head gives zero") {
    const Corpus corpus = tiny_corpus(2, 5);
    Composer m = tiny_model(corpus);
    // Tied head: zero token embeddings and bias give all-zero logits.
    const auto& te = m.layout().get("tok_emb");
    const auto& hb = m.layout().get("head.b");
    std::fill_n(m.parameters().begin() + static_cast<std::ptrdiff_t>(te.offset), te.size(), 0.0f);
    std::fill_n(m.parameters().begin() + static_cast<std::ptrdiff_t>(hb.offset), hb.size(), 0.0f);
    const auto ex = m.encode(corpus[0], "", {});
    CHECK(m.loss({ex}) == doctest::Approx(std::log(static_cast<double>(m.vocab().size()))).epsilon(1e-6));

    // all labels the same token and a bias that puts all mass on it
    SequenceInput in = ex.sequence();
    for (auto& l : in.labels) {
        if (l >= 0) l = 7;
    }
    m.parameters()[hb.offset + 7] = 100.0f;
    CHECK(m.batch_loss<float>(m.parameters(), {in}, nullptr) < 1e-12);
}

TEST_CASE("causality: logits never depend on later positions") {
    const Corpus corpus = tiny_corpus(2, 6);
    const Composer m = tiny_model(corpus);
    const auto ex = m.encode(corpus[1], "", {});
    const SequenceInput full = ex.sequence();
    const auto all = m.logits(full);
    const std::size_t v = m.vocab().size();
    for (std::size_t cut : {std::size_t{1}, full.size() / 2, full.size() - 1}) {
        SequenceInput part = full;
        part.kinds.resize(cut);
        part.tokens.resize(cut);
        part.features.resize(cut);
        part.segments.resize(cut);
        part.labels.resize(cut);
        const auto pl = m.logits(part);
        for (std::size_t i = 0; i < cut * v; ++i) REQUIRE(pl[i] == doctest::Approx(all[i]).epsilon(1e-4));
    }
    // changing a future target token leaves earlier logits untouched
    SequenceInput changed = full;
    changed.tokens.back() = 9;
    const auto cl = m.logits(changed);
    for (std::size_t i = 0; i < (full.size() - 1) * v; ++i) REQUIRE(cl[i] == all[i]);
}

TEST_CASE("analytic gradients match central differences") {
    const Corpus corpus = tiny_corpus(2, 7);
    const Composer m = tiny_model(corpus);
    std::vector<SequenceInput> batch;
    std::vector<EncodedExample> examples;
    for (const auto& s : corpus) examples.push_back(m.encode(s, "", {}));
    for (const auto& e : examples) batch.push_back(e.sequence());
    bool has_visual = false, has_audio = false;
    for (const auto& in : batch) {
        for (auto k : in.kinds) {
            has_visual |= k == static_cast<std::uint8_t>(SlotKind::kVisual);
            has_audio |= k == static_cast<std::uint8_t>(SlotKind::kAudio);
        }
    }
    REQUIRE(has_visual);
    REQUIRE(has_audio);

    AlignedVector<double> params(m.parameters().begin(), m.parameters().end());
    AlignedVector<double> grad;
    m.batch_loss<double>(params, batch, &grad);

    // every projector parameter plus a seeded sample of everything else
    std::vector<std::size_t> probe;
    for (const char* name : {"proj_v.w", "proj_v.b", "proj_a.w", "proj_a.b"}) {
        const auto& t = m.layout().get(name);
        for (std::size_t i = 0; i < t.size(); i += (t.size() > 64 ? 7 : 1)) probe.push_back(t.offset + i);
    }
    for (const auto& t : m.layout().tensors) {
        Rng rng(fnv1a64(t.name));
        for (int k = 0; k < 6; ++k) probe.push_back(t.offset + rng.below(t.size()));
    }
    // key biases have an exactly-zero gradient, so the floor keeps pure
    // rounding noise from counting as relative error
    const double h = 1e-5;
    double worst = 0.0;
    std::string worst_name;
    for (std::size_t i : probe) {
        const double keep = params[i];
        params[i] = keep + h;
        const double up = m.batch_loss<double>(params, batch, nullptr);
        params[i] = keep - h;
        const double down = m.batch_loss<double>(params, batch, nullptr);
        params[i] = keep;
        const double numeric = (up - down) / (2 * h);
        const double rel = std::abs(numeric - grad[i]) / std::max({std::abs(numeric), std::abs(grad[i]), 1e-5});
        if (rel > worst) {
            worst = rel;
            for (const auto& t : m.layout().tensors) {
                if (i >= t.offset && i < t.offset + t.size()) worst_name = t.name;
            }
        }
    }
    INFO("worst tensor " << worst_name);
    CHECK(worst < 1e-4);

    // the float path agrees with the double path
    ParamVector gf;
    m.loss(examples, &gf);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < gf.size(); ++i) {
        num += (gf[i] - grad[i]) * (gf[i] - grad[i]);
        den += grad[i] * grad[i];
    }
    CHECK(std::sqrt(num / den) < 1e-3);
}

TEST_CASE("incremental decoding reproduces the full forward pass") {
    const Corpus corpus = tiny_corpus(2, 8);
    const Composer m = tiny_model(corpus);
    const auto ex = m.encode(corpus[0], "", {});
    const SequenceInput in = ex.sequence();
    const auto all = m.logits(in);
    const auto off = detail::Offsets::of(m.layout(), m.config().depth);
    detail::IncrementalDecoder dec(m.config(), off, m.vocab().size(), m.parameters().data());
    std::vector<float> step;
    const std::size_t v = m.vocab().size();
    for (std::size_t t = 0; t < in.size(); ++t) {
        dec.step(in.kinds[t], in.tokens[t], in.features[t], in.segments[t], &step);
        for (std::size_t k = 0; k < v; ++k) REQUIRE(step[k] == doctest::Approx(all[t * v + k]).epsilon(1e-4));
    }
}

TEST_CASE("cosine schedule decays to the floor") {
    TrainConfig c;
    c.learning_rate = 1e-4;
    c.steps = 1000;
    CHECK(learning_rate_at(c, 0) == doctest::Approx(1e-4));
    CHECK(learning_rate_at(c, 999) <= 0.01 * 1e-4);
    CHECK(learning_rate_at(c, 499) == doctest::Approx(0.5e-4).epsilon(0.01));
    double prev = learning_rate_at(c, 0);
    for (std::size_t s = 1; s < c.steps; ++s) {
        const double lr = learning_rate_at(c, s);
        REQUIRE(lr <= prev);
        prev = lr;
    }
    c.warmup_steps = 10;
    CHECK(learning_rate_at(c, 0) == doctest::Approx(1e-5));
    CHECK(learning_rate_at(c, 9) == doctest::Approx(1e-4));
    CHECK(learning_rate_at(c, 999) <= 0.01 * 1e-4);
}

TEST_CASE("constraint admits every valid composition token by token") {
    Rng rng(11);
    const Corpus corpus = tiny_corpus(1, 1);
    const Vocabulary vocab = build_vocabulary(corpus, &pool());
    for (int iter = 0; iter < 300; ++iter) {
        std::vector<Sentence> sentences;
        const std::size_t s = 1 + rng.below(4);
        for (std::size_t i = 0; i < s; ++i) sentences.push_back(vcomp::testing::random_sentence(rng));
        const CompositionTarget target =
            canonicalize_spans(vcomp::testing::random_target(rng, sentences, pool()), sentences);
        FormatOptions fmt;
        fmt.include_indices = rng.bernoulli(0.5);
        fmt.trigger_mode = rng.bernoulli(0.5) ? TriggerMode::kWords : TriggerMode::kIndices;
        const std::string text = serialize(target, sentences, fmt);
        const CompositionConstraint cc(sentences, pool(), fmt);
        std::string sofar;
        for (TokenId id : vocab.encode(text)) {
            REQUIRE_MESSAGE(cc.accepts(sofar, vocab.piece(id)), text << " | " << sofar << " + " << vocab.piece(id));
            sofar += vocab.piece(id);
        }
        REQUIRE(cc.accepts_end(sofar));
    }
}

TEST_CASE("constraint rejects and finalizes") {
    const std::vector<Sentence> sentences = {whitespace_tokenize("this pack of glass wipes is great"),
                                             whitespace_tokenize("hello world")};
    const auto name = pool().at(EffectCategory::kTextEffect, 0).name;
    const CompositionConstraint cc(sentences, pool(), FormatOptions{});
    CHECK(cc.accepts("", "[0"));
    CHECK_FALSE(cc.accepts("", "[1"));
    CHECK(cc.accepts("[0] (", "glass wipes"));
    CHECK_FALSE(cc.accepts("[0] (", "wipes glass"));
    CHECK(cc.accepts("[0] (glass wipes", ")->text-effect:"));
    CHECK_FALSE(cc.accepts("[0] (glass wipes", ")->text-effectz"));
    CHECK(cc.accepts("[0] (glass wipes)->text-effect:", name));
    CHECK_FALSE(cc.accepts("[0] (glass wipes)->text-effect:", "nope"));
    CHECK_FALSE(cc.accepts("[0] (glass", "\n"));
    CHECK(cc.accepts("[0]", "\n"));
    CHECK_FALSE(cc.accepts_end("[0]"));
    CHECK(cc.accepts_end("[0]\n[1]"));
    CHECK_FALSE(cc.accepts("[0]\n[1]", "\n"));
    CHECK(cc.accepts("[0]\n[1] (", "<whole sentence>"));

    CHECK(cc.finalize("") == "[0]\n[1]");
    CHECK(cc.finalize("[0] (glass wipes)->text-effect:" + name + ";(gre") ==
          "[0] (glass wipes)->text-effect:" + name + "\n[1]");
    CHECK(cc.finalize("[0]\n[") == "[0]\n[1]");
    CHECK(cc.finalize("[0] (gla") == "[0]\n[1]");
    for (const char* partial : {"", "[0", "[0] (glass wipes)->te", "[0]\n[1] (hello"}) {
        CHECK_NOTHROW(parse(cc.finalize(partial), sentences, pool(), FormatOptions{}, true));
    }
}

TEST_CASE("constrained decoding always strict-parses") {
    const Corpus corpus = tiny_corpus(6, 12, 0.5);
    for (int variant = 0; variant < 4; ++variant) {
        FormatOptions fmt;
        fmt.include_indices = variant % 2 == 0;
        fmt.trigger_mode = variant / 2 == 0 ? TriggerMode::kWords : TriggerMode::kIndices;
        ModelConfig mc = tiny_config();
        mc.init_seed = static_cast<std::uint64_t>(variant);
        mc.init_scale = 1.0;  // a wild untrained model
        const Composer m(mc, build_vocabulary(corpus, &pool()), fmt);
        for (const auto& s : corpus) {
            for (std::uint64_t seed = 0; seed < 3; ++seed) {
                DecodeOptions d;
                d.constrained = true;
                d.mode = DecodeOptions::Mode::kSample;
                d.temperature = 1.5;
                d.seed = seed;
                if (seed == 2) d.max_new_tokens = 5;  // forces the budget cut
                const auto r = m.compose_text(s, s.prompt.value_or(""), d, pool());
                REQUIRE_NOTHROW(parse(r.text, s.sentences(), pool(), fmt, true));
                CHECK(r.parsed.diagnostics.dropped() == 0);
                CHECK(r.generated_tokens <= r.budget);
            }
            DecodeOptions g;
            g.constrained = true;
            const auto r = m.compose_text(s, "", g, pool());
            REQUIRE_NOTHROW(parse(r.text, s.sentences(), pool(), fmt, true));
        }
    }
}

TEST_CASE("greedy decoding is deterministic and unconstrained output is lenient-parsed") {
    const Corpus corpus = tiny_corpus(3, 13);
    const Composer m = tiny_model(corpus);
    DecodeOptions d;
    const auto a = m.compose(corpus[0], PromptSpec{}, d, pool());
    const auto b = m.compose(corpus[0], PromptSpec{}, d, pool());
    CHECK(a.text == b.text);
    CHECK(a.budget == 16 * corpus[0].segments.size() + 8);
    CHECK(a.generated_tokens <= a.budget);

    d.mode = DecodeOptions::Mode::kSample;
    d.seed = 4;
    CHECK(m.compose(corpus[0], PromptSpec{}, d, pool()).text == m.compose(corpus[0], PromptSpec{}, d, pool()).text);

    ModelConfig mc = tiny_config();
    mc.context_window = 40;
    const Composer small(mc, m.vocab());
    CHECK(code_of([&] { (void)small.compose(corpus[0], PromptSpec{}, DecodeOptions{}, pool()); }) ==
          ErrorCode::kTooLong);
}

TEST_CASE("training is seeded, resumable, and guarded against divergence") {
    const Corpus corpus = tiny_corpus(6, 14);
    TrainConfig tc;
    tc.learning_rate = 3e-3;
    tc.steps = 12;
    tc.batch_size = 3;
    tc.log_interval = 4;
    tc.eval_samples = 2;
    tc.seed = 9;

    Composer a = tiny_model(corpus);
    Composer b = tiny_model(corpus);
    const auto ra = train(a, corpus, corpus, tc, pool());
    const auto rb = train(b, corpus, corpus, tc, pool());
    CHECK(ra.step_losses == rb.step_losses);
    CHECK(a.parameters() == b.parameters());
    CHECK(ra.step_losses.size() == 12);
    CHECK(ra.log.size() == 3);
    REQUIRE(ra.validation.back().metrics.has_value());

    // snapshot at step 4 from inside a 12-step run, reload, finish: same parameters
    const auto dir = vcomp::testing::temp_dir("resume");
    Composer straight = tiny_model(corpus);
    TrainingState live;
    TrainHooks hooks;
    hooks.on_log = [&](const LogEntry& e) {
        if (e.step == 4) save_checkpoint(straight, dir / "mid.bin", &live, &tc);
    };
    train(straight, corpus, corpus, tc, pool(), {}, &live, hooks);
    TrainingState resumed;
    TrainConfig loaded;
    Composer mid = load_checkpoint(dir / "mid.bin", &resumed, &loaded);
    CHECK(resumed.step == 4);
    CHECK(loaded.steps == 12);
    const auto rest = train(mid, corpus, corpus, loaded, pool(), {}, &resumed);
    CHECK(rest.step_losses.size() == 8);
    CHECK(mid.parameters() == straight.parameters());
    CHECK(std::vector<double>(ra.step_losses.begin() + 4, ra.step_losses.end()) == rest.step_losses);

    TrainConfig wild = tc;
    wild.learning_rate = 1e30;
    wild.grad_clip = 0.0;
    wild.optimizer = "sgd";
    Composer d = tiny_model(corpus);
    CHECK(code_of([&] { train(d, corpus, corpus, wild, pool()); }) == ErrorCode::kNumerical);

    TrainConfig bad = tc;
    bad.optimizer = "lion";
    CHECK(code_of([&] { train(d, corpus, corpus, bad, pool()); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("checkpoints round-trip and reject corrupt files") {
    const Corpus corpus = tiny_corpus(3, 15);
    FormatOptions fmt;
    fmt.order = OrderMode::kRandom;
    fmt.seed = 77;
    fmt.include_indices = false;
    ContextOptions ctx;
    ctx.use_audio = false;
    const Composer m = tiny_model(corpus, fmt, ctx);
    const auto dir = vcomp::testing::temp_dir("ckpt");
    save_checkpoint(m, dir / "m.bin");
    const Composer back = load_checkpoint(dir / "m.bin");
    CHECK(back.parameters() == m.parameters());
    CHECK(back.vocab() == m.vocab());
    CHECK(back.format().order == OrderMode::kRandom);
    CHECK(back.format().seed == std::optional<std::uint64_t>(77));
    CHECK_FALSE(back.format().include_indices);
    CHECK_FALSE(back.context_options().use_audio);
    CHECK(model_config_to_json(back.config()) == model_config_to_json(m.config()));
    CHECK(back.target_text(corpus[0]) == m.target_text(corpus[0]));

    write_file((dir / "bad.bin").string(), "NOTACKPT");
    CHECK(code_of([&] { (void)load_checkpoint(dir / "bad.bin"); }) == ErrorCode::kSchema);
    const std::string bytes = read_file((dir / "m.bin").string());
    write_file((dir / "cut.bin").string(), bytes.substr(0, bytes.size() / 2));
    CHECK(code_of([&] { (void)load_checkpoint(dir / "cut.bin"); }) == ErrorCode::kSchema);
    CHECK(code_of([&] { (void)load_checkpoint(dir / "missing.bin"); }) == ErrorCode::kIo);

    const TrainConfig tc = train_config_from_json(R"({"learning_rate": 0.002, "steps": 5, "report_path": "r.jsonl"})");
    CHECK(tc.learning_rate == 0.002);
    CHECK(tc.steps == 5);
    CHECK(tc.report_path == std::optional<std::filesystem::path>("r.jsonl"));
    CHECK(code_of([] { (void)train_config_from_json("[1]"); }) == ErrorCode::kSchema);
}

TEST_CASE("a tiny model memorizes a handful of samples") {
    const Corpus corpus = tiny_corpus(4, 16);
    ModelConfig mc = tiny_config();
    mc.width = 32;
    mc.heads = 4;
    mc.init_scale = 0.02;
    Composer m(mc, build_vocabulary(corpus, &pool()));
    TrainConfig tc;
    tc.learning_rate = 1e-2;
    tc.steps = 300;
    tc.batch_size = 4;
    tc.log_interval = 10;
    tc.eval_samples = 0;
    tc.stop_at_token_accuracy = 1.0;
    const auto r = train(m, corpus, corpus, tc, pool());
    CHECK(r.log.back().token_accuracy == 1.0);
    CHECK(r.final_val_loss < 0.2 * r.initial_val_loss);
    DecodeOptions d;
    d.constrained = true;
    for (const auto& s : corpus) CHECK(m.compose_text(s, "", d, pool()).text == m.target_text(s));
}
