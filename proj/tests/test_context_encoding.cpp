#include "doctest.h"

#include "test_support.hpp"
#include "vcomp/context_encoding.hpp"
#include "vcomp/prompt.hpp"

#include <cmath>
#include <fstream>

using namespace vcomp;
using vcomp::testing::code_of;

namespace {

double cosine(const Embedding& a, const Embedding& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    return dot / std::sqrt(na * nb);
}

SegmentRecord five_word_segment() {
    SegmentRecord seg;
    seg.index = 0;
    const std::vector<std::string> words = {"apple", "bread", "cream", "glass", "wipes"};
    double t = 2.0;
    for (const auto& w : words) {
        seg.words.push_back({w, t, t + 0.4});
        t += 0.4;
    }
    seg.sentence = join(words, " ");
    return seg;
}

Projector random_projector(MediaModality m, std::size_t out, std::size_t in, std::uint64_t seed) {
    Rng rng(seed);
    Projector p = Projector::zeros(m, out, in);
    for (Eigen::Index r = 0; r < p.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.weight.cols(); ++c) p.weight(r, c) = static_cast<float>(rng.normal());
        p.bias(r) = static_cast<float>(rng.normal());
    }
    return p;
}

}  // namespace

TEST_CASE("audio sample count rule") {
    CHECK(audio_sample_count(0.7) == 2);
    CHECK(audio_sample_count(10.0) == 3);
    CHECK(audio_sample_count(0.49) == 1);
    CHECK(audio_sample_count(0.5) == 2);
    CHECK(audio_sample_count(1.0) == 3);
    CHECK(audio_sample_count(0.0) == 0);
    for (int k = 1; k < 100; ++k) {
        const double d = 0.05 * k;
        CHECK(audio_sample_count(d) == std::min<std::size_t>(3, static_cast<std::size_t>(std::floor(d / 0.5)) + 1));
    }
}

TEST_CASE("stub providers") {
    const StubProvider v(MediaModality::kVisual, 16, 1);
    CHECK(v.output_dim() == 16);
    const auto a = v.encode(LatentClass{0, 0});
    const auto b = v.encode(LatentClass{1, 0});
    REQUIRE(a.size() == 1);
    CHECK(a[0].size() == 16);
    CHECK(a == v.encode(LatentClass{0, 0}));
    CHECK(cosine(a[0], b[0]) < 0.5);
    // the first dim basis vectors are mutually orthogonal
    for (std::size_t i = 0; i < 8; ++i) {
        for (std::size_t j = i + 1; j < 8; ++j) CHECK(std::abs(cosine(v.basis(i), v.basis(j))) < 1e-5);
    }
    const StubProvider v2(MediaModality::kVisual, 16, 1);
    CHECK(v2.basis(5) == v.basis(5));
    const StubProvider other_seed(MediaModality::kVisual, 16, 2);
    CHECK(other_seed.basis(0) != v.basis(0));

    const StubProvider au(MediaModality::kAudio, 8, 1);
    CHECK(au.encode(LatentClass{2, 0.7}).size() == 2);
    CHECK(au.encode(LatentClass{2, 10.0}).size() == 3);
    CHECK(code_of([] { StubProvider bad(MediaModality::kAudio, 0, 1); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("stub providers hash media bytes") {
    const auto dir = vcomp::testing::temp_dir("media");
    {
        std::ofstream(dir / "f.bin") << "frame bytes";
        std::ofstream(dir / "g.bin") << "other bytes";
    }
    const StubProvider v(MediaModality::kVisual, 12, 3);
    const auto f = v.encode(FrameRef{(dir / "f.bin").string(), 1.0});
    CHECK(f == v.encode(FrameRef{(dir / "f.bin").string(), 1.0}));
    CHECK(f != v.encode(FrameRef{(dir / "g.bin").string(), 1.0}));
    CHECK(f != v.encode(FrameRef{(dir / "f.bin").string(), 2.0}));
    const StubProvider a(MediaModality::kAudio, 6, 3);
    CHECK(a.encode(AudioClip{(dir / "g.bin").string(), 0.0, 0.7}).size() == 2);
    try {
        (void)v.encode(FrameRef{(dir / "missing.png").string(), 0.0});
        FAIL("expected io error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kIo);
        CHECK(std::string(e.what()).find("missing.png") != std::string::npos);
    }
}

TEST_CASE("select_frame") {
    SegmentRecord seg;
    seg.words = {{"a", 2.0, 2.5}, {"b", 3.5, 4.0}};
    CHECK(std::holds_alternative<VisualAbsent>(select_frame(seg)));
    seg.frame_ref = "video.mp4";
    const auto src = select_frame(seg);
    REQUIRE(std::holds_alternative<FrameRef>(src));
    CHECK(std::get<FrameRef>(src).time_s == doctest::Approx(3.0));
    seg.visual_embedding = Embedding{1, 2, 3};
    CHECK(std::get<Embedding>(select_frame(seg)) == Embedding{1, 2, 3});
}

TEST_CASE("encode_visual shapes and projector identities") {
    const StubProvider v(MediaModality::kVisual, kReferenceVisualDim, 1);
    const auto dir = vcomp::testing::temp_dir("frame");
    std::ofstream(dir / "frame.bin") << "x";
    const FrameRef frame{(dir / "frame.bin").string(), 3.0};
    const Projector p = random_projector(MediaModality::kVisual, 512, kReferenceVisualDim, 4);
    CHECK(encode_visual(frame, v, p).size() == 512);

    const Embedding zero = encode_visual(frame, v, Projector::zeros(MediaModality::kVisual, 64, kReferenceVisualDim));
    CHECK(zero == Embedding(64, 0.0f));
    const Embedding raw = v.encode(frame).front();
    CHECK(encode_visual(frame, v, Projector::identity(MediaModality::kVisual, kReferenceVisualDim)) == raw);

    const StubProvider a(MediaModality::kAudio, 8, 1);
    CHECK(code_of([&] { (void)encode_visual(frame, a, p); }) == ErrorCode::kInvalidArgument);
    try {
        (void)encode_visual(FrameRef{"/nonexistent/clip.mp4", 1.5}, v, p);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("clip.mp4") != std::string::npos);
    }
}

TEST_CASE("encode_audio keeps the first three") {
    const StubProvider a(MediaModality::kAudio, kReferenceAudioDim, 1);
    const auto dir = vcomp::testing::temp_dir("audio");
    std::ofstream(dir / "a.wav") << "pcm";
    const Projector p = random_projector(MediaModality::kAudio, 32, kReferenceAudioDim, 5);
    CHECK(encode_audio({(dir / "a.wav").string(), 0.0, 0.7}, a, p).size() == 2);
    const auto ten = encode_audio({(dir / "a.wav").string(), 0.0, 10.0}, a, p);
    REQUIRE(ten.size() == 3);
    const auto raw = a.encode(AudioClip{(dir / "a.wav").string(), 0.0, 10.0});
    CHECK(raw.size() == 21);
    for (std::size_t k = 0; k < 3; ++k) CHECK(ten[k] == p.apply(raw[k]));
}

TEST_CASE("projector linearity") {
    const Projector p = random_projector(MediaModality::kVisual, 10, 7, 9);
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        Embedding x(7), y(7);
        for (auto& v : x) v = static_cast<float>(rng.normal());
        for (auto& v : y) v = static_cast<float>(rng.normal());
        const double alpha = rng.uniform(-2, 2), beta = rng.uniform(-2, 2);
        Embedding mix(7);
        for (int i = 0; i < 7; ++i) mix[i] = static_cast<float>(alpha * x[i] + beta * y[i]);
        const auto lhs = p.apply(mix);
        const auto px = p.apply(x), py = p.apply(y);
        for (int r = 0; r < 10; ++r) {
            const double rhs = alpha * px[r] + beta * py[r] - (alpha + beta - 1) * p.bias(r);
            CHECK(lhs[r] == doctest::Approx(rhs).epsilon(1e-4).scale(10));
        }
    }
    CHECK(code_of([&] { (void)p.apply(Embedding(3)); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("assemble_context slot accounting") {
    const Vocabulary vocab = Vocabulary::build(synthetic_lexicon());
    Sample s;
    s.sample_id = "ctx";
    SegmentRecord seg = five_word_segment();
    seg.visual_embedding = Embedding(4, 1.0f);
    seg.audio_embeddings = std::vector<Embedding>{Embedding(3, 0.5f), Embedding(3, 0.25f)};
    s.segments.push_back(seg);
    s.target = CompositionTarget::empty(1);

    ContextOptions opts;
    const auto ctx = assemble_context(s, "", vocab, {}, opts);
    CHECK(ctx.total_token_count == 9);
    CHECK(ctx.total_token_count == segment_slot_count(seg, vocab, opts));
    CHECK(ctx.slots[0].kind == SlotKind::kIndexMarker);
    CHECK(vocab.piece(ctx.slots[0].token) == "0");
    CHECK(ctx.slots[1].kind == SlotKind::kText);
    CHECK(ctx.slots[6].kind == SlotKind::kVisual);
    CHECK(ctx.slots[7].kind == SlotKind::kAudio);
    CHECK(ctx.slots[8].features == Embedding(3, 0.25f));

    opts.include_indices = false;
    CHECK(assemble_context(s, "", vocab, {}, opts).total_token_count == 8);
    opts.include_indices = true;

    const std::string prompt = "Please edit a video with";
    REQUIRE(vocab.encode_words(prompt).size() == 5);
    const auto with_prompt = assemble_context(s, "Please edit a video", vocab, {}, opts);
    CHECK(with_prompt.total_token_count - ctx.total_token_count == 4);
    CHECK(with_prompt.slots.back().kind == SlotKind::kPrompt);
    CHECK(with_prompt.slots.back().segment_index == 1);

    opts.use_visual = false;
    opts.use_audio = false;
    CHECK(assemble_context(s, "", vocab, {}, opts).total_token_count == 6);

    opts = ContextOptions{};
    opts.context_window = 8;
    CHECK(code_of([&] { (void)assemble_context(s, "", vocab, {}, opts); }) == ErrorCode::kTooLong);
}

TEST_CASE("assemble_context is pure and follows the slot identity") {
    const Vocabulary vocab = Vocabulary::build(synthetic_lexicon());
    const EffectPool pool = make_synthetic_pool({{EffectCategory::kTextEffect, 20},
                                                 {EffectCategory::kSoundEffect, 20},
                                                 {EffectCategory::kImageSticker, 20}},
                                                0);
    SyntheticConfig cfg;
    cfg.num_samples = 30;
    cfg.prompt_rate = 0.5;
    for (const auto& s : generate_synthetic(cfg, pool)) {
        const std::string prompt = s.prompt.value_or("");
        ContextOptions opts;
        const auto a = assemble_context(s, prompt, vocab, {}, opts);
        CHECK(a == assemble_context(s, prompt, vocab, {}, opts));
        std::size_t expected = vocab.encode_words(prompt).size();
        for (const auto& seg : s.segments) expected += segment_slot_count(seg, vocab, opts);
        CHECK(a.total_token_count == expected);
        // segments ascend, one marker each
        std::size_t markers = 0, last = 0;
        for (const auto& slot : a.slots) {
            CHECK(slot.segment_index >= last);
            last = slot.segment_index;
            markers += slot.kind == SlotKind::kIndexMarker ? 1 : 0;
        }
        CHECK(markers == s.segments.size());
    }
}

TEST_CASE("embed_segment projects into the joint space") {
    const Vocabulary vocab = Vocabulary::build(synthetic_lexicon());
    SegmentRecord seg = five_word_segment();
    seg.visual_embedding = Embedding(6, 1.0f);
    seg.audio_embeddings = std::vector<Embedding>(3, Embedding(5, 2.0f));
    const Projector pv = random_projector(MediaModality::kVisual, 16, 6, 1);
    const Projector pa = random_projector(MediaModality::kAudio, 16, 5, 2);
    const auto e = embed_segment(seg, vocab, {}, pv, pa, {});
    CHECK(e.text_tokens.size() == 5);
    REQUIRE(e.visual);
    CHECK(e.visual->size() == 16);
    CHECK(e.audio.size() == 3);

    SegmentRecord bare = five_word_segment();
    const auto b = embed_segment(bare, vocab, {}, pv, pa, {});
    CHECK_FALSE(b.visual);
    CHECK(b.audio.empty());
}

TEST_CASE("vocabulary round trips composition text") {
    const Vocabulary vocab = Vocabulary::build(synthetic_lexicon());
    const std::string text = "[0] (glass wipes)->text-effect:te0007;(<whole sentence>)->sound-effect:biu\n[1]";
    const auto ids = vocab.encode(text);
    CHECK(vocab.decode(ids) == text);
    for (auto id : ids) CHECK(id != Vocabulary::kUnk);
    // any bytes survive
    const std::string odd = "héllo\t~";
    CHECK(vocab.decode(vocab.encode(odd)) == odd);
    CHECK(vocab.encode_word("apple").size() == 1);
}
