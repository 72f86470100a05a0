#include "doctest.h"

#include "test_support.hpp"

#include <algorithm>

using namespace vcomp;
using vcomp::testing::code_of;

namespace {

const EffectPool& pool() {
    static const EffectPool p = [] {
        std::vector<Effect> e = vcomp::testing::small_pool().effects();
        e.push_back({EffectCategory::kTextEffect, "TE7", {}});
        e.push_back({EffectCategory::kSoundEffect, "biu", {}});
        e.push_back({EffectCategory::kImageSticker, "Notice", {}});
        return EffectPool(std::move(e));
    }();
    return p;
}

const Sentence kGlass = whitespace_tokenize("this pack of glass wipes is great");

FormatOptions opts(TriggerMode mode, bool indices = true) {
    FormatOptions o;
    o.trigger_mode = mode;
    o.include_indices = indices;
    return o;
}

}  // namespace

TEST_CASE("empty target renders one bare index line per segment") {
    const std::vector<Sentence> s = {{"a"}, {"b"}, {"c"}};
    CHECK(serialize(CompositionTarget::empty(3), s, {}) == "[0]\n[1]\n[2]");
    CHECK(serialize(CompositionTarget::empty(3), s, opts(TriggerMode::kWords, false)) == "\n\n");
}

TEST_CASE("glass wipes example in both trigger modes") {
    // tokens: this(0) pack(1) of(2) glass(3) wipes(4) is(5) great(6)
    REQUIRE(kGlass.size() == 7);
    REQUIRE(kGlass[3] == "glass");
    REQUIRE(kGlass[4] == "wipes");
    CompositionTarget t = CompositionTarget::empty(1);
    t.segments[0].elements.push_back({TriggerPosition::span(3, 4), EffectCategory::kTextEffect, "TE7"});
    const std::vector<Sentence> s = {kGlass};
    CHECK(serialize(t, s, opts(TriggerMode::kWords)) == "[0] (glass wipes)->text-effect:TE7");
    CHECK(serialize(t, s, opts(TriggerMode::kIndices)) == "[0] (3-4)->text-effect:TE7");
    CHECK(serialize(t, s, opts(TriggerMode::kWords, false)) == "(glass wipes)->text-effect:TE7");
}

TEST_CASE("multi-element line with sentinel") {
    CompositionTarget t = CompositionTarget::empty(2);
    t.segments[1].elements = {{TriggerPosition::whole(), EffectCategory::kSoundEffect, "biu"},
                              {TriggerPosition::span(6, 6), EffectCategory::kTextEffect, "TE7"}};
    const std::vector<Sentence> s = {{"hi"}, kGlass};
    const std::string text = serialize(t, s, {});
    CHECK(text == "[0]\n[1] (<whole sentence>)->sound-effect:biu;(great)->text-effect:TE7");
    CHECK(parse(text, s, pool(), {}, true).target == t);
}

TEST_CASE("serialize rejects invalid targets") {
    const std::vector<Sentence> s = {kGlass};
    CompositionTarget t = CompositionTarget::empty(1);
    t.segments[0].elements.push_back({TriggerPosition::span(5, 7), EffectCategory::kTextEffect, "TE7"});
    CHECK(code_of([&] { (void)serialize(t, s, {}); }) == ErrorCode::kOutOfRange);

    const std::vector<Sentence> bad = {{"semi;colon", "ok"}};
    CompositionTarget u = CompositionTarget::empty(1);
    u.segments[0].elements.push_back({TriggerPosition::span(0, 0), EffectCategory::kTextEffect, "TE7"});
    CHECK(code_of([&] { (void)serialize(u, bad, {}); }) == ErrorCode::kValidation);
    // indices mode does not print the word, so it is fine
    CHECK(serialize(u, bad, opts(TriggerMode::kIndices)) == "[0] (0-0)->text-effect:TE7");

    // non-leftmost span would ground elsewhere
    const std::vector<Sentence> rep = {{"a", "b", "a", "b"}};
    CompositionTarget v = CompositionTarget::empty(1);
    v.segments[0].elements.push_back({TriggerPosition::span(2, 3), EffectCategory::kTextEffect, "TE7"});
    CHECK(code_of([&] { (void)serialize(v, rep, {}); }) == ErrorCode::kValidation);
    CHECK(canonicalize_spans(v, rep).segments[0].elements[0].trigger == TriggerPosition::span(0, 1));
}

TEST_CASE("lenient parse drops unknown effects") {
    const std::vector<Sentence> s = {kGlass};
    const auto r = parse("[0] (glass wipes)->text-effect:NOPE", s, pool(), {}, false);
    CHECK(r.target.segments.size() == 1);
    CHECK(r.target.segments[0].elements.empty());
    CHECK(r.diagnostics.unknown_effect == 1);
    CHECK(r.diagnostics.dropped() == 1);
    CHECK(code_of([&] { (void)parse("[0] (glass wipes)->text-effect:NOPE", s, pool(), {}, true); }) ==
          ErrorCode::kNotFound);
}

TEST_CASE("strict parse errors") {
    const std::vector<Sentence> s = {kGlass, kGlass};
    CHECK(code_of([&] { (void)parse("[2] (great)->text-effect:TE7", s, pool(), {}, true); }) == ErrorCode::kOutOfRange);
    CHECK(code_of([&] { (void)parse("[0]\n[0]", s, pool(), {}, true); }) == ErrorCode::kDuplicate);
    CHECK(code_of([&] { (void)parse("[0] (goodbye)->text-effect:TE7", s, pool(), {}, true); }) == ErrorCode::kValidation);
    CHECK(code_of([&] { (void)parse("[0] (great)->bogus:TE7", s, pool(), {}, true); }) == ErrorCode::kParse);
    CHECK(code_of([&] { (void)parse("0 (great)->text-effect:TE7", s, pool(), {}, true); }) == ErrorCode::kParse);
    CHECK(code_of([&] { (void)parse("[0]  (great)->text-effect:TE7", s, pool(), {}, true); }) == ErrorCode::kParse);
    CHECK(code_of([&] { (void)parse("[0] (great) -> text-effect:TE7", s, pool(), {}, true); }) == ErrorCode::kParse);
    CHECK(code_of([&] { (void)parse("[00]", s, pool(), {}, true); }) == ErrorCode::kParse);
    CHECK(code_of([&] { (void)parse("[0] (7-7)->text-effect:TE7", s, pool(), opts(TriggerMode::kIndices), true); }) ==
          ErrorCode::kValidation);
    // no-index mode needs exactly S lines in strict mode
    CHECK(code_of([&] { (void)parse("", s, pool(), opts(TriggerMode::kWords, false), true); }) == ErrorCode::kParse);
}

TEST_CASE("lenient parse counts each failure kind") {
    const std::vector<Sentence> s = {kGlass, kGlass};
    const std::string text =
        "garbage\n"
        "[0] (great)->text-effect:TE7;(nowhere)->text-effect:TE7;broken\n"
        "[0] (great)->text-effect:TE7\n"
        "[5]\n";
    const auto r = parse(text, s, pool(), {}, false);
    CHECK(r.target.segments[0].elements.size() == 1);
    CHECK(r.target.segments[1].elements.empty());
    CHECK(r.diagnostics.malformed_lines == 1);
    CHECK(r.diagnostics.ungroundable_trigger == 1);
    CHECK(r.diagnostics.malformed_elements == 1);
    CHECK(r.diagnostics.duplicate_segment == 1);
    CHECK(r.diagnostics.segment_out_of_range == 1);
}

TEST_CASE("lenient parse never throws on junk") {
    Rng rng(99);
    const std::vector<Sentence> s = {kGlass, kGlass, kGlass};
    const std::string alphabet = "[]0123 ()->;:text-effect:TE7great<whole sentence>\n";
    for (int trial = 0; trial < 2000; ++trial) {
        std::string junk;
        const auto n = rng.below(80);
        for (std::uint64_t k = 0; k < n; ++k) junk += alphabet[rng.below(alphabet.size())];
        for (const auto& o : {opts(TriggerMode::kWords), opts(TriggerMode::kIndices), opts(TriggerMode::kWords, false)}) {
            const auto r = parse(junk, s, pool(), o, false);
            CHECK(r.target.segments.size() == 3);
        }
    }
}

TEST_CASE("ground_trigger") {
    CHECK(ground_trigger(whitespace_tokenize("the cream bread is delicious"), "delicious") == TriggerPosition::span(4, 4));
    CHECK(ground_trigger({"a", "b", "a", "b"}, "a b") == TriggerPosition::span(0, 1));
    CHECK(ground_trigger({"a", "b", "a", "b"}, "  a   b ") == TriggerPosition::span(0, 1));
    CHECK(ground_trigger({"hello"}, "<whole sentence>").is_whole());
    CHECK(code_of([] { (void)ground_trigger({"hello", "world"}, "goodbye"); }) == ErrorCode::kValidation);
    CHECK_FALSE(try_ground_trigger({"hello", "world"}, "hello world again"));
    CHECK_FALSE(try_ground_trigger({"hello", "world"}, ""));
}

TEST_CASE("ground_trigger inverts span rendering for unique word sequences") {
    Rng rng(5);
    for (int trial = 0; trial < 500; ++trial) {
        const Sentence s = vcomp::testing::random_sentence(rng);
        const std::size_t a = rng.below(s.size());
        const std::size_t b = a + rng.below(s.size() - a);
        const auto sp = TriggerPosition::span(a, b);
        // count occurrences
        std::size_t occurrences = 0;
        for (std::size_t st = 0; st + (b - a) < s.size(); ++st) {
            occurrences += std::equal(s.begin() + a, s.begin() + b + 1, s.begin() + st) ? 1 : 0;
        }
        const auto g = ground_trigger(s, render_trigger(sp, s, TriggerMode::kWords));
        if (occurrences == 1) CHECK(g == sp);
        CHECK(g.first <= a);
    }
}

TEST_CASE("order_elements") {
    SegmentComposition one{0, {{TriggerPosition::span(1, 1), EffectCategory::kSoundEffect, "se0001"}}};
    const std::vector<double> t1 = {3.0};
    for (OrderMode m : {OrderMode::kRandom, OrderMode::kString, OrderMode::kCategory, OrderMode::kTime}) {
        CHECK(order_elements(one, m, t1, 11) == one);
    }

    SegmentComposition two{0,
                           {{TriggerPosition::span(3, 4), EffectCategory::kTextEffect, "a"},
                            {TriggerPosition::span(0, 1), EffectCategory::kTextEffect, "b"}}};
    CHECK(order_elements(two, OrderMode::kString, {}, 0).elements[0].trigger == TriggerPosition::span(0, 1));
    const std::vector<double> times = {2.0, 0.5};
    CHECK(order_elements(two, OrderMode::kTime, times, 0).elements[0].name == "b");
    CHECK(code_of([&] { (void)order_elements(two, OrderMode::kTime, {}, 0); }) == ErrorCode::kInvalidArgument);

    SegmentComposition cats{0,
                            {{TriggerPosition::whole(), EffectCategory::kImageSticker, "s"},
                             {TriggerPosition::whole(), EffectCategory::kSoundEffect, "z"},
                             {TriggerPosition::span(0, 0), EffectCategory::kTextAnimation, "q"},
                             {TriggerPosition::whole(), EffectCategory::kSoundEffect, "a"}}};
    const auto by_cat = order_elements(cats, OrderMode::kCategory, {}, 0);
    std::vector<std::string> names;
    for (const auto& e : by_cat.elements) names.push_back(e.name);
    CHECK(names == std::vector<std::string>{"q", "a", "z", "s"});
    // string mode: whole-sentence sorts as -1, ties by (category, name)
    const auto by_str = order_elements(cats, OrderMode::kString, {}, 0);
    names.clear();
    for (const auto& e : by_str.elements) names.push_back(e.name);
    CHECK(names == std::vector<std::string>{"a", "z", "s", "q"});
}

TEST_CASE("order_elements is an idempotent permutation") {
    Rng rng(17);
    const EffectPool& p = pool();
    for (int trial = 0; trial < 500; ++trial) {
        const Sentence s = vcomp::testing::random_sentence(rng);
        SegmentComposition seg{0, {}};
        const std::size_t n = rng.below(6);
        for (std::size_t k = 0; k < n; ++k) seg.elements.push_back(vcomp::testing::random_element(rng, s, p));
        for (OrderMode m : {OrderMode::kRandom, OrderMode::kString, OrderMode::kCategory, OrderMode::kTime}) {
            // times as a pure function of the element
            const auto times_of = [](const SegmentComposition& c) {
                std::vector<double> t;
                for (const auto& e : c.elements) t.push_back(e.trigger.is_whole() ? 0.0 : 0.25 * e.trigger.first);
                return t;
            };
            const auto once = order_elements(seg, m, times_of(seg), 3);
            const auto twice = order_elements(once, m, times_of(once), 3);
            CHECK(once == twice);
            auto a = seg.elements;
            auto b = once.elements;
            const auto key = [](const EffectElement& e) {
                return std::make_tuple(e.trigger.is_whole(), e.trigger.first, e.trigger.last, e.category, e.name);
            };
            const auto less = [&](const EffectElement& x, const EffectElement& y) { return key(x) < key(y); };
            std::sort(a.begin(), a.end(), less);
            std::sort(b.begin(), b.end(), less);
            CHECK(a == b);
        }
    }
}

TEST_CASE("round trip across all format variants") {
    Rng rng(2024);
    const EffectPool& p = pool();
    std::size_t checked = 0;
    for (int trial = 0; trial < 400; ++trial) {
        std::vector<Sentence> sentences;
        const std::size_t S = 1 + rng.below(5);
        for (std::size_t i = 0; i < S; ++i) sentences.push_back(vcomp::testing::random_sentence(rng));
        const auto base = canonicalize_spans(vcomp::testing::random_target(rng, sentences, p), sentences);
        for (OrderMode m : {OrderMode::kRandom, OrderMode::kString, OrderMode::kCategory, OrderMode::kTime}) {
            CompositionTarget t = base;
            for (auto& seg : t.segments) {
                std::vector<double> times;
                for (const auto& e : seg.elements) times.push_back(e.trigger.is_whole() ? 0.0 : e.trigger.first);
                seg = order_elements(seg, m, times, 7);
            }
            for (bool idx : {true, false}) {
                for (TriggerMode tm : {TriggerMode::kWords, TriggerMode::kIndices}) {
                    FormatOptions o = opts(tm, idx);
                    o.order = m;
                    const std::string text = serialize(t, sentences, o);
                    CHECK(parse(text, sentences, p, o, true).target == t);
                    ++checked;
                }
            }
        }
    }
    CHECK(checked == 400 * 16);
}

TEST_CASE("serialization is injective on distinct targets") {
    Rng rng(8);
    const EffectPool& p = pool();
    const std::vector<Sentence> sentences = {vcomp::testing::random_sentence(rng, 4, 6),
                                             vcomp::testing::random_sentence(rng, 4, 6)};
    for (int trial = 0; trial < 300; ++trial) {
        const auto a = canonicalize_spans(vcomp::testing::random_target(rng, sentences, p, 2), sentences);
        const auto b = canonicalize_spans(vcomp::testing::random_target(rng, sentences, p, 2), sentences);
        if (a == b) continue;
        CHECK(serialize(a, sentences, {}) != serialize(b, sentences, {}));
    }
}

TEST_CASE("mode names") {
    for (OrderMode m : {OrderMode::kRandom, OrderMode::kString, OrderMode::kCategory, OrderMode::kTime}) {
        CHECK(parse_order_mode(order_mode_name(m)) == m);
    }
    for (TriggerMode m : {TriggerMode::kWords, TriggerMode::kIndices}) CHECK(parse_trigger_mode(trigger_mode_name(m)) == m);
    CHECK_FALSE(parse_order_mode("sideways"));
}
