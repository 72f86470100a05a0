#include "doctest.h"

#include "test_support.hpp"
#include "vcomp/evaluation.hpp"

#include <cmath>

using namespace vcomp;
using vcomp::testing::code_of;

namespace {

WordElement we(std::size_t seg, std::size_t a, std::size_t b, EffectCategory c = EffectCategory::kTextEffect,
               std::string name = "te0000") {
    return {seg, a, b, c, std::move(name)};
}

CompositionTarget target_of(std::size_t S, const std::vector<std::pair<std::size_t, EffectElement>>& elems) {
    CompositionTarget t = CompositionTarget::empty(S);
    for (const auto& [i, e] : elems) t.segments[i].elements.push_back(e);
    return t;
}

EffectElement span(std::size_t a, std::size_t b, EffectCategory c = EffectCategory::kTextEffect, std::string n = "te0000") {
    return {TriggerPosition::span(a, b), c, std::move(n)};
}
EffectElement whole(EffectCategory c, std::string n) { return {TriggerPosition::whole(), c, std::move(n)}; }

}  // namespace

TEST_CASE("dice") {
    CHECK(dice({4, 5}, {4, 5}) == 1.0);
    CHECK(dice({4, 5}, {4}) == doctest::Approx(2.0 / 3.0));
    CHECK(dice({0}, {5}) == 0.0);
    CHECK(dice({}, {}) == 1.0);
    CHECK(dice({1, 2, 3}, {2, 3, 4, 5}) == dice({2, 3, 4, 5}, {1, 2, 3}));
    CHECK(span_dice(3, 4, 4, 4) == doctest::Approx(2.0 / 3.0));
    Rng rng(1);
    for (int t = 0; t < 500; ++t) {
        const std::size_t a = rng.below(8), b = a + rng.below(4), c = rng.below(8), d = c + rng.below(4);
        const WordElement x = we(0, a, b), y = we(0, c, d);
        CHECK(span_dice(a, b, c, d) == doctest::Approx(dice(x.tokens(), y.tokens())));
        CHECK(span_dice(a, b, c, d) == span_dice(c, d, a, b));
    }
}

TEST_CASE("alignment examples") {
    const std::vector<WordElement> g = {we(0, 0, 1)};
    const std::vector<WordElement> p = {we(0, 0, 0), we(0, 5, 6)};
    const Alignment a = align_word_elements(g, p);
    REQUIRE(a.pairs.size() == 1);
    CHECK(a.pairs[0] == std::pair<std::size_t, std::size_t>{0, 0});
    CHECK(a.unmatched_pred == std::vector<std::size_t>{1});
    CHECK(align_word_elements(g, p, AlignMode::kGreedy).pairs == a.pairs);

    const Alignment same = align_word_elements(p, p);
    CHECK(same.pairs.size() == 2);
    CHECK(same.unmatched_gt.empty());

    const Alignment none = align_word_elements({we(0, 0, 0)}, {we(0, 3, 3), we(1, 0, 0)});
    CHECK(none.pairs.empty());
    CHECK(none.unmatched_gt.size() == 1);
    CHECK(none.unmatched_pred.size() == 2);
}

TEST_CASE("greedy alignment is not always optimal") {
    // gt {0,1},{1}; pred {0,1},{0}
    const std::vector<WordElement> g = {we(0, 0, 1), we(0, 1, 1)};
    const std::vector<WordElement> p = {we(0, 0, 1), we(0, 0, 0)};
    CHECK(word_accuracy(g, p, AlignMode::kGreedy) == doctest::Approx(1.0 / 3.0));
    CHECK(word_accuracy(g, p, AlignMode::kOptimal) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("word accuracy") {
    const std::vector<WordElement> g = {we(0, 1, 2), we(1, 0, 0)};
    CHECK(word_accuracy(g, g) == 1.0);
    CHECK(word_accuracy({}, {}) == 1.0);
    CHECK(word_accuracy(g, {}) == 0.0);
    CHECK(word_accuracy({}, g) == 0.0);
    // Dice 0.8: {0..3} vs {0..5}? 2*4/(4+6)=0.8
    CHECK(word_accuracy({we(0, 0, 3)}, {we(0, 0, 5)}) == doctest::Approx(0.8));
    // a spurious prediction never raises the score
    Rng rng(3);
    for (int t = 0; t < 300; ++t) {
        std::vector<WordElement> gt, pred;
        for (std::uint64_t k = 0, n = 1 + rng.below(4); k < n; ++k) {
            const std::size_t a = rng.below(6);
            gt.push_back(we(rng.below(2), a, a + rng.below(3)));
        }
        for (std::uint64_t k = 0, n = rng.below(4); k < n; ++k) {
            const std::size_t a = rng.below(6);
            pred.push_back(we(rng.below(2), a, a + rng.below(3)));
        }
        const double before = word_accuracy(gt, pred);
        // spurious: overlaps no ground-truth element
        const std::size_t a = rng.below(6);
        pred.push_back(we(5, a, a + rng.below(3)));
        CHECK(word_accuracy(gt, pred) <= before + 1e-12);
        CHECK(before >= 0.0);
        CHECK(before <= 1.0);
    }
}

TEST_CASE("optimal alignment equals the exact exhaustive oracle") {
    Rng rng(11);
    std::size_t greedy_differs = 0;
    for (int t = 0; t < 1000; ++t) {
        std::vector<WordElement> gt, pred;
        std::vector<vcomp::testing::Span> gs, ps;
        for (std::uint64_t k = 0, n = rng.below(5); k < n; ++k) {
            const std::size_t a = rng.below(8), b = a + rng.below(3);
            gt.push_back(we(0, a, b));
            gs.push_back({a, b});
        }
        for (std::uint64_t k = 0, n = rng.below(5); k < n; ++k) {
            const std::size_t a = rng.below(8), b = a + rng.below(3);
            pred.push_back(we(0, a, b));
            ps.push_back({a, b});
        }
        const double oracle = vcomp::testing::exhaustive_word_accuracy(gs, ps).value();
        CHECK(word_accuracy(gt, pred, AlignMode::kOptimal) == doctest::Approx(oracle).epsilon(1e-12));
        if (std::abs(word_accuracy(gt, pred, AlignMode::kGreedy) - oracle) > 1e-12) ++greedy_differs;
    }
    MESSAGE("greedy differs from the exhaustive oracle on " << greedy_differs << " / 1000 cases");
}

TEST_CASE("elem@word") {
    const std::vector<WordElement> g = {we(0, 0, 3)};
    CHECK(elem_at_word(g, {we(0, 0, 5)}, align_word_elements(g, {we(0, 0, 5)})) == 1.0);   // Dice 0.8
    const std::vector<WordElement> far = {we(0, 3, 8)};                                      // Dice 2/10
    CHECK(elem_at_word(g, far, align_word_elements(g, far)) == 0.0);
    const std::vector<WordElement> p04 = {we(0, 3, 6)};  // {0..3} vs {3..6}: 2/8 = 0.25
    CHECK(elem_at_word(g, p04, align_word_elements(g, p04)) == 0.0);
    const std::vector<WordElement> cat = {we(0, 0, 3, EffectCategory::kTextAnimation)};
    CHECK(elem_at_word(g, cat, align_word_elements(g, cat)) == 0.0);
    const std::vector<WordElement> other_name = {we(0, 0, 3, EffectCategory::kTextEffect, "te0009")};
    const Alignment a = align_word_elements(g, other_name);
    CHECK(elem_at_word(g, other_name, a) == 1.0);
    CHECK(elem_at_word(g, other_name, a, true) == 0.0);
    CHECK(elem_at_word({}, other_name, align_word_elements({}, other_name)) == 1.0);
    // Dice exactly 0.5 counts: {0,1,2} vs {2}? 2/4 = 0.5
    const std::vector<WordElement> g3 = {we(0, 0, 2)};
    const std::vector<WordElement> half = {we(0, 2, 2)};
    CHECK(span_dice(0, 2, 2, 2) == 0.5);
    CHECK(elem_at_word(g3, half, align_word_elements(g3, half)) == 1.0);
}

TEST_CASE("elem@sentence") {
    const SentenceHolder ab{0, {"sound-effect:a", "image-sticker:b"}};
    const SentenceHolder a{0, {"sound-effect:a"}};
    const SentenceHolder b{0, {"image-sticker:b"}};
    CHECK(elem_at_sentence({ab}, {ab}) == 1.0);
    CHECK(elem_at_sentence({ab}, {a}) == 0.5);
    CHECK(elem_at_sentence({a}, {b}) == 0.0);
    CHECK(elem_at_sentence({}, {a}) == 1.0);
    CHECK(elem_at_sentence({a}, {}) == 0.0);
    // a prediction in another segment does not help
    CHECK(elem_at_sentence({a}, {SentenceHolder{1, {"sound-effect:a"}}}) == 0.0);
}

TEST_CASE("split and merge are lossless") {
    Rng rng(4);
    const EffectPool pool = vcomp::testing::small_pool();
    for (int t = 0; t < 200; ++t) {
        std::vector<Sentence> sentences;
        for (int i = 0; i < 4; ++i) sentences.push_back(vcomp::testing::random_sentence(rng));
        const CompositionTarget target = vcomp::testing::random_target(rng, sentences, pool);
        const CompositionTarget back = merge_target(split_target(target), sentences.size());
        CHECK(split_target(back).words == split_target(target).words);
        CHECK(split_target(back).holders == split_target(target).holders);
        for (std::size_t i = 0; i < target.segments.size(); ++i) {
            CHECK(back.segments[i].elements.size() == target.segments[i].elements.size());
        }
    }
}

TEST_CASE("identity scores and metric ranges") {
    Rng rng(5);
    const EffectPool pool = vcomp::testing::small_pool();
    std::vector<CompositionTarget> gts, empties;
    for (int t = 0; t < 100; ++t) {
        std::vector<Sentence> sentences;
        for (int i = 0; i < 3; ++i) sentences.push_back(vcomp::testing::random_sentence(rng));
        CompositionTarget tg = vcomp::testing::random_target(rng, sentences, pool);
        const auto s = evaluate_sample(tg, tg);
        CHECK(s.word_accuracy == 1.0);
        CHECK(s.elem_at_word == 1.0);
        CHECK(s.elem_at_sentence == 1.0);
        const auto other = vcomp::testing::random_target(rng, sentences, pool);
        const auto m = evaluate_sample(tg, other);
        for (double v : {m.word_accuracy, m.elem_at_word, m.elem_at_sentence}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        gts.push_back(tg);
        empties.push_back(CompositionTarget::empty(3));
    }
    const auto same = evaluate_corpus(gts, gts);
    CHECK(same.overall == doctest::Approx(300.0));
    CHECK(code_of([&] { (void)evaluate_corpus(gts, {}); }) == ErrorCode::kValidation);
}

TEST_CASE("empty predictions against non-empty truth score zero") {
    const auto gt = target_of(2, {{0, span(0, 1)}, {1, whole(EffectCategory::kSoundEffect, "se0001")}});
    const auto r = evaluate_corpus({gt, gt}, {CompositionTarget::empty(2), CompositionTarget::empty(2)});
    CHECK(r.word_accuracy == 0.0);
    CHECK(r.elem_at_word == 0.0);
    CHECK(r.elem_at_sentence == 0.0);
    CHECK(r.overall == 0.0);
}

TEST_CASE("degenerate denominators are flagged") {
    const auto gt = target_of(2, {{0, span(0, 1)}});
    const auto r = evaluate_corpus({gt}, {gt});
    CHECK(r.degenerate_sentence == 1);
    CHECK(r.degenerate_word == 0);
    CHECK(r.elem_at_sentence == 1.0);
}

TEST_CASE("macro versus micro aggregation") {
    const auto g1 = target_of(1, {{0, span(0, 0)}});
    const auto p1 = target_of(1, {{0, span(0, 0)}});
    const auto g2 = target_of(1, {{0, span(0, 0)}, {0, span(2, 2)}, {0, span(4, 4)}});
    const auto p2 = CompositionTarget::empty(1);
    const auto macro = evaluate_corpus({g1, g2}, {p1, p2});
    CHECK(macro.word_accuracy == doctest::Approx(0.5));
    EvalOptions micro;
    micro.micro = true;
    const auto mi = evaluate_corpus({g1, g2}, {p1, p2}, micro);
    CHECK(mi.word_accuracy == doctest::Approx(0.25));
    CHECK(mi.elem_at_word == doctest::Approx(0.25));
}

TEST_CASE("overall score aggregation") {
    CHECK(std::abs(overall_score(0.3788, 0.6825, 0.3190) - 138.03) < 1e-9);
    CHECK(std::abs(overall_score(0.3446, 0.6908, 0.3052) - 134.06) < 1e-9);
    CHECK(std::abs(overall_score(0.3205, 0.6531, 0.285) - 125.86) < 1e-9);
}

TEST_CASE("report_sem") {
    const auto a = report_sem({1, 1, 1});
    CHECK(a.mean == 1.0);
    CHECK(a.sem == 0.0);
    const auto b = report_sem({0, 2});
    CHECK(b.mean == 1.0);
    CHECK(b.sem == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(code_of([] { (void)report_sem({3}); }) == ErrorCode::kInvalidArgument);
    CHECK(code_of([] { (void)report_sem({}); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("lenient text evaluation and report json") {
    Sample s;
    s.sample_id = "s0";
    for (std::size_t i = 0; i < 2; ++i) {
        SegmentRecord seg;
        seg.index = i;
        seg.sentence = "this pack of glass wipes is great";
        s.segments.push_back(seg);
    }
    s.target = target_of(2, {{0, span(3, 4, EffectCategory::kTextEffect, "te0001")},
                             {1, whole(EffectCategory::kSoundEffect, "se0002")}});
    const EffectPool pool = vcomp::testing::small_pool();
    const std::string exact = serialize(s.target, s.sentences(), {});
    const auto r = evaluate_texts({s}, {exact}, pool, {});
    CHECK(r.overall == doctest::Approx(300.0));

    const auto junk = evaluate_texts({s}, {"[0] (glass)->text-effect:nope\n[1] (<whole sentence>)->sound-effect:se0002"},
                                     pool, {});
    CHECK(junk.diagnostics.unknown_effect == 1);
    CHECK(junk.elem_at_sentence == 1.0);
    CHECK(junk.word_accuracy == 0.0);

    const auto back = report_from_json(report_to_json(junk));
    CHECK(back.overall == junk.overall);
    CHECK(back.diagnostics == junk.diagnostics);
    CHECK(back.per_sample.size() == 1);
    CHECK(back.per_sample[0].sample_id == "s0");

    const auto combined = combine_runs({r, junk});
    CHECK(combined.runs == 2);
    CHECK(combined.sem.at("overall").mean == doctest::Approx((r.overall + junk.overall) / 2));
    CHECK(format_sem_lines(combined).find("overall: ") != std::string::npos);
    const std::string csv = reports_to_csv({{"ours", r}});
    CHECK(csv == "method,word_accuracy,elem_at_word,elem_at_sentence,overall\nours,100.00,100.00,100.00,300.00\n");
}

TEST_CASE("measure_behavior") {
    const auto empty = measure_behavior({CompositionTarget::empty(3)});
    CHECK(empty.mean_trigger_ratio() == 0.0);
    CHECK(empty.trigger_ratio_histogram[0] == 1);
    const auto full = measure_behavior({target_of(2, {{0, span(0, 0)}, {1, span(1, 1)}})});
    CHECK(full.mean_trigger_ratio() == 1.0);
    CHECK(full.trigger_ratio_histogram[9] == 1);
}
