#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "personaforge/annotation.hpp"
#include "personaforge/io.hpp"
#include "test_util.hpp"

using namespace personaforge;
using namespace personaforge::annotation;

namespace {

AnnotationScore n(int v) { return AnnotationScore::numeric(v); }
const AnnotationScore kNd = AnnotationScore::non_distinguishable();

AnnotationRecord rec(std::string text, std::string who, Trait trait, AnnotationScore score) {
    return AnnotationRecord{std::move(text), std::move(who), trait, score, {"Implicit signs"}, {}};
}

GeneratedText text(std::string id, std::string body, std::string model = "m", std::string temp = "0") {
    GeneratedText t;
    t.id = std::move(id);
    t.model = std::move(model);
    t.temperature = Temperature::parse(temp);
    t.text = std::move(body);
    return t;
}

} // namespace

TEST_SUITE("annotation") {

TEST_CASE("validation reports each problem kind") {
    std::vector<GeneratedText> texts{text("t1", "I love [MASKED] art.")};
    auto a = rec("t1", "a1", Trait::Openness, n(2));
    a.spans = {{{0, 6}, "I love"}};
    auto b = rec("t1", "a2", Trait::Openness, n(1));
    b.spans = {{{2, 40}, "x"}};
    auto c = rec("t1", "a2", Trait::Openness, n(1));
    c.spans = {{{0, 6}, "I hate"}};
    c.reasons = {"Gut feeling"};
    auto d = rec("t9", "a1", Trait::Openness, n(0));

    ValidationOptions opts;
    opts.reasons = std::set<std::string, std::less<>>{"Explicit signs", "Implicit signs", "Intuition",
                                                      "Nondistinguishable"};
    auto report = validate_annotations({a, b, c, d}, texts, opts);
    std::multiset<ViolationKind> kinds;
    for (const auto& v : report.violations) kinds.insert(v.kind);
    CHECK(kinds.count(ViolationKind::SpanOutOfBounds) == 1);
    CHECK(kinds.count(ViolationKind::SpanMismatch) == 1);
    CHECK(kinds.count(ViolationKind::UnknownReason) == 1);
    CHECK(kinds.count(ViolationKind::UnknownText) == 1);
    CHECK(kinds.count(ViolationKind::DuplicateAnnotator) == 1);
    // t1 has three records (one duplicate), t9 only one
    CHECK(kinds.count(ViolationKind::MissingRater) == 1);
    CHECK_FALSE(report.ok());

    auto clean = validate_annotations({a, rec("t1", "a2", Trait::Openness, n(1)), rec("t1", "a3", Trait::Openness, kNd)},
                                      texts, opts);
    CHECK(clean.ok());
    CHECK(to_string(ViolationKind::SpanMismatch) == "SpanMismatch");
}

TEST_CASE("final scores use the vote and the numeric mean") {
    std::vector<AnnotationRecord> rs{rec("t2", "c", Trait::Neuroticism, n(-1)), rec("t2", "a", Trait::Neuroticism, n(-2)),
                                     rec("t2", "b", Trait::Neuroticism, kNd),    rec("t1", "x", Trait::Openness, kNd),
                                     rec("t1", "y", Trait::Openness, kNd),       rec("t1", "z", Trait::Openness, kNd)};
    auto f = aggregate_final_scores(rs);
    REQUIRE(f.size() == 2);
    CHECK(f[0].text_id == "t1");
    CHECK(f[0].score.is_nd());
    CHECK_FALSE(f[0].mean.has_value());
    CHECK(f[1].score == n(-1));
    CHECK(*f[1].mean == doctest::Approx(-1.5));
    CHECK(f[1].rater_scores == std::vector<AnnotationScore>{n(-2), kNd, n(-1)});
    CHECK(final_score_from_json(to_json(f[1])) == f[1]);

    testing::TempDir dir;
    io::write_file(dir / "final.jsonl", io::to_jsonl({to_json(f[0]), to_json(f[1])}));
    CHECK(load_final_scores(dir / "final.jsonl") == f);
}

TEST_CASE("kappa per trait against the pair-counting oracle") {
    // categories at level 2: Low 0, Mid 1, High 2, ND 3
    std::vector<std::vector<std::optional<int>>> ratings{{1, 2, 2}, {-1, -2, std::nullopt}, {0, 0, 0}, {std::nullopt, std::nullopt, 1}};
    std::vector<AnnotationRecord> rs;
    std::vector<std::vector<int>> level1, level2;
    for (std::size_t s = 0; s < ratings.size(); ++s) {
        std::vector<int> r1, r2;
        for (std::size_t r = 0; r < 3; ++r) {
            auto score = ratings[s][r] ? n(*ratings[s][r]) : kNd;
            rs.push_back(rec("t" + std::to_string(s), "a" + std::to_string(r), Trait::Agreeableness, score));
            r1.push_back(ratings[s][r] ? 0 : 1);
            r2.push_back(static_cast<int>(metrics::score_to_group(score)));
        }
        level1.push_back(r1);
        level2.push_back(r2);
    }
    auto k1 = interannotator_kappa(rs, KappaLevel::Presence);
    auto k2 = interannotator_kappa(rs, KappaLevel::Group);
    REQUIRE(k1.at(Trait::Agreeableness).has_value());
    CHECK(*k1.at(Trait::Agreeableness) == doctest::Approx(oracle::fleiss_kappa(level1, 2)).epsilon(1e-12));
    CHECK(*k2.at(Trait::Agreeableness) == doctest::Approx(oracle::fleiss_kappa(level2, 4)).epsilon(1e-12));

    std::vector<AnnotationRecord> same{rec("t", "a", Trait::Openness, n(1)), rec("t", "b", Trait::Openness, n(2)),
                                       rec("t", "c", Trait::Openness, n(1))};
    CHECK_FALSE(interannotator_kappa(same, KappaLevel::Presence).at(Trait::Openness).has_value());
}

TEST_CASE("batch sampling is seeded, stratified and rotates annotators") {
    std::vector<GeneratedText> texts;
    for (const char* model : {"m1", "m2"}) {
        for (const char* temp : {"0", "0.9"}) {
            for (int i = 0; i < 30; ++i) texts.push_back(text(fmt::format("{}-{}-{:02}", model, temp, i), "x", model, temp));
        }
    }
    BatchPlan plan{40, 12, 3, 5};
    std::vector<std::string> people{"p1", "p2", "p3", "p4"};
    auto batches = sample_batches(texts, people, plan);
    REQUIRE(batches.size() == 4);
    CHECK(batches[0].id == "batch-001");
    CHECK(batches[3].text_ids.size() == 4);
    std::map<std::string, int> per_stratum;
    std::set<std::string> all;
    for (const auto& b : batches) {
        CHECK(std::set<std::string>(b.annotators.begin(), b.annotators.end()).size() == 3);
        for (const auto& id : b.text_ids) {
            all.insert(id);
            per_stratum[id.substr(0, id.rfind('-'))] += 1;
        }
    }
    CHECK(all.size() == 40);
    for (const auto& [k, v] : per_stratum) CHECK(v == 10);
    CHECK(batches[0].annotators == std::vector<std::string>{"p1", "p2", "p3"});
    CHECK(batches[1].annotators == std::vector<std::string>{"p4", "p1", "p2"});

    auto again = sample_batches(texts, people, plan);
    CHECK(again[2].text_ids == batches[2].text_ids);
    plan.seed = 6;
    CHECK(sample_batches(texts, people, plan)[0].text_ids != batches[0].text_ids);
    CHECK_THROWS_AS(sample_batches(texts, {"p1", "p2"}, plan), ValueError);
}

TEST_CASE("annotation files load") {
    testing::TempDir dir;
    auto r = rec("t1", "a1", Trait::Openness, n(1));
    io::write_file(dir / "ann.jsonl", io::to_jsonl({to_json(r)}));
    auto loaded = load_annotations(dir / "ann.jsonl");
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0] == r);
}

}
