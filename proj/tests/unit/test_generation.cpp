#include <doctest.h>

#include <cmath>
#include <random>

#include "personaforge/generation.hpp"
#include "test_util.hpp"

using namespace personaforge;
using namespace personaforge::generation;

namespace {

TraitDefinitions two_definitions() {
    TraitDefinitions d;
    d.set(Trait::Openness, {"Openness is curiosity.", "Low means routine.", "High means curious."});
    d.set(Trait::Neuroticism, {"Neuroticism is worry.", "Low means calm.", "High means anxious."});
    return d;
}

} // namespace

TEST_SUITE("generation") {

TEST_CASE("bundled question bank and definitions load") {
    auto qs = load_questions(testing::data_dir() / "questions.json");
    CHECK(qs.size() == 10);
    auto defs = TraitDefinitions::load(testing::data_dir() / "definitions.json");
    for (auto t : kAllTraits) CHECK(defs.find(t) != nullptr);
    CHECK(defs.all_texts().size() == 15);
    CHECK_THROWS_AS(questions_from_json(Json::parse(R"([{"id":"a","text":"x"},{"id":"a","text":"y"}])")),
                    ValueError);
}

TEST_CASE("single-trait prompt") {
    auto req = build_generation_prompt(PersonalityProfile::single(Trait::Neuroticism, PromptScore{2}),
                                       {"q1", "Why?"}, two_definitions(), "m", Temperature::parse("0.7"));
    CHECK(req.system_prompt.find("- Your personality trait Neuroticism is rated as 2.\n") != std::string::npos);
    CHECK(req.system_prompt.find("- Low means calm.\n- High means anxious.") != std::string::npos);
    CHECK(req.system_prompt.find("Openness") == std::string::npos);
    CHECK(req.user_prompt == "QUESTION:\n```\nWhy?\n```");
    CHECK(req.temperature.text() == "0.7");
}

TEST_CASE("full-profile prompt lists traits in fixed order") {
    TraitDefinitions d;
    for (auto t : kAllTraits) {
        d.set(t, {std::string(trait_key(t)) + " def", std::string(trait_key(t)) + " low",
                  std::string(trait_key(t)) + " high"});
    }
    auto p = PersonalityProfile::full({PromptScore{5}, PromptScore{4}, PromptScore{3}, PromptScore{2}, PromptScore{1}});
    auto req = build_generation_prompt(p, {"q", "Q"}, d, "m", Temperature::parse("0"));
    auto o = req.system_prompt.find("Openness is rated as 5");
    auto c = req.system_prompt.find("Conscientiousness is rated as 4");
    auto n = req.system_prompt.find("Neuroticism is rated as 1");
    CHECK(o < c);
    CHECK(c < n);
    CHECK(n != std::string::npos);
    CHECK(req.system_prompt.find("- neuroticism low\n- neuroticism high") != std::string::npos);
    CHECK_THROWS_AS(build_generation_prompt(p, {"q", "Q"}, two_definitions(), "m", Temperature::parse("0")),
                    TemplateError);
}

TEST_CASE("grid ids and nesting order") {
    std::vector<Question> qs{{"q1", "A"}, {"q2", "B"}};
    auto jobs = single_trait_grid({Trait::Openness, Trait::Agreeableness}, {1, 5},
                                  {Temperature::parse("0"), Temperature::parse("0.9")}, qs);
    REQUIRE(jobs.size() == 16);
    CHECK(jobs[0].id == "openness-s1-t0-q1");
    CHECK(jobs[1].id == "openness-s1-t0-q2");
    CHECK(jobs[2].id == "openness-s1-t0.9-q1");
    CHECK(jobs[4].id == "openness-s5-t0-q1");
    CHECK(jobs[15].id == "agreeableness-s5-t0.9-q2");
    CHECK_THROWS_AS(single_trait_grid({Trait::Openness}, {1}, {Temperature::parse("0")}, {}), ValueError);
    CHECK_THROWS_AS(single_trait_grid({Trait::Openness}, {7}, {Temperature::parse("0")}, qs), ValueError);
}

TEST_CASE("discretisation rounds and clamps") {
    CHECK(discretize_score(-3.0).value() == 1);
    CHECK(discretize_score(1.49).value() == 1);
    CHECK(discretize_score(1.5).value() == 2);
    CHECK(discretize_score(3.2).value() == 3);
    CHECK(discretize_score(4.7).value() == 5);
    CHECK(discretize_score(12.0).value() == 5);
    CHECK(discretize_score(std::nan("")).value() == 1);
}

TEST_CASE("normal sampler is seeded and roughly standard") {
    NormalSampler a(42), b(42), c(43);
    std::vector<double> xs;
    bool differs = false;
    for (int i = 0; i < 20000; ++i) {
        double x = a.next();
        CHECK(x == b.next());
        differs = differs || x != c.next();
        xs.push_back(x);
    }
    CHECK(differs);
    double mean = 0, var = 0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    CHECK(std::fabs(mean) < 0.03);
    CHECK(std::fabs(var - 1.0) < 0.05);
}

TEST_CASE("profile sampling") {
    SamplerConfig cfg;
    cfg.seed = 9;
    cfg.count = 50;
    cfg.variance = {0.0, 0.0, 4.0, 4.0, 4.0};
    cfg.mean = {2.0, 5.0, 3.0, 3.0, 3.0};
    auto ps = sample_profiles(cfg);
    REQUIRE(ps.size() == 50);
    for (const auto& p : ps) {
        CHECK(p.kind() == PersonalityProfile::Kind::FullProfile);
        CHECK(p.score(Trait::Openness)->value() == 2);
        CHECK(p.score(Trait::Conscientiousness)->value() == 5);
    }
    CHECK(sample_profiles(cfg) == ps);
    cfg.count = 0;
    CHECK_THROWS_AS(sample_profiles(cfg), ValueError);
    cfg.count = 1;
    cfg.variance[0] = -1;
    CHECK_THROWS_AS(sample_profiles(cfg), ValueError);

    auto jobs = full_profile_jobs({ps[0], ps[1]}, {Temperature::parse("0.5")}, {{"q1", "A"}});
    REQUIRE(jobs.size() == 2);
    CHECK(jobs[1].id == "full0001-t0.5-q1");
}

TEST_CASE("generation keeps job order and reports failures") {
    std::vector<Question> qs{{"q1", "A"}, {"q2", "B"}};
    auto jobs = single_trait_grid({Trait::Openness, Trait::Neuroticism}, {3}, {Temperature::parse("0")}, qs);
    MockProvider mock([](const ChatRequest& r) -> std::string {
        if (r.user_prompt.find("B") != std::string::npos && r.system_prompt.find("Neuroticism") != std::string::npos) {
            throw TransportError("down");
        }
        return "text for " + r.user_prompt.substr(14, 1);
    });
    auto res = generate_texts(mock, jobs, two_definitions(), "m", 3);
    REQUIRE(res.texts.size() == 3);
    REQUIRE(res.failures.size() == 1);
    CHECK(res.failures[0].job_id == "m:neuroticism-s3-t0-q2");
    CHECK(res.texts[0].id == "m:openness-s3-t0-q1");
    CHECK(res.texts[1].text == "text for B");
    CHECK(res.texts[2].profile.single_trait() == Trait::Neuroticism);
    CHECK(res.texts[2].question == "A");
}

TEST_CASE("leakage detection respects word boundaries") {
    auto m = detect_trait_leakage("My Openness to experience is high; I value openness.");
    REQUIRE(m.size() == 2);
    CHECK(m[0].term == "Openness to experience");
    CHECK(m[0].range == CharRange{3, 25});
    CHECK(m[1].term == "openness");
    CHECK(detect_trait_leakage("Scores of scoreboards").empty());
    CHECK(detect_trait_leakage("I would be rated as a 4").size() == 1);
    LeakageDetector custom({"Big Five", "five"});
    auto c = custom.detect("the big five and five");
    REQUIRE(c.size() == 2);
    CHECK(c[0].term == "big five");
    CHECK(c[1].range == CharRange{17, 21});
}

TEST_CASE("masking replaces spans and unmask inverts it") {
    auto m = mask_leakage("abc def ghi", {{8, 11}, {0, 3}});
    CHECK(m.text == "[MASKED] def [MASKED]");
    CHECK(m.edited);
    CHECK(m.originals == std::vector<std::string>{"abc", "ghi"});
    CHECK(m.masked_ranges[1] == CharRange{13, 21});
    CHECK(unmask(m) == "abc def ghi");
    CHECK_THROWS_AS(mask_leakage("abc", {{1, 5}}), RangeError);
    CHECK_THROWS_AS(mask_leakage("abcdef", {{0, 3}, {2, 4}}), RangeError);
    CHECK_THROWS_AS(mask_leakage("abc", {{1, 1}}), RangeError);
    CHECK_FALSE(mask_leakage("abc", {}).edited);
}

TEST_CASE("mask then unmask is the identity on random spans") {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 300; ++trial) {
        std::string text;
        auto len = rng() % 40 + 1;
        for (unsigned i = 0; i < len; ++i) text.push_back(static_cast<char>('a' + rng() % 26));
        std::vector<CharRange> spans;
        std::size_t pos = 0;
        while (pos < text.size()) {
            auto begin = pos + rng() % 4;
            auto end = begin + 1 + rng() % 3;
            if (end > text.size()) break;
            if (rng() % 2) spans.push_back({begin, end});
            pos = end;
        }
        auto m = mask_leakage(text, spans);
        CHECK(unmask(m) == text);
        CHECK(m.masked_ranges.size() == spans.size());
        for (const auto& r : m.masked_ranges) CHECK(m.text.substr(r.begin, r.size()) == kMaskToken);
    }
}

TEST_CASE("apply_leakage_masking keeps the original") {
    GeneratedText t;
    t.text = "My neuroticism score is low.";
    apply_leakage_masking(t, LeakageDetector::with_default_lexicon());
    CHECK(t.text == "My [MASKED] [MASKED] is low.");
    CHECK(t.edited);
    CHECK(t.original_text == std::optional<std::string>("My neuroticism score is low."));
    CHECK(t.masked_spans == std::vector<CharRange>{{3, 14}, {15, 20}});
    // running twice is stable
    apply_leakage_masking(t, LeakageDetector::with_default_lexicon());
    CHECK(t.text == "My [MASKED] [MASKED] is low.");

    GeneratedText clean;
    clean.text = "I like walks.";
    apply_leakage_masking(clean, LeakageDetector::with_default_lexicon());
    CHECK_FALSE(clean.edited);
    CHECK_FALSE(clean.original_text.has_value());
}

}
