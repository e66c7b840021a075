#include <doctest.h>

#include "personaforge/questionnaire.hpp"
#include "test_util.hpp"

using namespace personaforge;
using namespace personaforge::questionnaire;

namespace {

Questionnaire small_questionnaire() {
    return Questionnaire({{"i1", "is curious.", Trait::Openness, false},
                          {"i2", "prefers routine.", Trait::Openness, true},
                          {"i3", "is tidy.", Trait::Conscientiousness, false}});
}

TraitPrompts prompts() {
    TraitPrompts p;
    p.set(Trait::Openness, Level::High, "You are very open.");
    p.set(Trait::Openness, Level::Low, "You are not open.");
    return p;
}

} // namespace

TEST_SUITE("questionnaire") {

TEST_CASE("bundled inventory has 44 items") {
    auto q = Questionnaire::load(testing::data_dir() / "bfi44.json");
    CHECK(q.items().size() == 44);
    CHECK(q.items_for(Trait::Openness).size() == 10);
    CHECK(q.items_for(Trait::Conscientiousness).size() == 9);
    CHECK(q.items_for(Trait::Extraversion).size() == 8);
    CHECK(q.items_for(Trait::Agreeableness).size() == 9);
    CHECK(q.items_for(Trait::Neuroticism).size() == 8);
    std::size_t reversed = 0;
    for (const auto& i : q.items()) reversed += i.reverse_keyed ? 1 : 0;
    CHECK(reversed == 16);
}

TEST_CASE("duplicates are rejected") {
    CHECK_THROWS_AS(Questionnaire({{"a", "x", Trait::Openness, false}, {"a", "y", Trait::Openness, false}}),
                    ValueError);
    CHECK_THROWS_AS(Questionnaire({{"a", "x", Trait::Openness, false}, {"b", "x", Trait::Openness, false}}),
                    ValueError);
}

TEST_CASE("likert parsing") {
    const auto& opts = likert_options();
    for (int i = 0; i < 5; ++i) {
        CHECK(parse_likert_response(opts[static_cast<std::size_t>(i)]).ordinal() == i + 1);
    }
    CHECK(parse_likert_response("  Disagree A Little With The Statement. ").ordinal() == 2);
    CHECK(parse_likert_response("'agree strongly with the statement'").ordinal() == 5);
    CHECK(parse_likert_response("I would say: disagree strongly with the statement").ordinal() == 1);
    CHECK_THROWS_AS(parse_likert_response("maybe"), UnparseableResponse);
    CHECK_THROWS_AS(parse_likert_response("agree a little with the statement or agree strongly with the statement"),
                    AmbiguousResponse);
    CHECK(LikertLevel(3).option_text() == "agree nor disagree with the statement");
    CHECK_THROWS_AS(LikertLevel(0), ValueError);
}

TEST_CASE("reverse keying inverts the ordinal") {
    for (int o = 1; o <= 5; ++o) {
        CHECK(score_item(LikertLevel(o), false) == o);
        CHECK(score_item(LikertLevel(o), true) == 6 - o);
    }
}

TEST_CASE("prompt slots") {
    auto q = small_questionnaire();
    PromptOptions opts{"m", Temperature::parse("0.5"), nullptr};
    auto req = build_questionnaire_prompt(Trait::Openness, Level::High, q.items()[0], "You are very open.", opts);
    CHECK(req.model == "m");
    CHECK(req.temperature.text() == "0.5");
    CHECK(req.system_prompt.find("```\nYou are very open.\n```") != std::string::npos);
    CHECK(req.user_prompt == "CHARACTERISTICS:\n```\nis curious.\n```");
    CHECK_THROWS_AS(build_questionnaire_prompt(Trait::Openness, Level::High, q.items()[0], "", opts), TemplateError);
}

TEST_CASE("run scores reverse-keyed items and keeps order") {
    auto q = small_questionnaire();
    MockProvider mock([](const ChatRequest& r) {
        if (r.user_prompt.find("curious") != std::string::npos) return std::string("agree strongly with the statement");
        return std::string("agree a little with the statement");
    });
    RunSpec spec{"m", Trait::Openness, Level::High, Temperature::parse("0"), 3, 4};
    auto records = run_questionnaire(mock, q, prompts(), spec);
    REQUIRE(records.size() == 6);
    CHECK(records[0].item_id == "i1");
    CHECK(records[2].repetition == 2);
    CHECK(records[3].item_id == "i2");
    CHECK(*records[0].item_score == 5);
    CHECK(*records[3].item_score == 2);
    CHECK(aggregate_trait_score(records) == doctest::Approx(3.5));
    CHECK(mock.calls() == 6);

    spec.level = Level::Low;
    spec.trait = Trait::Extraversion;
    CHECK_THROWS_AS(run_questionnaire(mock, q, prompts(), spec), ValueError);
    spec.trait = Trait::Conscientiousness;
    CHECK_THROWS_AS(run_questionnaire(mock, q, prompts(), spec), TemplateError);
}

TEST_CASE("unparseable answers are kept as records") {
    auto q = small_questionnaire();
    MockProvider mock([](const ChatRequest&) { return std::string("no idea"); });
    RunSpec spec{"m", Trait::Openness, Level::Low, Temperature::parse("0"), 1, 1};
    auto records = run_questionnaire(mock, q, prompts(), spec);
    REQUIRE(records.size() == 2);
    CHECK(records[0].error == std::optional<std::string>("unparseable"));
    CHECK_FALSE(records[0].item_score.has_value());
    CHECK_THROWS_AS(aggregate_trait_score(records), EmptyInput);
    CHECK(run_record_from_json(to_json(records[0])).error == records[0].error);
}

TEST_CASE("aggregation refuses mixed records") {
    RunRecord a;
    a.item_score = 3;
    a.likert = LikertLevel(3);
    RunRecord b = a;
    b.level = Level::Low;
    CHECK_THROWS_AS(aggregate_trait_score({a, b}), ValueError);
    CHECK_THROWS_AS(aggregate_trait_score({}), EmptyInput);
}

TEST_CASE("distributions bin per repetition") {
    std::vector<RunRecord> rs;
    auto add = [&](int rep, int score) {
        RunRecord r;
        r.model = "m";
        r.repetition = rep;
        r.likert = LikertLevel(score);
        r.item_score = score;
        rs.push_back(r);
    };
    add(0, 1);
    add(0, 2); // 1.5
    add(1, 5);
    add(1, 5); // 5.0
    add(2, 4);
    add(2, 5); // 4.5
    auto d = score_distributions(rs);
    REQUIRE(d.size() == 1);
    CHECK(d[0].scores == std::vector<double>{1.5, 5.0, 4.5});
    CHECK(d[0].bins[1] == 1);
    CHECK(d[0].bins[7] == 2);
    CHECK(d[0].mean == doctest::Approx(11.0 / 3.0));
}

TEST_CASE("reliability matrix keeps complete runs") {
    auto q = small_questionnaire();
    std::vector<RunRecord> rs;
    auto add = [&](const char* item, int rep, std::optional<int> score) {
        RunRecord r;
        r.model = "m";
        r.item_id = item;
        r.repetition = rep;
        if (score) {
            r.likert = LikertLevel(*score);
            r.item_score = score;
        }
        rs.push_back(r);
    };
    add("i1", 0, 4);
    add("i2", 0, 2);
    add("i1", 1, 5);
    add("i2", 1, std::nullopt);
    add("i1", 2, 1);
    add("i2", 2, 1);
    auto m = reliability_matrix(rs, q, "m", Trait::Openness);
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 2);
    CHECK(m.at(0, 0) == 4);
    CHECK(m.at(1, 1) == 1);
    CHECK(reliability_matrix(rs, q, "other", Trait::Openness).rows() == 0);
}

}
