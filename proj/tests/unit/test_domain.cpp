#include <doctest.h>

#include "personaforge/domain.hpp"
#include "personaforge/io.hpp"
#include "personaforge/templates.hpp"
#include "test_util.hpp"

using namespace personaforge;

TEST_SUITE("domain") {

TEST_CASE("trait names round-trip") {
    for (auto t : kAllTraits) {
        CHECK(parse_trait(trait_key(t)) == t);
        CHECK(parse_trait(trait_display_name(t)) == t);
    }
    CHECK(parse_trait("NEUROTICISM") == Trait::Neuroticism);
    CHECK_THROWS_AS(parse_trait("honesty"), ValueError);
}

TEST_CASE("score ranges are enforced") {
    for (int v = 1; v <= 5; ++v) CHECK(PromptScore(v).value() == v);
    CHECK_THROWS_AS(PromptScore(0), ValueError);
    CHECK_THROWS_AS(PromptScore(6), ValueError);
    for (int v = -2; v <= 2; ++v) CHECK(AnnotationScore::numeric(v).value() == v);
    CHECK_THROWS_AS(AnnotationScore::numeric(3), ValueError);
    CHECK_THROWS_AS(AnnotationScore::non_distinguishable().value(), ValueError);
    CHECK(AnnotationScore::non_distinguishable().is_nd());
}

TEST_CASE("temperatures are canonical decimals") {
    CHECK(Temperature::parse("0.50").text() == "0.5");
    CHECK(Temperature::parse("00").text() == "0");
    CHECK(Temperature::parse("1.0").text() == "1");
    CHECK(Temperature::from_value(0.7).text() == "0.7");
    CHECK(Temperature::parse("0.9").value() == doctest::Approx(0.9));
    CHECK_THROWS_AS(Temperature::parse("1.5"), ValueError);
    CHECK_THROWS_AS(Temperature::parse("-0.1"), ValueError);
    CHECK_THROWS_AS(Temperature::parse(".5"), ValueError);
    CHECK_THROWS_AS(Temperature::parse("1e-1"), ValueError);
    auto paper = paper_temperatures();
    REQUIRE(paper.size() == 4);
    CHECK(paper[0].text() == "0");
    CHECK(paper[3].text() == "0.9");
}

TEST_CASE("profiles") {
    auto s = PersonalityProfile::single(Trait::Agreeableness, PromptScore{2});
    CHECK(s.single_trait() == Trait::Agreeableness);
    CHECK(s.score(Trait::Openness) == std::nullopt);
    auto f = PersonalityProfile::full({PromptScore{1}, PromptScore{2}, PromptScore{3}, PromptScore{4}, PromptScore{5}});
    CHECK(f.scores().size() == 5);
    CHECK(f.score(Trait::Neuroticism)->value() == 5);
    CHECK_THROWS_AS(f.single_trait(), ValueError);
    CHECK(profile_from_json(to_json(f)) == f);
    CHECK(profile_from_json(to_json(s)) == s);
}

TEST_CASE("decision types parse loosely") {
    CHECK(parse_decision_type("Explicit signs") == DecisionType::ExplicitSigns);
    CHECK(parse_decision_type("implicit_signs") == DecisionType::ImplicitSigns);
    CHECK(parse_decision_type("INTUITION") == DecisionType::Intuition);
    CHECK(parse_decision_type("Non-distinguishable") == DecisionType::NonDistinguishable);
    CHECK_THROWS_AS(parse_decision_type("guess"), ValueError);
}

TEST_CASE("classifier output enforces the ND pairing") {
    CHECK_NOTHROW(ClassifierOutput("t", Trait::Openness, AnnotationScore::non_distinguishable(), {}, "r",
                                   DecisionType::NonDistinguishable));
    CHECK_THROWS_AS(ClassifierOutput("t", Trait::Openness, AnnotationScore::numeric(1), {}, "r",
                                     DecisionType::NonDistinguishable),
                    SchemaViolation);
    CHECK_THROWS_AS(ClassifierOutput("t", Trait::Openness, AnnotationScore::non_distinguishable(), {}, "r",
                                     DecisionType::Intuition),
                    SchemaViolation);
}

TEST_CASE("record codecs round-trip") {
    GeneratedText t;
    t.id = "m:openness-s4-t0.5-q01";
    t.model = "m";
    t.temperature = Temperature::parse("0.5");
    t.question_id = "q01";
    t.question = "Q?";
    t.profile = PersonalityProfile::single(Trait::Openness, PromptScore{4});
    t.text = "I like [MASKED] things.";
    t.edited = true;
    t.masked_spans = {{7, 12}};
    t.original_text = "I like novel things.";
    CHECK(generated_text_from_json(to_json(t)) == t);

    AnnotationRecord r{"x", "a1", Trait::Neuroticism, AnnotationScore::numeric(-2), {"Explicit signs"},
                       {{{0, 3}, "abc"}}};
    CHECK(annotation_record_from_json(to_json(r)) == r);

    ClassifierOutput c("x", Trait::Extraversion, AnnotationScore::numeric(2), {"party"}, "outgoing",
                       DecisionType::ExplicitSigns, 2);
    CHECK(classifier_output_from_json(to_json(c)) == c);
    CHECK(to_json(AnnotationScore::non_distinguishable()) == Json("Nondistinguishable"));
    CHECK_THROWS_AS(annotation_score_from_json(Json(1.5)), ValueError);
    CHECK_THROWS_AS(generated_text_from_json(Json::object()), ValueError);
}

TEST_CASE("templates refuse unfilled slots") {
    PromptTemplate t("A {{X}} and {{Y}}");
    CHECK(t.slots() == std::vector<std::string>{"X", "Y"});
    CHECK(t.render({{"X", "1"}, {"Y", "2"}}) == "A 1 and 2");
    CHECK_THROWS_AS(t.render({{"X", "1"}}), TemplateError);
    CHECK_THROWS_AS(t.render({{"X", "1"}, {"Y", ""}}), TemplateError);
    CHECK_THROWS_AS(PromptTemplate("open {{X"), TemplateError);
}

TEST_CASE("template overrides replace single members") {
    testing::TempDir dir;
    io::write_file(dir / "generation_user.txt", "Q: {{QUESTION}}");
    auto t = PromptTemplates::with_overrides(dir.path());
    CHECK(t.generation_user == "Q: {{QUESTION}}");
    CHECK(t.classifier_system == PromptTemplates::defaults().classifier_system);
}

TEST_CASE("io helpers") {
    CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(io::format_real(0.1 + 0.2) == "0.300000");
    CHECK(io::format_real(-0.0) == "0.000000");
    io::CsvWriter w({"a", "b"});
    w.add_row({"x,y", "say \"hi\""});
    CHECK(w.str() == "a,b\n\"x,y\",\"say \"\"hi\"\"\"\n");
    auto rows = io::parse_csv(w.str());
    REQUIRE(rows.size() == 2);
    CHECK(rows[1][0] == "x,y");
    CHECK(rows[1][1] == "say \"hi\"");

    testing::TempDir dir;
    io::write_file(dir / "sub/x.jsonl", "{\"a\":1}\n\n{\"a\":2}\n");
    auto lines = io::read_jsonl(dir / "sub/x.jsonl");
    REQUIRE(lines.size() == 2);
    CHECK(lines[1]["a"] == 2);
    io::write_file(dir / "bad.jsonl", "{\"a\":1}\n{oops\n");
    CHECK_THROWS_AS(io::read_jsonl(dir / "bad.jsonl"), IoError);
    CHECK_THROWS_AS(io::read_file(dir / "missing"), IoError);
}

}
