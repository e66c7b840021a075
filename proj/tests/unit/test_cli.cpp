#include <doctest.h>

#include "personaforge/cli.hpp"
#include "personaforge/io.hpp"
#include "test_util.hpp"

using namespace personaforge;
using namespace personaforge::cli;

TEST_SUITE_BEGIN("cli");

namespace {

fs::path e2e_fixture() { return testing::test_dir() / "fixtures" / "e2e"; }

void copy_fixture(const testing::TempDir& dir) {
    for (const auto& entry : fs::directory_iterator(e2e_fixture())) {
        fs::copy_file(entry.path(), dir / entry.path().filename().string());
    }
}

Config config_from(const testing::TempDir& dir, const std::string& body) {
    io::write_file(dir / "config.json", body);
    return load_config(dir / "config.json", testing::data_dir());
}

} // namespace

TEST_CASE("unknown config keys are rejected") {
    testing::TempDir dir;
    CHECK_THROWS_AS(config_from(dir, R"({"out_dir": "o", "colour": "blue"})"), ConfigError);
    CHECK_THROWS_AS(config_from(dir, R"({"generation": {"mode": "single", "modes": 1}})"), ConfigError);
    CHECK_THROWS_AS(config_from(dir, R"({"generation": {"sampler": {"mean": [1, 2]}}})"), ConfigError);
    CHECK_THROWS_AS(config_from(dir, R"({"providers": [{"name": "m", "max_in_flight": 0}]})"), ConfigError);
    CHECK_THROWS_AS(config_from(dir, "{not json"), ConfigError);
    CHECK_THROWS_AS(load_config(dir / "missing.json", testing::data_dir()), ConfigError);
}

TEST_CASE("relative config paths resolve against the config directory") {
    testing::TempDir dir;
    auto c = config_from(dir, R"({
        "out_dir": "results",
        "generation": {"questions": "q.json"},
        "providers": [{"name": "m", "kind": "mock", "model": "x", "script": "s.json"}]
    })");
    CHECK(c.out_dir == dir.path() / "results");
    CHECK(c.generation.questions == dir.path() / "q.json");
    CHECK(c.provider("m").mock_script == dir.path() / "s.json");
    CHECK(c.effective_cache_dir() == dir.path() / "results" / "cache");
    CHECK(c.questionnaire.items == testing::data_dir() / "bfi44.json");
    CHECK_THROWS_AS(c.provider("nope"), ConfigError);
}

TEST_CASE("subject providers exclude the judge unless models are listed") {
    testing::TempDir dir;
    auto c = config_from(dir, R"({
        "providers": [{"name": "a", "model": "a", "script": "s.json"},
                      {"name": "j", "model": "j", "script": "s.json"}],
        "classifier": {"judge": "j"}
    })");
    auto subjects = c.subject_providers();
    REQUIRE(subjects.size() == 1);
    CHECK(subjects[0]->name == "a");
    c.models = {"j", "a"};
    CHECK(c.subject_providers().size() == 2);
}

TEST_CASE("config snapshot keeps file names only") {
    testing::TempDir dir;
    auto c = config_from(dir, R"({"providers": [{"name": "m", "model": "x", "script": "deep/s.json"}]})");
    auto snap = config_snapshot(c);
    CHECK(snap["providers"][0]["script"] == "s.json");
    CHECK(snap["questionnaire"]["items"] == "bfi44.json");
    CHECK(snap["generation"]["questions"] == "questions.json");
    CHECK(snap.dump().find(dir.path().string()) == std::string::npos);
}

TEST_CASE("usage errors exit with 2") {
    testing::TempDir dir;
    CHECK(testing::run_cli({}) == kUsageError);
    CHECK(testing::run_cli({"dance"}) == kUsageError);
    CHECK(testing::run_cli({"--workers", "0", "report"}) == kUsageError);
    CHECK(testing::run_cli({"--config", (dir / "missing.json").string(), "report"}) == kUsageError);
    CHECK(testing::run_cli({"--out-dir", (dir / "out").string(), "report"}) == kUsageError);
    CHECK(testing::run_cli({"--out-dir", (dir / "out").string(), "classify", "--input",
                            (dir / "none.jsonl").string()}) == kUsageError);
    CHECK(testing::run_cli({"--out-dir", (dir / "out").string(), "generate", "--mode", "twice"}) == kUsageError);
}

TEST_CASE("a run writes a manifest and the cache serves a re-run") {
    testing::TempDir dir;
    copy_fixture(dir);
    const auto cfg = (dir / "config.json").string();
    REQUIRE(testing::run_cli({"--config", cfg, "generate"}) == kSuccess);

    auto manifest = Json::parse(io::read_file(dir / "out" / "manifest_generate.json"));
    CHECK(manifest["subcommand"] == "generate");
    CHECK(manifest["provider_calls"].get<int>() == 100);
    CHECK(manifest["cache_hits"].get<int>() == 0);
    bool listed = false;
    for (const auto& o : manifest["outputs"]) listed = listed || o["path"] == "generated_texts.jsonl";
    CHECK(listed);
    const auto first = io::read_file(dir / "out" / "generated_texts.jsonl");

    REQUIRE(testing::run_cli({"--config", cfg, "generate"}) == kSuccess);
    manifest = Json::parse(io::read_file(dir / "out" / "manifest_generate.json"));
    CHECK(manifest["provider_calls"].get<int>() == 0);
    CHECK(manifest["cache_hits"].get<int>() == 100);
    CHECK(io::read_file(dir / "out" / "generated_texts.jsonl") == first);
}

TEST_CASE("evaluate refuses verdicts for unknown texts") {
    testing::TempDir dir;
    copy_fixture(dir);
    const auto cfg = (dir / "config.json").string();
    REQUIRE(testing::run_cli({"--config", cfg, "generate"}) == kSuccess);
    REQUIRE(testing::run_cli({"--config", cfg, "classify"}) == kSuccess);
    auto outputs = io::read_file(dir / "out" / "classifier_outputs.jsonl");
    auto first = Json::parse(outputs.substr(0, outputs.find('\n')));
    first["text_id"] = "ghost:q01";
    io::write_file(dir / "out" / "classifier_outputs.jsonl", outputs + first.dump() + "\n");
    CHECK(testing::run_cli({"--config", cfg, "evaluate"}) == kPartialFailure);
}

TEST_SUITE_END();
