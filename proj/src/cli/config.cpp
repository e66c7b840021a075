#include <cstdlib>
#include <set>

#include <fmt/format.h>

#include "personaforge/cli.hpp"
#include "personaforge/io.hpp"

#ifndef PERSONAFORGE_DATA_DIR
#define PERSONAFORGE_DATA_DIR "data"
#endif

namespace personaforge::cli {

fs::path bundled_data_dir() {
    if (const char* env = std::getenv("PERSONAFORGE_DATA_DIR"); env != nullptr && *env != '\0') return env;
    return PERSONAFORGE_DATA_DIR;
}

const ProviderConfig& Config::provider(const std::string& name) const {
    for (const auto& p : providers) {
        if (p.name == name) return p;
    }
    throw ConfigError(fmt::format("no provider named '{}'", name));
}

std::vector<const ProviderConfig*> Config::subject_providers() const {
    std::vector<const ProviderConfig*> out;
    if (!models.empty()) {
        for (const auto& m : models) out.push_back(&provider(m));
        return out;
    }
    for (const auto& p : providers) {
        if (p.name != classifier.judge) out.push_back(&p);
    }
    return out;
}

fs::path Config::effective_cache_dir() const { return cache_dir.value_or(out_dir / "cache"); }

PromptTemplates Config::templates() const {
    return templates_dir ? PromptTemplates::with_overrides(*templates_dir) : PromptTemplates::defaults();
}

Config default_config(const fs::path& data_dir) {
    Config c;
    c.questionnaire.items = data_dir / "bfi44.json";
    c.questionnaire.trait_prompts = data_dir / "trait_prompts";
    c.questionnaire.temperatures = paper_temperatures();
    c.questionnaire.traits.assign(kAllTraits.begin(), kAllTraits.end());
    c.generation.questions = data_dir / "questions.json";
    c.generation.definitions = data_dir / "definitions.json";
    c.generation.temperatures = paper_temperatures();
    c.generation.traits.assign(kAllTraits.begin(), kAllTraits.end());
    c.linguistics.stopwords = data_dir / "stopwords.txt";
    c.linguistics.tagger_data = data_dir;
    return c;
}

namespace {

void check_keys(const Json& obj, std::string_view where, std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object()) throw ConfigError(fmt::format("'{}' must be an object", where));
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (auto a : allowed) ok = ok || it.key() == a;
        if (!ok) throw ConfigError(fmt::format("unknown key '{}' in {}", it.key(), where));
    }
}

fs::path resolve(const fs::path& base, const Json& v) {
    fs::path p = v.get<std::string>();
    return p.is_absolute() ? p : base / p;
}

std::vector<Temperature> temperatures(const Json& v) {
    std::vector<Temperature> out;
    for (const auto& t : v) {
        out.push_back(t.is_string() ? Temperature::parse(t.get<std::string>()) : Temperature::from_value(t.get<double>()));
    }
    return out;
}

std::vector<Trait> traits(const Json& v) {
    if (v.is_string() && v.get<std::string>() == "all") return {kAllTraits.begin(), kAllTraits.end()};
    std::vector<Trait> out;
    for (const auto& t : v) out.push_back(parse_trait(t.get<std::string>()));
    return out;
}

template <std::size_t N>
std::array<double, N> real_array(const Json& v, std::string_view what) {
    if (!v.is_array() || v.size() != N) throw ConfigError(fmt::format("{} needs {} numbers", what, N));
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = v[i].get<double>();
    return out;
}

void apply(Config& c, const Json& j, const fs::path& base) {
    check_keys(j, "config", {"out_dir", "cache_dir", "cache", "seed", "workers", "templates_dir", "providers",
                             "models", "questionnaire", "generation", "classifier", "evaluate", "linguistics"});
    if (j.contains("out_dir")) c.out_dir = resolve(base, j["out_dir"]);
    if (j.contains("cache_dir")) c.cache_dir = resolve(base, j["cache_dir"]);
    if (j.contains("cache")) c.cache = j["cache"].get<bool>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("workers")) c.workers = j["workers"].get<int>();
    if (j.contains("templates_dir")) c.templates_dir = resolve(base, j["templates_dir"]);
    if (j.contains("providers")) {
        for (const auto& p : j["providers"]) {
            auto pc = provider_config_from_json(p);
            if (!pc.mock_script.empty() && pc.mock_script.is_relative()) pc.mock_script = base / pc.mock_script;
            pc.validate();
            c.providers.push_back(std::move(pc));
        }
    }
    if (j.contains("models")) c.models = j["models"].get<std::vector<std::string>>();

    if (j.contains("questionnaire")) {
        const auto& q = j["questionnaire"];
        check_keys(q, "questionnaire", {"items", "trait_prompts", "repetitions", "temperatures", "traits", "levels"});
        if (q.contains("items")) c.questionnaire.items = resolve(base, q["items"]);
        if (q.contains("trait_prompts")) c.questionnaire.trait_prompts = resolve(base, q["trait_prompts"]);
        if (q.contains("repetitions")) c.questionnaire.repetitions = q["repetitions"].get<int>();
        if (q.contains("temperatures")) c.questionnaire.temperatures = temperatures(q["temperatures"]);
        if (q.contains("traits")) c.questionnaire.traits = traits(q["traits"]);
        if (q.contains("levels")) {
            c.questionnaire.levels.clear();
            for (const auto& l : q["levels"]) c.questionnaire.levels.push_back(questionnaire::parse_level(l.get<std::string>()));
        }
    }
    if (j.contains("generation")) {
        const auto& g = j["generation"];
        check_keys(g, "generation", {"questions", "definitions", "mode", "scores", "temperatures", "traits",
                                     "sampler", "leakage_lexicon", "mask"});
        if (g.contains("questions")) c.generation.questions = resolve(base, g["questions"]);
        if (g.contains("definitions")) c.generation.definitions = resolve(base, g["definitions"]);
        if (g.contains("mode")) c.generation.mode = g["mode"].get<std::string>();
        if (g.contains("scores")) c.generation.scores = g["scores"].get<std::vector<int>>();
        if (g.contains("temperatures")) c.generation.temperatures = temperatures(g["temperatures"]);
        if (g.contains("traits")) c.generation.traits = traits(g["traits"]);
        if (g.contains("sampler")) {
            const auto& s = g["sampler"];
            check_keys(s, "generation.sampler", {"mean", "variance", "count"});
            if (s.contains("mean")) c.generation.sampler.mean = real_array<5>(s["mean"], "sampler.mean");
            if (s.contains("variance")) c.generation.sampler.variance = real_array<5>(s["variance"], "sampler.variance");
            if (s.contains("count")) c.generation.sampler.count = s["count"].get<int>();
        }
        if (g.contains("leakage_lexicon")) c.generation.leakage_lexicon = resolve(base, g["leakage_lexicon"]);
        if (g.contains("mask")) c.generation.mask = g["mask"].get<bool>();
    }
    if (j.contains("classifier")) {
        const auto& k = j["classifier"];
        check_keys(k, "classifier", {"judge", "traits", "retry_limit"});
        if (k.contains("judge")) c.classifier.judge = k["judge"].get<std::string>();
        if (k.contains("traits")) c.classifier.traits = k["traits"].get<std::string>();
        if (k.contains("retry_limit")) c.classifier.retry_limit = k["retry_limit"].get<int>();
    }
    if (j.contains("evaluate")) {
        const auto& e = j["evaluate"];
        check_keys(e, "evaluate", {"human_scores", "annotations", "reasons", "bias_threshold"});
        if (e.contains("human_scores")) c.evaluate.human_scores = resolve(base, e["human_scores"]);
        if (e.contains("annotations")) c.evaluate.annotations = resolve(base, e["annotations"]);
        if (e.contains("reasons")) c.evaluate.reasons = resolve(base, e["reasons"]);
        if (e.contains("bias_threshold")) c.evaluate.bias_threshold = e["bias_threshold"].get<double>();
    }
    if (j.contains("linguistics")) {
        const auto& l = j["linguistics"];
        check_keys(l, "linguistics", {"k", "top_n", "stopwords", "tagger_data", "annotations"});
        if (l.contains("k")) c.linguistics.k = l["k"].get<std::size_t>();
        if (l.contains("top_n")) c.linguistics.top_n = l["top_n"].get<std::size_t>();
        if (l.contains("stopwords")) c.linguistics.stopwords = resolve(base, l["stopwords"]);
        if (l.contains("tagger_data")) c.linguistics.tagger_data = resolve(base, l["tagger_data"]);
        if (l.contains("annotations")) c.linguistics.annotations = resolve(base, l["annotations"]);
    }
}

} // namespace

Config load_config(const fs::path& path, const fs::path& data_dir) {
    auto c = default_config(data_dir);
    std::string text;
    try {
        text = io::read_file(path);
    } catch (const Error& e) {
        throw ConfigError(fmt::format("cannot read config '{}': {}", path.string(), e.what()));
    }
    try {
        apply(c, Json::parse(text), path.parent_path().empty() ? fs::path(".") : path.parent_path());
    } catch (const Json::exception& e) {
        throw ConfigError(fmt::format("config '{}': {}", path.string(), e.what()));
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(fmt::format("config '{}': {}", path.string(), e.what()));
    }
    return c;
}

namespace {

Json temps_json(const std::vector<Temperature>& ts) {
    Json a = Json::array();
    for (const auto& t : ts) a.push_back(t.text());
    return a;
}

Json traits_json(const std::vector<Trait>& ts) {
    Json a = Json::array();
    for (auto t : ts) a.push_back(trait_key(t));
    return a;
}

Json opt_path(const std::optional<fs::path>& p) { return p ? Json(p->generic_string()) : Json(nullptr); }

} // namespace

Json config_snapshot(const Config& c) {
    Json providers = Json::array();
    for (const auto& p : c.providers) {
        auto pj = to_json(p);
        if (pj.contains("script")) pj["script"] = fs::path(pj["script"].get<std::string>()).filename().string();
        providers.push_back(pj);
    }
    Json levels = Json::array();
    for (auto l : c.questionnaire.levels) levels.push_back(questionnaire::to_string(l));
    return Json{
        {"seed", c.seed},
        {"workers", c.workers},
        {"cache", c.cache},
        {"templates_dir", opt_path(c.templates_dir)},
        {"providers", providers},
        {"models", c.models},
        {"questionnaire",
         {{"items", c.questionnaire.items.filename().string()},
          {"repetitions", c.questionnaire.repetitions},
          {"temperatures", temps_json(c.questionnaire.temperatures)},
          {"traits", traits_json(c.questionnaire.traits)},
          {"levels", levels}}},
        {"generation",
         {{"questions", c.generation.questions.filename().string()},
          {"definitions", c.generation.definitions.filename().string()},
          {"mode", c.generation.mode},
          {"scores", c.generation.scores},
          {"temperatures", temps_json(c.generation.temperatures)},
          {"traits", traits_json(c.generation.traits)},
          {"sampler",
           {{"mean", c.generation.sampler.mean},
            {"variance", c.generation.sampler.variance},
            {"count", c.generation.sampler.count}}},
          {"mask", c.generation.mask}}},
        {"classifier",
         {{"judge", c.classifier.judge}, {"traits", c.classifier.traits}, {"retry_limit", c.classifier.retry_limit}}},
        {"evaluate", {{"bias_threshold", c.evaluate.bias_threshold}}},
        {"linguistics", {{"k", c.linguistics.k}, {"top_n", c.linguistics.top_n}}},
    };
}

} // namespace personaforge::cli
