#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "personaforge/domain.hpp"
#include "personaforge/generation.hpp"
#include "personaforge/providers.hpp"
#include "personaforge/questionnaire.hpp"

namespace personaforge::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kSuccess = 0, kPartialFailure = 1, kUsageError = 2 };

struct QuestionnaireSettings {
    fs::path items;
    fs::path trait_prompts;
    int repetitions = 10;
    std::vector<Temperature> temperatures;
    std::vector<Trait> traits;
    std::vector<questionnaire::Level> levels{questionnaire::Level::High, questionnaire::Level::Low};
};

struct GenerationSettings {
    fs::path questions;
    fs::path definitions;
    std::string mode = "single"; // single | full | both
    std::vector<int> scores{1, 2, 3, 4, 5};
    std::vector<Temperature> temperatures;
    std::vector<Trait> traits;
    generation::SamplerConfig sampler;
    std::optional<fs::path> leakage_lexicon;
    bool mask = true;
};

struct ClassifierSettings {
    std::string judge; // provider name
    std::string traits = "prompted";
    int retry_limit = 2;
};

struct EvaluateSettings {
    std::optional<fs::path> human_scores;
    std::optional<fs::path> annotations;
    std::optional<fs::path> reasons;
    double bias_threshold = 0.7;
};

struct LinguisticsSettings {
    std::size_t k = 5;
    std::size_t top_n = 10;
    fs::path stopwords;
    fs::path tagger_data; // directory with pos_lexicon.txt and lemma_exceptions.txt
    /// Lexicon source: highlighted spans from this annotation file, else whole texts.
    std::optional<fs::path> annotations;
};

/// Resolved configuration. Relative paths in the file are taken relative to
/// the file's directory; flags override file values.
struct Config {
    fs::path out_dir = "out";
    std::optional<fs::path> cache_dir; // defaults to <out_dir>/cache
    bool cache = true;
    std::uint64_t seed = 7;
    int workers = 1;
    std::optional<fs::path> templates_dir;
    std::vector<ProviderConfig> providers;
    /// Providers that answer questionnaires and generate texts; all non-judge
    /// providers when empty.
    std::vector<std::string> models;

    QuestionnaireSettings questionnaire;
    GenerationSettings generation;
    ClassifierSettings classifier;
    EvaluateSettings evaluate;
    LinguisticsSettings linguistics;

    const ProviderConfig& provider(const std::string& name) const;
    std::vector<const ProviderConfig*> subject_providers() const;
    fs::path effective_cache_dir() const;
    PromptTemplates templates() const;
};

/// Defaults point at the bundled data directory.
Config default_config(const fs::path& data_dir);
/// Throws ConfigError for unknown keys, bad values or unreadable files.
Config load_config(const fs::path& path, const fs::path& data_dir);
Json config_snapshot(const Config& c);

/// Bundled data directory: $PERSONAFORGE_DATA_DIR, else the build-time path.
fs::path bundled_data_dir();

/// Parses arguments and runs one subcommand; returns the process exit code.
int run(int argc, const char* const* argv);

} // namespace personaforge::cli
