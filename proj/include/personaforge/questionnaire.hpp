#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "personaforge/domain.hpp"
#include "personaforge/metrics.hpp"
#include "personaforge/providers.hpp"
#include "personaforge/templates.hpp"

namespace personaforge::questionnaire {

struct Item {
    std::string id;
    std::string statement;
    Trait trait = Trait::Openness;
    bool reverse_keyed = false;
};

class Questionnaire {
public:
    /// Throws ValueError on duplicate ids or statements.
    explicit Questionnaire(std::vector<Item> items);
    static Questionnaire load(const std::filesystem::path& path);
    static Questionnaire from_json(const Json& j);

    const std::vector<Item>& items() const noexcept { return items_; }
    std::vector<Item> items_for(Trait t) const;

private:
    std::vector<Item> items_;
};

enum class Level { High, Low };
std::string_view to_string(Level l) noexcept;
Level parse_level(std::string_view s);

/// Ordinal 1..5 bound to the five answer options.
class LikertLevel {
public:
    explicit LikertLevel(int ordinal);
    int ordinal() const noexcept { return ordinal_; }
    std::string_view option_text() const noexcept;
    friend bool operator==(LikertLevel, LikertLevel) = default;

private:
    int ordinal_;
};

/// The five answer options, ordinal 1 first.
const std::array<std::string, 5>& likert_options();

/// Persona descriptions for the [TRAIT PROMPT] slot, keyed by trait and level.
class TraitPrompts {
public:
    void set(Trait t, Level l, std::string text);
    const std::string& get(Trait t, Level l) const;
    /// Reads `<trait>_<level>.txt` files (e.g. openness_high.txt).
    static TraitPrompts load_dir(const std::filesystem::path& dir);

private:
    std::map<std::pair<Trait, Level>, std::string> prompts_;
};

struct RunRecord {
    std::string model;
    Trait trait = Trait::Openness;
    Level level = Level::High;
    Temperature temperature = Temperature::parse("0");
    std::string item_id;
    int repetition = 0;
    std::string raw_response;
    std::optional<LikertLevel> likert;
    std::optional<int> item_score;
    /// "unparseable" or "ambiguous" when the answer could not be read.
    std::optional<std::string> error;
};

Json to_json(const RunRecord& r);
RunRecord run_record_from_json(const Json& j);

struct PromptOptions {
    std::string model;
    Temperature temperature = Temperature::parse("0");
    const PromptTemplates* templates = nullptr; // null selects the defaults
};

ChatRequest build_questionnaire_prompt(Trait trait, Level level, const Item& item,
                                       const std::string& trait_prompt_text,
                                       const PromptOptions& options);

/// Reads a free-text answer as one of the five options. Matching is
/// case-insensitive containment of the full option strings; an occurrence
/// nested inside a longer option occurrence is ignored, so "disagree a
/// little" never also counts as "agree a little".
LikertLevel parse_likert_response(std::string_view raw);

int score_item(LikertLevel likert, bool reverse_keyed) noexcept;

/// Mean item score over records that parsed. Throws EmptyInput when none did
/// and ValueError when records mix traits, models or levels.
double aggregate_trait_score(const std::vector<RunRecord>& records);

struct RunSpec {
    std::string model;
    Trait trait = Trait::Openness;
    Level level = Level::High;
    Temperature temperature = Temperature::parse("0");
    int repetitions = 10;
    int workers = 1;
};

/// One chat call per (item x repetition) over the items of spec.trait.
/// Records come back ordered by (item, repetition).
std::vector<RunRecord> run_questionnaire(ChatProvider& provider, const Questionnaire& questionnaire,
                                         const TraitPrompts& prompts, const RunSpec& spec,
                                         const PromptTemplates& templates = PromptTemplates::defaults());

struct ScoreDistribution {
    std::string model;
    Trait trait = Trait::Openness;
    Level level = Level::High;
    Temperature temperature = Temperature::parse("0");
    /// One aggregate trait score per repetition.
    std::vector<double> scores;
    /// Counts over the bins [1,1.5), [1.5,2), ..., [4.5,5].
    std::array<int, 8> bins{};
    double mean = 0.0;
};

/// Per (model, trait, level, temperature) distribution of per-repetition trait
/// scores, in first-seen order of those keys.
std::vector<ScoreDistribution> score_distributions(const std::vector<RunRecord>& records);

/// Respondent-by-item matrix for one (model, trait): rows are (level,
/// temperature, repetition) runs with every item answered, columns follow
/// questionnaire order.
metrics::RatingMatrix reliability_matrix(const std::vector<RunRecord>& records,
                                         const Questionnaire& questionnaire,
                                         const std::string& model, Trait trait);

} // namespace personaforge::questionnaire
