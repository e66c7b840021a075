#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "personaforge/domain.hpp"
#include "personaforge/providers.hpp"
#include "personaforge/templates.hpp"

namespace personaforge::generation {

struct Question {
    std::string id;
    std::string text;
};

/// Reads a JSON array of {id, text}; throws ValueError on duplicate ids.
std::vector<Question> load_questions(const std::filesystem::path& path);
std::vector<Question> questions_from_json(const Json& j);

/// Trait description texts shared by the generation and classifier prompts.
struct TraitDefinition {
    std::string definition;
    std::string low;
    std::string high;
};

class TraitDefinitions {
public:
    void set(Trait t, TraitDefinition d) { defs_[t] = std::move(d); }
    /// Null when the trait has no entry.
    const TraitDefinition* find(Trait t) const;
    /// Object keyed by trait: {"openness": {"definition", "low", "high"}}.
    static TraitDefinitions from_json(const Json& j);
    static TraitDefinitions load(const std::filesystem::path& path);
    /// All definition texts, for measuring prompt-derived vocabulary.
    std::vector<std::string> all_texts() const;

private:
    std::map<Trait, TraitDefinition> defs_;
};

/// Personality lines follow O, C, E, A, N order; definition lines are emitted
/// per profiled trait after the shared rating-scale line.
ChatRequest build_generation_prompt(const PersonalityProfile& profile, const Question& question,
                                    const TraitDefinitions& definitions, const std::string& model,
                                    const Temperature& temperature,
                                    const PromptTemplates& templates = PromptTemplates::defaults());

struct Job {
    std::string id;
    PersonalityProfile profile;
    Question question;
    Temperature temperature;
};

/// Cartesian product trait x score x temperature x question of single-trait
/// jobs, in that nesting order. Throws ValueError for empty questions.
std::vector<Job> single_trait_grid(const std::vector<Trait>& traits, const std::vector<int>& scores,
                                   const std::vector<Temperature>& temperatures,
                                   const std::vector<Question>& questions);

struct SamplerConfig {
    std::array<double, 5> mean{3.0, 3.0, 3.0, 3.0, 3.0};
    std::array<double, 5> variance{1.0, 1.0, 1.0, 1.0, 1.0};
    std::uint64_t seed = 0;
    int count = 1;

    /// Throws ValueError for negative variance or count < 1.
    void validate() const;
};

/// Standard normal draws: Box-Muller over a seeded 64-bit Mersenne Twister.
class NormalSampler {
public:
    explicit NormalSampler(std::uint64_t seed);
    double next();

private:
    double uniform();
    std::mt19937_64 engine_;
    std::optional<double> spare_;
};

/// Rounds a continuous draw to the nearest integer score and clamps to 1..5.
PromptScore discretize_score(double draw) noexcept;

std::vector<PersonalityProfile> sample_profiles(const SamplerConfig& config);

/// Jobs for sampled full profiles: profile x temperature x question.
std::vector<Job> full_profile_jobs(const std::vector<PersonalityProfile>& profiles,
                                   const std::vector<Temperature>& temperatures,
                                   const std::vector<Question>& questions);

struct Failure {
    std::string job_id;
    std::string error;
};

struct GenerationResult {
    std::vector<GeneratedText> texts;
    std::vector<Failure> failures;
};

/// One provider call per job; failed jobs are reported in `failures` and
/// the rest keep job order. AuthError aborts the whole run.
GenerationResult generate_texts(ChatProvider& provider, const std::vector<Job>& jobs,
                                const TraitDefinitions& definitions, const std::string& model,
                                int workers = 1,
                                const PromptTemplates& templates = PromptTemplates::defaults());

struct LeakageMatch {
    CharRange range;
    std::string term;
    friend bool operator==(const LeakageMatch&, const LeakageMatch&) = default;
};

/// Case-insensitive phrase matcher. At each position the longest term that
/// starts and ends on word boundaries wins; matches never overlap.
class LeakageDetector {
public:
    explicit LeakageDetector(std::vector<std::string> terms);
    static LeakageDetector with_default_lexicon();
    static LeakageDetector load(const std::filesystem::path& path);

    std::vector<LeakageMatch> detect(std::string_view text) const;

private:
    std::vector<std::string> terms_; // lowercased, longest first
};

/// Built-in lexicon: trait names, self-descriptions of traits and scores.
const std::vector<std::string>& default_leakage_lexicon();

std::vector<LeakageMatch> detect_trait_leakage(std::string_view text);

inline constexpr std::string_view kMaskToken = "[MASKED]";

struct MaskedText {
    std::string text;
    bool edited = false;
    /// Where each replaced range landed in the masked text.
    std::vector<CharRange> masked_ranges;
    /// The replaced substrings, in order.
    std::vector<std::string> originals;
};

/// Replaces each span with the mask token. Throws RangeError for spans that
/// overlap or run past the text.
MaskedText mask_leakage(std::string_view text, const std::vector<CharRange>& spans);

/// Inverse of mask_leakage.
std::string unmask(const MaskedText& masked);

/// Detects and masks leakage in place, keeping the original text.
void apply_leakage_masking(GeneratedText& text, const LeakageDetector& detector);

} // namespace personaforge::generation
