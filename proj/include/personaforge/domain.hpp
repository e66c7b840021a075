#pragma once

// Core vocabulary shared by every stage of the pipeline: traits, the two score
// scales, profiles, and the persisted record types with their JSON codecs.

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "personaforge/error.hpp"

namespace personaforge {

using Json = nlohmann::ordered_json;

enum class Trait { Openness, Conscientiousness, Extraversion, Agreeableness, Neuroticism };

/// Fixed O, C, E, A, N order used for every per-trait listing.
inline constexpr std::array<Trait, 5> kAllTraits{Trait::Openness, Trait::Conscientiousness,
                                                 Trait::Extraversion, Trait::Agreeableness,
                                                 Trait::Neuroticism};

/// Lowercase full word used in data files ("openness").
std::string_view trait_key(Trait t) noexcept;
/// Capitalised name substituted into prompts ("Openness").
std::string_view trait_display_name(Trait t) noexcept;
/// Accepts the lowercase key or the display name, case-insensitively.
Trait parse_trait(std::string_view s);
std::size_t trait_index(Trait t) noexcept;

/// Trait score placed in a generation prompt, 1..5.
class PromptScore {
public:
    explicit PromptScore(int value);
    int value() const noexcept { return value_; }
    friend bool operator==(PromptScore, PromptScore) = default;
    friend auto operator<=>(PromptScore, PromptScore) = default;

private:
    int value_;
};

/// Rater or classifier judgement: an integer in -2..+2, or non-distinguishable.
class AnnotationScore {
public:
    static AnnotationScore numeric(int value);
    static AnnotationScore non_distinguishable() noexcept { return AnnotationScore{}; }

    bool is_numeric() const noexcept { return value_.has_value(); }
    bool is_nd() const noexcept { return !value_.has_value(); }
    /// Throws ValueError for the non-distinguishable branch.
    int value() const;

    friend bool operator==(const AnnotationScore&, const AnnotationScore&) = default;

private:
    AnnotationScore() = default;
    std::optional<int> value_;
};

enum class ScoreGroup { Low, Mid, High, NonDistinguishable };
enum class PromptedLevel { L, M, H };

inline constexpr std::array<ScoreGroup, 4> kAllScoreGroups{ScoreGroup::Low, ScoreGroup::Mid,
                                                           ScoreGroup::High,
                                                           ScoreGroup::NonDistinguishable};
inline constexpr std::array<PromptedLevel, 3> kAllPromptedLevels{PromptedLevel::L, PromptedLevel::M,
                                                                 PromptedLevel::H};

std::string_view to_string(ScoreGroup g) noexcept;
std::string_view to_string(PromptedLevel l) noexcept;

/// Sampling temperature kept as a canonical decimal string ("0", "0.5") so that
/// persisted files and cache keys never depend on float formatting.
class Temperature {
public:
    static Temperature parse(std::string_view text);
    static Temperature from_value(double v);

    const std::string& text() const noexcept { return text_; }
    double value() const noexcept { return value_; }

    friend bool operator==(const Temperature& a, const Temperature& b) { return a.text_ == b.text_; }
    friend bool operator<(const Temperature& a, const Temperature& b) { return a.value_ < b.value_; }

private:
    Temperature(std::string text, double value) : text_(std::move(text)), value_(value) {}
    std::string text_;
    double value_;
};

/// Temperatures used by the replication grid.
std::vector<Temperature> paper_temperatures();

class PersonalityProfile {
public:
    enum class Kind { SingleTrait, FullProfile };

    static PersonalityProfile single(Trait trait, PromptScore score);
    static PersonalityProfile full(const std::array<PromptScore, 5>& scores);

    Kind kind() const noexcept { return kind_; }
    /// Entries in O, C, E, A, N order.
    const std::map<Trait, PromptScore>& scores() const noexcept { return scores_; }
    std::optional<PromptScore> score(Trait t) const;
    /// The single prompted trait; throws ValueError for full profiles.
    Trait single_trait() const;

    friend bool operator==(const PersonalityProfile&, const PersonalityProfile&) = default;

private:
    PersonalityProfile(Kind kind, std::map<Trait, PromptScore> scores)
        : kind_(kind), scores_(std::move(scores)) {}
    Kind kind_;
    std::map<Trait, PromptScore> scores_;
};

/// Half-open byte range [begin, end) into a UTF-8 string.
struct CharRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - begin; }
    friend bool operator==(const CharRange&, const CharRange&) = default;
    friend auto operator<=>(const CharRange&, const CharRange&) = default;
};

struct GeneratedText {
    std::string id;
    std::string model;
    Temperature temperature = Temperature::parse("0");
    std::string question_id;
    std::string question;
    PersonalityProfile profile = PersonalityProfile::single(Trait::Openness, PromptScore{3});
    std::string text;
    bool edited = false;
    /// Ranges into original_text that were replaced by the mask token.
    std::vector<CharRange> masked_spans;
    std::optional<std::string> original_text;

    friend bool operator==(const GeneratedText&, const GeneratedText&) = default;
};

struct HighlightedSpan {
    CharRange range;
    std::string surface;
    friend bool operator==(const HighlightedSpan&, const HighlightedSpan&) = default;
};

struct AnnotationRecord {
    std::string text_id;
    std::string annotator_id;
    Trait trait = Trait::Openness;
    AnnotationScore score = AnnotationScore::non_distinguishable();
    std::vector<std::string> reasons;
    std::vector<HighlightedSpan> spans;
    friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

enum class DecisionType { ExplicitSigns, ImplicitSigns, Intuition, NonDistinguishable };

std::string_view to_string(DecisionType d) noexcept;
/// Case-, space- and punctuation-insensitive ("Explicit signs" == "explicit_signs").
DecisionType parse_decision_type(std::string_view s);

class ClassifierOutput {
public:
    /// Throws SchemaViolation unless score ND <=> decision ND.
    ClassifierOutput(std::string text_id, Trait trait, AnnotationScore score,
                     std::vector<std::string> clues, std::string reasoning,
                     DecisionType decision_type, int attempts = 1);

    const std::string& text_id() const noexcept { return text_id_; }
    Trait trait() const noexcept { return trait_; }
    const AnnotationScore& score() const noexcept { return score_; }
    const std::vector<std::string>& clues() const noexcept { return clues_; }
    const std::string& reasoning() const noexcept { return reasoning_; }
    DecisionType decision_type() const noexcept { return decision_type_; }
    int attempts() const noexcept { return attempts_; }

    friend bool operator==(const ClassifierOutput&, const ClassifierOutput&) = default;

private:
    std::string text_id_;
    Trait trait_;
    AnnotationScore score_;
    std::vector<std::string> clues_;
    std::string reasoning_;
    DecisionType decision_type_;
    int attempts_;
};

// JSON codecs. Decoders throw ValueError on schema problems.

Json to_json(const AnnotationScore& s);
AnnotationScore annotation_score_from_json(const Json& j);

Json to_json(const PersonalityProfile& p);
PersonalityProfile profile_from_json(const Json& j);

Json to_json(const GeneratedText& t);
GeneratedText generated_text_from_json(const Json& j);

Json to_json(const AnnotationRecord& r);
AnnotationRecord annotation_record_from_json(const Json& j);

Json to_json(const ClassifierOutput& c);
ClassifierOutput classifier_output_from_json(const Json& j);

} // namespace personaforge
