#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "personaforge/domain.hpp"

namespace personaforge::annotation {

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path);

enum class ViolationKind { MissingRater, DuplicateAnnotator, UnknownText, SpanOutOfBounds, SpanMismatch, UnknownReason };

std::string_view to_string(ViolationKind k) noexcept;

struct Violation {
    ViolationKind kind = ViolationKind::MissingRater;
    std::string text_id;
    std::string annotator_id; // empty for per-(text, trait) problems
    Trait trait = Trait::Openness;
    std::string detail;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const noexcept { return violations.empty(); }
};

struct ValidationOptions {
    std::size_t raters_per_text = 3;
    /// When set, every reason must come from this list.
    std::optional<std::set<std::string, std::less<>>> reasons;
};

/// Spans are checked against the text as annotators saw it (the masked text).
ValidationReport validate_annotations(const std::vector<AnnotationRecord>& records,
                                      const std::vector<GeneratedText>& texts,
                                      const ValidationOptions& options = {});

struct FinalScore {
    std::string text_id;
    Trait trait = Trait::Openness;
    AnnotationScore score = AnnotationScore::non_distinguishable();
    /// Mean of the numeric rater scores; empty when all said Nondistinguishable.
    std::optional<double> mean;
    std::vector<AnnotationScore> rater_scores; // in annotator id order
    friend bool operator==(const FinalScore&, const FinalScore&) = default;
};

Json to_json(const FinalScore& f);
FinalScore final_score_from_json(const Json& j);
std::vector<FinalScore> load_final_scores(const std::filesystem::path& path);

/// Majority vote per (text, trait), sorted by text id then trait.
std::vector<FinalScore> aggregate_final_scores(const std::vector<AnnotationRecord>& records);

enum class KappaLevel { Presence = 1, Group = 2 };

/// Fleiss' kappa per annotated trait. Level 1 compares present/absent, level 2
/// the four score groups. Empty when every rating fell in one category.
std::map<Trait, std::optional<double>> interannotator_kappa(const std::vector<AnnotationRecord>& records,
                                                            KappaLevel level);

struct AnnotationBatch {
    std::string id;
    std::vector<std::string> text_ids;
    std::vector<std::string> annotators;
};

struct BatchPlan {
    std::size_t total_texts = 288;
    std::size_t batch_size = 20;
    std::size_t raters_per_text = 3;
    std::uint64_t seed = 0;
};

/// Draws texts round-robin across (model, temperature) strata, each stratum
/// shuffled with the seed, then cuts batches and rotates annotators over them.
/// Throws ValueError when there are fewer annotators than raters per text.
std::vector<AnnotationBatch> sample_batches(const std::vector<GeneratedText>& texts,
                                            const std::vector<std::string>& annotators, const BatchPlan& plan);

} // namespace personaforge::annotation
