#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "personaforge/domain.hpp"
#include "personaforge/generation.hpp"
#include "personaforge/providers.hpp"
#include "personaforge/templates.hpp"

namespace personaforge::classifier {

struct ClassifierConfig {
    std::string model;
    generation::TraitDefinitions definitions;
    /// Extra attempts after a malformed reply.
    int retry_limit = 2;
    Temperature temperature = Temperature::parse("0");
    PromptTemplates templates = PromptTemplates::defaults();

    /// Throws ConfigError for an empty model or negative retry limit.
    void validate() const;
};

/// Throws TemplateError when the trait has no definition, or an empty one.
ChatRequest build_classifier_prompt(Trait trait, std::string_view question, std::string_view answer,
                                    const generation::TraitDefinitions& definitions,
                                    const std::string& model, const Temperature& temperature,
                                    const PromptTemplates& templates = PromptTemplates::defaults());

/// Finds the first JSON object in a reply (code fences and surrounding prose
/// are ignored) and decodes the verdict. Throws MalformedJson when no object
/// parses, SchemaViolation for missing keys, bad scores or an ND mismatch.
ClassifierOutput parse_classifier_json(std::string_view raw, const std::string& text_id = {},
                                       Trait trait = Trait::Openness);

ClassifierOutput classify_text(ChatProvider& judge, const ClassifierConfig& config,
                               const GeneratedText& text, Trait trait);

enum class TraitSelector { PromptedOnly, AllFive };

TraitSelector parse_trait_selector(std::string_view s);

struct BatchFailure {
    std::string text_id;
    Trait trait = Trait::Openness;
    std::string error;
};

struct BatchResult {
    std::vector<ClassifierOutput> outputs;
    std::vector<BatchFailure> failures;
    std::size_t requested = 0;
};

/// One verdict per (text, selected trait), in input order and trait order.
/// Throws ValueError on duplicate text ids before calling the judge; AuthError
/// aborts the batch, other errors become failures.
BatchResult classify_batch(ChatProvider& judge, const ClassifierConfig& config,
                           const std::vector<GeneratedText>& texts, TraitSelector selector,
                           int workers = 1);

} // namespace personaforge::classifier
