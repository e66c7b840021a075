#include "personaforge/classifier.hpp"

#include <cmath>
#include <optional>
#include <set>

#include <fmt/format.h>

#include "personaforge/parallel.hpp"
#include "personaforge/text_util.hpp"

namespace personaforge::classifier {

void ClassifierConfig::validate() const {
    if (model.empty()) throw ConfigError("classifier model is empty");
    if (retry_limit < 0) throw ConfigError("classifier retry limit must be >= 0");
}

ChatRequest build_classifier_prompt(Trait trait, std::string_view question, std::string_view answer,
                                    const generation::TraitDefinitions& definitions,
                                    const std::string& model, const Temperature& temperature,
                                    const PromptTemplates& templates) {
    const auto* d = definitions.find(trait);
    if (d == nullptr) throw TemplateError(fmt::format("no definitions for {}", trait_key(trait)));
    ChatRequest req;
    req.model = model;
    req.temperature = temperature;
    req.system_prompt = PromptTemplate(templates.classifier_system)
                            .render({{"TRAIT", std::string(trait_display_name(trait))},
                                     {"DEFINITION", d->definition},
                                     {"DEFINITION OF HIGH SCORE", d->high},
                                     {"DEFINITION OF LOW SCORE", d->low}});
    req.user_prompt = PromptTemplate(templates.classifier_user)
                          .render({{"QUESTION", std::string(question)}, {"ANSWER", std::string(answer)}});
    return req;
}

namespace {

// End of the balanced object starting at `open`, honouring JSON strings.
std::optional<std::size_t> object_end(std::string_view s, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < s.size(); ++i) {
        char c = s[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) return i + 1;
        }
    }
    return std::nullopt;
}

Json first_object(std::string_view raw) {
    for (std::size_t pos = raw.find('{'); pos != std::string_view::npos; pos = raw.find('{', pos + 1)) {
        auto end = object_end(raw, pos);
        if (!end) continue;
        auto parsed = Json::parse(raw.substr(pos, *end - pos), nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object()) return parsed;
    }
    throw MalformedJson("no JSON object found in classifier reply");
}

AnnotationScore decode_score(const Json& v) {
    if (v.is_number_integer()) {
        auto n = v.get<long long>();
        if (n < -2 || n > 2) throw SchemaViolation(fmt::format("score {} outside -2..2", n));
        return AnnotationScore::numeric(static_cast<int>(n));
    }
    if (v.is_number_float()) {
        double d = v.get<double>();
        if (d != std::floor(d) || d < -2 || d > 2) throw SchemaViolation(fmt::format("score {} is not -2..2", d));
        return AnnotationScore::numeric(static_cast<int>(d));
    }
    if (v.is_string()) {
        const auto& raw = v.get_ref<const std::string&>();
        auto s = text::trim(raw);
        if (text::fold_alnum(s) == "nondistinguishable") return AnnotationScore::non_distinguishable();
        static const std::set<std::string, std::less<>> kNumeric{"-2", "-1", "0", "1", "2", "+1", "+2"};
        if (kNumeric.contains(s)) return AnnotationScore::numeric(std::stoi(std::string(s)));
        throw SchemaViolation(fmt::format("unrecognised score '{}'", s));
    }
    throw SchemaViolation("score must be an integer or \"Nondistinguishable\"");
}

const Json& require(const Json& obj, std::initializer_list<const char*> keys) {
    for (const char* k : keys) {
        if (auto it = obj.find(k); it != obj.end()) return *it;
    }
    throw SchemaViolation(fmt::format("missing key '{}'", *keys.begin()));
}

} // namespace

ClassifierOutput parse_classifier_json(std::string_view raw, const std::string& text_id, Trait trait) {
    auto obj = first_object(raw);

    auto score = decode_score(require(obj, {"score"}));

    const auto& clues_json = require(obj, {"clues"});
    std::vector<std::string> clues;
    if (clues_json.is_array()) {
        for (const auto& c : clues_json) {
            if (!c.is_string()) throw SchemaViolation("clues must be strings");
            clues.push_back(c.get<std::string>());
        }
    } else if (clues_json.is_string()) {
        clues.push_back(clues_json.get<std::string>());
    } else {
        throw SchemaViolation("clues must be a list of strings");
    }

    const auto& reasoning = require(obj, {"reasoning"});
    if (!reasoning.is_string()) throw SchemaViolation("reasoning must be a string");

    const auto& decision = require(obj, {"decision type", "decision_type", "decisionType"});
    if (!decision.is_string()) throw SchemaViolation("decision type must be a string");
    DecisionType type;
    try {
        type = parse_decision_type(decision.get<std::string>());
    } catch (const ValueError& e) {
        throw SchemaViolation(e.what());
    }
    return ClassifierOutput(text_id, trait, score, std::move(clues), reasoning.get<std::string>(), type);
}

ClassifierOutput classify_text(ChatProvider& judge, const ClassifierConfig& config,
                               const GeneratedText& text, Trait trait) {
    auto req = build_classifier_prompt(trait, text.question, text.text, config.definitions, config.model,
                                       config.temperature, config.templates);
    const int max_attempts = config.retry_limit + 1;
    std::string last_error;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        auto resp = judge.complete(req);
        try {
            auto out = parse_classifier_json(resp.text, text.id, trait);
            return ClassifierOutput(out.text_id(), out.trait(), out.score(), out.clues(), out.reasoning(),
                                    out.decision_type(), attempt);
        } catch (const MalformedJson& e) {
            last_error = e.what();
            if (attempt == 1) req.user_prompt += config.templates.classifier_json_reminder;
        }
    }
    throw ClassificationFailed(fmt::format("{} / {}: no valid JSON after {} attempts ({})", text.id,
                                           trait_key(trait), max_attempts, last_error));
}

TraitSelector parse_trait_selector(std::string_view s) {
    auto f = text::fold_alnum(s);
    if (f == "prompted" || f == "promptedonly") return TraitSelector::PromptedOnly;
    if (f == "all" || f == "allfive") return TraitSelector::AllFive;
    throw ValueError(fmt::format("unknown trait selector '{}' (expected prompted or all)", s));
}

BatchResult classify_batch(ChatProvider& judge, const ClassifierConfig& config,
                           const std::vector<GeneratedText>& texts, TraitSelector selector, int workers) {
    config.validate();
    std::set<std::string, std::less<>> seen;
    for (const auto& t : texts) {
        if (!seen.insert(t.id).second) throw ValueError("duplicate text id " + t.id);
    }

    struct Task {
        const GeneratedText* text;
        Trait trait;
    };
    std::vector<Task> tasks;
    for (const auto& t : texts) {
        if (selector == TraitSelector::AllFive) {
            for (auto trait : kAllTraits) tasks.push_back({&t, trait});
        } else {
            for (const auto& [trait, score] : t.profile.scores()) tasks.push_back({&t, trait});
        }
    }

    std::vector<std::optional<ClassifierOutput>> slots(tasks.size());
    std::vector<std::string> errors(tasks.size());
    parallel_for(tasks.size(), workers, [&](std::size_t i) {
        try {
            slots[i] = classify_text(judge, config, *tasks[i].text, tasks[i].trait);
        } catch (const AuthError&) {
            throw;
        } catch (const Error& e) {
            errors[i] = e.what();
        }
    });

    BatchResult result;
    result.requested = tasks.size();
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (slots[i]) {
            result.outputs.push_back(std::move(*slots[i]));
        } else {
            result.failures.push_back({tasks[i].text->id, tasks[i].trait, errors[i]});
        }
    }
    return result;
}

} // namespace personaforge::classifier
