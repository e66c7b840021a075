#include "personaforge/domain.hpp"

#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "personaforge/text_util.hpp"

namespace personaforge {

namespace {

constexpr std::array<std::string_view, 5> kTraitKeys{"openness", "conscientiousness",
                                                     "extraversion", "agreeableness",
                                                     "neuroticism"};
constexpr std::array<std::string_view, 5> kTraitNames{"Openness", "Conscientiousness",
                                                      "Extraversion", "Agreeableness",
                                                      "Neuroticism"};

std::string require_string(const Json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_string()) {
        throw ValueError(fmt::format("missing or non-string field '{}'", key));
    }
    return j.at(key).get<std::string>();
}

std::vector<std::string> string_list(const Json& j, const char* key) {
    std::vector<std::string> out;
    if (!j.contains(key)) return out;
    const auto& arr = j.at(key);
    if (!arr.is_array()) throw ValueError(fmt::format("field '{}' must be an array", key));
    for (const auto& e : arr) {
        if (!e.is_string()) throw ValueError(fmt::format("field '{}' must hold strings", key));
        out.push_back(e.get<std::string>());
    }
    return out;
}

CharRange range_from_json(const Json& j) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_unsigned() || !j[1].is_number_unsigned()) {
        throw ValueError("character range must be [begin, end] with non-negative integers");
    }
    CharRange r{j[0].get<std::size_t>(), j[1].get<std::size_t>()};
    if (r.end < r.begin) throw ValueError("character range end precedes begin");
    return r;
}

} // namespace

std::string_view trait_key(Trait t) noexcept { return kTraitKeys[trait_index(t)]; }

std::string_view trait_display_name(Trait t) noexcept { return kTraitNames[trait_index(t)]; }

std::size_t trait_index(Trait t) noexcept { return static_cast<std::size_t>(t); }

Trait parse_trait(std::string_view s) {
    auto folded = text::to_lower_ascii(text::trim(s));
    for (std::size_t i = 0; i < kTraitKeys.size(); ++i) {
        if (folded == kTraitKeys[i]) return kAllTraits[i];
    }
    throw ValueError(fmt::format("unknown trait '{}'", s));
}

PromptScore::PromptScore(int value) : value_(value) {
    if (value < 1 || value > 5) {
        throw ValueError(fmt::format("prompt score {} outside 1..5", value));
    }
}

AnnotationScore AnnotationScore::numeric(int value) {
    if (value < -2 || value > 2) {
        throw ValueError(fmt::format("annotation score {} outside -2..+2", value));
    }
    AnnotationScore s;
    s.value_ = value;
    return s;
}

int AnnotationScore::value() const {
    if (!value_) throw ValueError("non-distinguishable score has no numeric value");
    return *value_;
}

std::string_view to_string(ScoreGroup g) noexcept {
    switch (g) {
    case ScoreGroup::Low: return "low";
    case ScoreGroup::Mid: return "mid";
    case ScoreGroup::High: return "high";
    case ScoreGroup::NonDistinguishable: return "nd";
    }
    return "?";
}

std::string_view to_string(PromptedLevel l) noexcept {
    switch (l) {
    case PromptedLevel::L: return "L";
    case PromptedLevel::M: return "M";
    case PromptedLevel::H: return "H";
    }
    return "?";
}

Temperature Temperature::parse(std::string_view raw) {
    auto s = text::trim(raw);
    // digits [ '.' digits ]
    std::size_t dot = s.find('.');
    auto int_part = s.substr(0, dot);
    auto frac_part = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
    auto all_digits = [](std::string_view v) {
        for (char c : v) {
            if (c < '0' || c > '9') return false;
        }
        return true;
    };
    if (s.empty() || int_part.empty() || !all_digits(int_part) || !all_digits(frac_part) ||
        (dot != std::string_view::npos && frac_part.empty())) {
        throw ValueError(fmt::format("temperature '{}' is not a plain decimal", raw));
    }
    while (int_part.size() > 1 && int_part.front() == '0') int_part.remove_prefix(1);
    while (!frac_part.empty() && frac_part.back() == '0') frac_part.remove_suffix(1);
    std::string canonical(int_part);
    if (!frac_part.empty()) {
        canonical += '.';
        canonical += frac_part;
    }
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(canonical.data(), canonical.data() + canonical.size(), value);
    if (ec != std::errc{} || value < 0.0 || value > 1.0) {
        throw ValueError(fmt::format("temperature '{}' outside [0, 1]", raw));
    }
    return Temperature(std::move(canonical), value);
}

Temperature Temperature::from_value(double v) {
    if (!std::isfinite(v)) throw ValueError("temperature must be finite");
    return parse(fmt::format("{}", v));
}

std::vector<Temperature> paper_temperatures() {
    return {Temperature::parse("0"), Temperature::parse("0.5"), Temperature::parse("0.7"),
            Temperature::parse("0.9")};
}

PersonalityProfile PersonalityProfile::single(Trait trait, PromptScore score) {
    return PersonalityProfile(Kind::SingleTrait, {{trait, score}});
}

PersonalityProfile PersonalityProfile::full(const std::array<PromptScore, 5>& scores) {
    std::map<Trait, PromptScore> m;
    for (std::size_t i = 0; i < kAllTraits.size(); ++i) m.emplace(kAllTraits[i], scores[i]);
    return PersonalityProfile(Kind::FullProfile, std::move(m));
}

std::optional<PromptScore> PersonalityProfile::score(Trait t) const {
    auto it = scores_.find(t);
    if (it == scores_.end()) return std::nullopt;
    return it->second;
}

Trait PersonalityProfile::single_trait() const {
    if (kind_ != Kind::SingleTrait) throw ValueError("profile is not a single-trait profile");
    return scores_.begin()->first;
}

std::string_view to_string(DecisionType d) noexcept {
    switch (d) {
    case DecisionType::ExplicitSigns: return "Explicit signs";
    case DecisionType::ImplicitSigns: return "Implicit signs";
    case DecisionType::Intuition: return "Intuition";
    case DecisionType::NonDistinguishable: return "Nondistinguishable";
    }
    return "?";
}

DecisionType parse_decision_type(std::string_view s) {
    auto f = text::fold_alnum(s);
    if (f == "explicitsigns" || f == "explicit") return DecisionType::ExplicitSigns;
    if (f == "implicitsigns" || f == "implicit") return DecisionType::ImplicitSigns;
    if (f == "intuition") return DecisionType::Intuition;
    if (f == "nondistinguishable" || f == "nd") return DecisionType::NonDistinguishable;
    throw ValueError(fmt::format("unknown decision type '{}'", s));
}

ClassifierOutput::ClassifierOutput(std::string text_id, Trait trait, AnnotationScore score,
                                   std::vector<std::string> clues, std::string reasoning,
                                   DecisionType decision_type, int attempts)
    : text_id_(std::move(text_id)), trait_(trait), score_(score), clues_(std::move(clues)),
      reasoning_(std::move(reasoning)), decision_type_(decision_type), attempts_(attempts) {
    if (score_.is_nd() != (decision_type_ == DecisionType::NonDistinguishable)) {
        throw SchemaViolation("score and decision type must both be Nondistinguishable or neither");
    }
}

// --- JSON ---------------------------------------------------------------

Json to_json(const AnnotationScore& s) {
    if (s.is_nd()) return Json("Nondistinguishable");
    return Json(s.value());
}

AnnotationScore annotation_score_from_json(const Json& j) {
    if (j.is_number_integer()) return AnnotationScore::numeric(j.get<int>());
    if (j.is_string() && text::fold_alnum(j.get<std::string>()) == "nondistinguishable") {
        return AnnotationScore::non_distinguishable();
    }
    throw ValueError("score must be an integer in -2..+2 or \"Nondistinguishable\"");
}

Json to_json(const PersonalityProfile& p) {
    Json scores = Json::object();
    for (const auto& [t, s] : p.scores()) scores[std::string(trait_key(t))] = s.value();
    return Json{{"kind", p.kind() == PersonalityProfile::Kind::SingleTrait ? "single_trait"
                                                                           : "full_profile"},
                {"scores", scores}};
}

PersonalityProfile profile_from_json(const Json& j) {
    auto kind = require_string(j, "kind");
    if (!j.contains("scores") || !j.at("scores").is_object()) {
        throw ValueError("profile needs a 'scores' object");
    }
    const auto& scores = j.at("scores");
    if (kind == "single_trait") {
        if (scores.size() != 1) throw ValueError("single-trait profile must have exactly one score");
        auto it = scores.begin();
        return PersonalityProfile::single(parse_trait(it.key()), PromptScore{it.value().get<int>()});
    }
    if (kind == "full_profile") {
        if (scores.size() != 5) throw ValueError("full profile must score all five traits");
        std::array<PromptScore, 5> arr{PromptScore{1}, PromptScore{1}, PromptScore{1},
                                       PromptScore{1}, PromptScore{1}};
        std::array<bool, 5> seen{};
        for (auto it = scores.begin(); it != scores.end(); ++it) {
            auto idx = trait_index(parse_trait(it.key()));
            arr[idx] = PromptScore{it.value().get<int>()};
            seen[idx] = true;
        }
        for (bool b : seen) {
            if (!b) throw ValueError("full profile must score all five traits");
        }
        return PersonalityProfile::full(arr);
    }
    throw ValueError(fmt::format("unknown profile kind '{}'", kind));
}

Json to_json(const GeneratedText& t) {
    Json spans = Json::array();
    for (const auto& r : t.masked_spans) spans.push_back(Json::array({r.begin, r.end}));
    Json j{{"id", t.id},
           {"model", t.model},
           {"temperature", t.temperature.text()},
           {"question_id", t.question_id},
           {"question", t.question},
           {"profile", to_json(t.profile)},
           {"text", t.text},
           {"edited", t.edited},
           {"masked_spans", spans}};
    if (t.original_text) j["original_text"] = *t.original_text;
    return j;
}

GeneratedText generated_text_from_json(const Json& j) {
    GeneratedText t;
    t.id = require_string(j, "id");
    t.model = require_string(j, "model");
    t.temperature = Temperature::parse(require_string(j, "temperature"));
    t.question_id = require_string(j, "question_id");
    t.question = j.contains("question") ? require_string(j, "question") : std::string{};
    if (!j.contains("profile")) throw ValueError("missing field 'profile'");
    t.profile = profile_from_json(j.at("profile"));
    t.text = require_string(j, "text");
    t.edited = j.value("edited", false);
    if (j.contains("masked_spans")) {
        for (const auto& r : j.at("masked_spans")) t.masked_spans.push_back(range_from_json(r));
    }
    if (j.contains("original_text") && !j.at("original_text").is_null()) {
        t.original_text = require_string(j, "original_text");
    }
    if (!t.masked_spans.empty() && !t.edited) {
        throw ValueError("text with masked spans must be marked edited");
    }
    return t;
}

Json to_json(const AnnotationRecord& r) {
    Json spans = Json::array();
    for (const auto& s : r.spans) {
        spans.push_back(Json{{"range", Json::array({s.range.begin, s.range.end})},
                             {"surface", s.surface}});
    }
    return Json{{"text_id", r.text_id},
                {"annotator_id", r.annotator_id},
                {"trait", trait_key(r.trait)},
                {"score", to_json(r.score)},
                {"reasons", r.reasons},
                {"spans", spans}};
}

AnnotationRecord annotation_record_from_json(const Json& j) {
    AnnotationRecord r;
    r.text_id = require_string(j, "text_id");
    r.annotator_id = require_string(j, "annotator_id");
    r.trait = parse_trait(require_string(j, "trait"));
    if (!j.contains("score")) throw ValueError("missing field 'score'");
    r.score = annotation_score_from_json(j.at("score"));
    r.reasons = string_list(j, "reasons");
    if (j.contains("spans")) {
        for (const auto& s : j.at("spans")) {
            if (!s.contains("range")) throw ValueError("span needs a 'range'");
            r.spans.push_back({range_from_json(s.at("range")), s.value("surface", std::string{})});
        }
    }
    return r;
}

Json to_json(const ClassifierOutput& c) {
    return Json{{"text_id", c.text_id()},
                {"trait", trait_key(c.trait())},
                {"score", to_json(c.score())},
                {"clues", c.clues()},
                {"reasoning", c.reasoning()},
                {"decision_type", to_string(c.decision_type())},
                {"attempts", c.attempts()}};
}

ClassifierOutput classifier_output_from_json(const Json& j) {
    if (!j.contains("score")) throw ValueError("missing field 'score'");
    return ClassifierOutput(require_string(j, "text_id"), parse_trait(require_string(j, "trait")),
                            annotation_score_from_json(j.at("score")), string_list(j, "clues"),
                            require_string(j, "reasoning"),
                            parse_decision_type(require_string(j, "decision_type")),
                            j.value("attempts", 1));
}

} // namespace personaforge
