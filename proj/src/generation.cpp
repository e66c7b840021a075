#include "personaforge/generation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include <fmt/format.h>

#include "personaforge/io.hpp"
#include "personaforge/parallel.hpp"
#include "personaforge/text_util.hpp"

namespace personaforge::generation {

namespace fs = std::filesystem;

std::vector<Question> questions_from_json(const Json& j) {
    if (!j.is_array()) throw ValueError("question bank must be a JSON array");
    std::vector<Question> out;
    std::set<std::string> ids;
    for (const auto& e : j) {
        Question q{e.at("id").get<std::string>(), e.at("text").get<std::string>()};
        if (q.id.empty() || q.text.empty()) throw ValueError("questions need an id and text");
        if (!ids.insert(q.id).second) throw ValueError("duplicate question id " + q.id);
        out.push_back(std::move(q));
    }
    return out;
}

std::vector<Question> load_questions(const fs::path& path) {
    try {
        return questions_from_json(Json::parse(io::read_file(path)));
    } catch (const Json::exception& e) {
        throw ValueError(fmt::format("question bank '{}': {}", path.string(), e.what()));
    }
}

const TraitDefinition* TraitDefinitions::find(Trait t) const {
    auto it = defs_.find(t);
    return it == defs_.end() ? nullptr : &it->second;
}

TraitDefinitions TraitDefinitions::from_json(const Json& j) {
    if (!j.is_object()) throw ValueError("trait definitions must be a JSON object keyed by trait");
    TraitDefinitions d;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& v = it.value();
        d.set(parse_trait(it.key()), TraitDefinition{v.value("definition", std::string{}),
                                                     v.value("low", std::string{}),
                                                     v.value("high", std::string{})});
    }
    return d;
}

TraitDefinitions TraitDefinitions::load(const fs::path& path) {
    try {
        return from_json(Json::parse(io::read_file(path)));
    } catch (const Json::exception& e) {
        throw ValueError(fmt::format("trait definitions '{}': {}", path.string(), e.what()));
    }
}

std::vector<std::string> TraitDefinitions::all_texts() const {
    std::vector<std::string> out;
    for (const auto& [t, d] : defs_) {
        out.push_back(d.definition);
        out.push_back(d.low);
        out.push_back(d.high);
    }
    return out;
}

ChatRequest build_generation_prompt(const PersonalityProfile& profile, const Question& question,
                                    const TraitDefinitions& definitions, const std::string& model,
                                    const Temperature& temperature, const PromptTemplates& templates) {
    PromptTemplate personality_line(templates.generation_personality_line);
    PromptTemplate definition_lines(templates.generation_definition_lines);

    std::vector<std::string> personality, defs;
    for (const auto& [trait, score] : profile.scores()) {
        const auto* d = definitions.find(trait);
        if (d == nullptr) {
            throw TemplateError(fmt::format("no definitions for {}", trait_key(trait)));
        }
        personality.push_back(personality_line.render(
            {{"TRAIT", std::string(trait_display_name(trait))}, {"SCORE", std::to_string(score.value())}}));
        defs.push_back(definition_lines.render(
            {{"DEFINITION OF LOW SCORE", d->low}, {"DEFINITION OF HIGH SCORE", d->high}}));
    }

    ChatRequest req;
    req.model = model;
    req.temperature = temperature;
    req.system_prompt = PromptTemplate(templates.generation_system)
                            .render({{"PERSONALITY LINES", text::join(personality, "\n")},
                                     {"RATING LINE", templates.generation_rating_line},
                                     {"DEFINITION LINES", text::join(defs, "\n")}});
    req.user_prompt = PromptTemplate(templates.generation_user).render({{"QUESTION", question.text}});
    return req;
}

std::vector<Job> single_trait_grid(const std::vector<Trait>& traits, const std::vector<int>& scores,
                                   const std::vector<Temperature>& temperatures,
                                   const std::vector<Question>& questions) {
    if (questions.empty()) throw ValueError("the generation grid needs at least one question");
    std::vector<Job> jobs;
    jobs.reserve(traits.size() * scores.size() * temperatures.size() * questions.size());
    for (auto trait : traits) {
        for (int s : scores) {
            PromptScore score{s};
            for (const auto& temp : temperatures) {
                for (const auto& q : questions) {
                    jobs.push_back(Job{fmt::format("{}-s{}-t{}-{}", trait_key(trait), s, temp.text(), q.id),
                                       PersonalityProfile::single(trait, score), q, temp});
                }
            }
        }
    }
    return jobs;
}

void SamplerConfig::validate() const {
    for (double v : variance) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ValueError("sampler variances must be >= 0");
    }
    for (double m : mean) {
        if (!std::isfinite(m)) throw ValueError("sampler means must be finite");
    }
    if (count < 1) throw ValueError("sampler count must be >= 1");
}

NormalSampler::NormalSampler(std::uint64_t seed) : engine_(seed) {}

double NormalSampler::uniform() {
    // 53 random bits -> [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double NormalSampler::next() {
    if (spare_) {
        double s = *spare_;
        spare_.reset();
        return s;
    }
    double u1 = 1.0 - uniform(); // (0, 1]
    double u2 = uniform();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    return radius * std::cos(angle);
}

PromptScore discretize_score(double draw) noexcept {
    double r = std::round(draw);
    if (!(r >= 1.0)) r = 1.0; // also catches NaN
    if (r > 5.0) r = 5.0;
    return PromptScore{static_cast<int>(r)};
}

std::vector<PersonalityProfile> sample_profiles(const SamplerConfig& config) {
    config.validate();
    NormalSampler sampler(config.seed);
    std::vector<PersonalityProfile> out;
    out.reserve(static_cast<std::size_t>(config.count));
    for (int i = 0; i < config.count; ++i) {
        std::array<PromptScore, 5> scores{PromptScore{1}, PromptScore{1}, PromptScore{1}, PromptScore{1},
                                          PromptScore{1}};
        for (std::size_t t = 0; t < 5; ++t) {
            double z = sampler.next();
            double draw = config.mean[t] + std::sqrt(config.variance[t]) * z;
            scores[t] = discretize_score(draw);
        }
        out.push_back(PersonalityProfile::full(scores));
    }
    return out;
}

std::vector<Job> full_profile_jobs(const std::vector<PersonalityProfile>& profiles,
                                   const std::vector<Temperature>& temperatures,
                                   const std::vector<Question>& questions) {
    if (questions.empty()) throw ValueError("full-profile generation needs at least one question");
    std::vector<Job> jobs;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        for (const auto& temp : temperatures) {
            for (const auto& q : questions) {
                jobs.push_back(Job{fmt::format("full{:04}-t{}-{}", i, temp.text(), q.id), profiles[i], q, temp});
            }
        }
    }
    return jobs;
}

GenerationResult generate_texts(ChatProvider& provider, const std::vector<Job>& jobs,
                                const TraitDefinitions& definitions, const std::string& model,
                                int workers, const PromptTemplates& templates) {
    std::vector<std::optional<GeneratedText>> slots(jobs.size());
    std::vector<std::optional<std::string>> errors(jobs.size());
    parallel_for(jobs.size(), workers, [&](std::size_t i) {
        const auto& job = jobs[i];
        try {
            auto req = build_generation_prompt(job.profile, job.question, definitions, model,
                                               job.temperature, templates);
            auto resp = provider.complete(req);
            GeneratedText t;
            t.id = fmt::format("{}:{}", model, job.id);
            t.model = model;
            t.temperature = job.temperature;
            t.question_id = job.question.id;
            t.question = job.question.text;
            t.profile = job.profile;
            t.text = resp.text;
            slots[i] = std::move(t);
        } catch (const AuthError&) {
            throw;
        } catch (const Error& e) {
            errors[i] = e.what();
        }
    });
    GenerationResult result;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (slots[i]) {
            result.texts.push_back(std::move(*slots[i]));
        } else {
            result.failures.push_back({fmt::format("{}:{}", model, jobs[i].id), errors[i].value_or("unknown")});
        }
    }
    return result;
}

const std::vector<std::string>& default_leakage_lexicon() {
    static const std::vector<std::string> kTerms{
        "openness to experience", "openness", "conscientiousness", "extraversion", "extroversion",
        "agreeableness", "neuroticism", "big five", "personality trait", "personality traits",
        "my personality", "personality score", "trait score", "rated as", "score of 1", "score of 2",
        "score of 3", "score of 4", "score of 5", "score"};
    return kTerms;
}

LeakageDetector::LeakageDetector(std::vector<std::string> terms) {
    for (auto& t : terms) {
        auto lowered = text::to_lower_ascii(text::trim(t));
        if (!lowered.empty()) terms_.push_back(std::move(lowered));
    }
    std::sort(terms_.begin(), terms_.end(), [](const std::string& a, const std::string& b) {
        return a.size() != b.size() ? a.size() > b.size() : a < b;
    });
    terms_.erase(std::unique(terms_.begin(), terms_.end()), terms_.end());
}

LeakageDetector LeakageDetector::with_default_lexicon() { return LeakageDetector(default_leakage_lexicon()); }

LeakageDetector LeakageDetector::load(const fs::path& path) { return LeakageDetector(io::read_word_list(path)); }

std::vector<LeakageMatch> LeakageDetector::detect(std::string_view raw) const {
    auto hay = text::to_lower_ascii(raw);
    std::vector<LeakageMatch> out;
    std::size_t pos = 0;
    while (pos < hay.size()) {
        bool at_boundary = pos == 0 || !text::is_word_byte(static_cast<unsigned char>(hay[pos - 1]));
        const std::string* hit = nullptr;
        if (at_boundary) {
            for (const auto& term : terms_) {
                auto end = pos + term.size();
                if (end > hay.size() || hay.compare(pos, term.size(), term) != 0) continue;
                if (end < hay.size() && text::is_word_byte(static_cast<unsigned char>(hay[end]))) continue;
                hit = &term;
                break;
            }
        }
        if (hit != nullptr) {
            out.push_back({CharRange{pos, pos + hit->size()}, std::string(raw.substr(pos, hit->size()))});
            pos += hit->size();
        } else {
            ++pos;
        }
    }
    return out;
}

std::vector<LeakageMatch> detect_trait_leakage(std::string_view text) {
    static const LeakageDetector kDefault = LeakageDetector::with_default_lexicon();
    return kDefault.detect(text);
}

MaskedText mask_leakage(std::string_view text, const std::vector<CharRange>& spans) {
    auto sorted = spans;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (sorted[i].end < sorted[i].begin || sorted[i].end > text.size()) {
            throw RangeError(fmt::format("span [{}, {}) outside text of length {}", sorted[i].begin,
                                         sorted[i].end, text.size()));
        }
        if (sorted[i].begin == sorted[i].end) throw RangeError("empty mask span");
        if (i > 0 && sorted[i].begin < sorted[i - 1].end) throw RangeError("mask spans overlap");
    }
    MaskedText out;
    std::size_t cursor = 0;
    for (const auto& r : sorted) {
        out.text.append(text.substr(cursor, r.begin - cursor));
        auto start = out.text.size();
        out.text.append(kMaskToken);
        out.masked_ranges.push_back({start, out.text.size()});
        out.originals.emplace_back(text.substr(r.begin, r.size()));
        cursor = r.end;
    }
    out.text.append(text.substr(cursor));
    out.edited = !sorted.empty();
    return out;
}

std::string unmask(const MaskedText& masked) {
    std::string out;
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < masked.masked_ranges.size(); ++i) {
        const auto& r = masked.masked_ranges[i];
        out.append(masked.text, cursor, r.begin - cursor);
        out.append(masked.originals[i]);
        cursor = r.end;
    }
    out.append(masked.text, cursor);
    return out;
}

void apply_leakage_masking(GeneratedText& text, const LeakageDetector& detector) {
    const std::string& source = text.original_text ? *text.original_text : text.text;
    auto matches = detector.detect(source);
    if (matches.empty()) return;
    std::vector<CharRange> spans;
    for (const auto& m : matches) spans.push_back(m.range);
    auto masked = mask_leakage(source, spans);
    text.original_text = source;
    text.masked_spans = spans;
    text.text = std::move(masked.text);
    text.edited = true;
}

} // namespace personaforge::generation
