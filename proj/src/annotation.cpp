#include "personaforge/annotation.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "personaforge/io.hpp"
#include "personaforge/metrics.hpp"

namespace personaforge::annotation {

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path) {
    std::vector<AnnotationRecord> out;
    for (const auto& j : io::read_jsonl(path)) out.push_back(annotation_record_from_json(j));
    return out;
}

std::string_view to_string(ViolationKind k) noexcept {
    switch (k) {
    case ViolationKind::MissingRater: return "MissingRater";
    case ViolationKind::DuplicateAnnotator: return "DuplicateAnnotator";
    case ViolationKind::UnknownText: return "UnknownText";
    case ViolationKind::SpanOutOfBounds: return "SpanOutOfBounds";
    case ViolationKind::SpanMismatch: return "SpanMismatch";
    case ViolationKind::UnknownReason: return "UnknownReason";
    }
    return "unknown";
}

ValidationReport validate_annotations(const std::vector<AnnotationRecord>& records,
                                      const std::vector<GeneratedText>& texts, const ValidationOptions& options) {
    std::map<std::string, const GeneratedText*, std::less<>> by_id;
    for (const auto& t : texts) by_id[t.id] = &t;

    ValidationReport report;
    std::map<std::pair<std::string, Trait>, std::vector<std::string>> raters;
    for (const auto& r : records) {
        raters[{r.text_id, r.trait}].push_back(r.annotator_id);
        auto it = by_id.find(r.text_id);
        if (it == by_id.end()) {
            report.violations.push_back({ViolationKind::UnknownText, r.text_id, r.annotator_id, r.trait,
                                         "text id not in the dataset"});
            continue;
        }
        const std::string& body = it->second->text;
        for (const auto& span : r.spans) {
            if (span.range.end < span.range.begin || span.range.end > body.size()) {
                report.violations.push_back(
                    {ViolationKind::SpanOutOfBounds, r.text_id, r.annotator_id, r.trait,
                     fmt::format("[{}, {}) outside text of length {}", span.range.begin, span.range.end, body.size())});
            } else if (!span.surface.empty() &&
                       body.compare(span.range.begin, span.range.size(), span.surface) != 0) {
                report.violations.push_back({ViolationKind::SpanMismatch, r.text_id, r.annotator_id, r.trait,
                                             fmt::format("[{}, {}) does not read '{}'", span.range.begin,
                                                         span.range.end, span.surface)});
            }
        }
        if (options.reasons) {
            for (const auto& reason : r.reasons) {
                if (!options.reasons->contains(reason)) {
                    report.violations.push_back(
                        {ViolationKind::UnknownReason, r.text_id, r.annotator_id, r.trait, reason});
                }
            }
        }
    }
    for (auto& [key, ids] : raters) {
        std::sort(ids.begin(), ids.end());
        auto dup = std::adjacent_find(ids.begin(), ids.end());
        if (dup != ids.end()) {
            report.violations.push_back({ViolationKind::DuplicateAnnotator, key.first, *dup, key.second,
                                         "annotator rated this text and trait more than once"});
        }
        if (ids.size() != options.raters_per_text) {
            report.violations.push_back({ViolationKind::MissingRater, key.first, {}, key.second,
                                         fmt::format("{} ratings, expected {}", ids.size(),
                                                     options.raters_per_text)});
        }
    }
    return report;
}

Json to_json(const FinalScore& f) {
    Json rater = Json::array();
    for (const auto& s : f.rater_scores) rater.push_back(personaforge::to_json(s));
    return Json{{"text_id", f.text_id},
                {"trait", trait_key(f.trait)},
                {"score", personaforge::to_json(f.score)},
                {"mean", f.mean ? Json(*f.mean) : Json(nullptr)},
                {"rater_scores", rater}};
}

FinalScore final_score_from_json(const Json& j) {
    try {
        FinalScore f;
        f.text_id = j.at("text_id").get<std::string>();
        f.trait = parse_trait(j.at("trait").get<std::string>());
        f.score = annotation_score_from_json(j.at("score"));
        if (auto it = j.find("mean"); it != j.end() && !it->is_null()) f.mean = it->get<double>();
        if (auto it = j.find("rater_scores"); it != j.end()) {
            for (const auto& s : *it) f.rater_scores.push_back(annotation_score_from_json(s));
        }
        return f;
    } catch (const Json::exception& e) {
        throw ValueError(fmt::format("final score record: {}", e.what()));
    }
}

std::vector<FinalScore> load_final_scores(const std::filesystem::path& path) {
    std::vector<FinalScore> out;
    for (const auto& j : io::read_jsonl(path)) out.push_back(final_score_from_json(j));
    return out;
}

namespace {

using Grouped = std::map<std::pair<std::string, std::size_t>, std::vector<const AnnotationRecord*>>;

Grouped group_records(const std::vector<AnnotationRecord>& records) {
    Grouped g;
    for (const auto& r : records) g[{r.text_id, trait_index(r.trait)}].push_back(&r);
    for (auto& [key, rs] : g) {
        std::sort(rs.begin(), rs.end(), [](const auto* a, const auto* b) { return a->annotator_id < b->annotator_id; });
    }
    return g;
}

} // namespace

std::vector<FinalScore> aggregate_final_scores(const std::vector<AnnotationRecord>& records) {
    std::vector<FinalScore> out;
    for (const auto& [key, rs] : group_records(records)) {
        FinalScore f;
        f.text_id = key.first;
        f.trait = kAllTraits[key.second];
        double sum = 0.0;
        int numeric = 0;
        for (const auto* r : rs) {
            f.rater_scores.push_back(r->score);
            if (r->score.is_numeric()) {
                sum += r->score.value();
                ++numeric;
            }
        }
        f.score = metrics::majority_vote(f.rater_scores);
        if (numeric > 0) f.mean = sum / numeric;
        out.push_back(std::move(f));
    }
    return out;
}

std::map<Trait, std::optional<double>> interannotator_kappa(const std::vector<AnnotationRecord>& records,
                                                            KappaLevel level) {
    std::map<Trait, std::vector<std::vector<int>>> tables;
    for (const auto& [key, rs] : group_records(records)) {
        std::vector<int> row(level == KappaLevel::Presence ? 2 : 4, 0);
        for (const auto* r : rs) {
            if (level == KappaLevel::Presence) {
                ++row[r->score.is_nd() ? 1 : 0];
            } else {
                ++row[static_cast<std::size_t>(metrics::score_to_group(r->score))];
            }
        }
        tables[kAllTraits[key.second]].push_back(std::move(row));
    }
    std::map<Trait, std::optional<double>> out;
    for (const auto& [trait, counts] : tables) {
        try {
            out[trait] = metrics::fleiss_kappa(counts);
        } catch (const DegenerateAgreement&) {
            out[trait] = std::nullopt;
        }
    }
    return out;
}

std::vector<AnnotationBatch> sample_batches(const std::vector<GeneratedText>& texts,
                                            const std::vector<std::string>& annotators, const BatchPlan& plan) {
    if (plan.batch_size == 0) throw ValueError("batch size must be >= 1");
    if (annotators.size() < plan.raters_per_text) {
        throw ValueError(fmt::format("{} annotators cannot give {} ratings per text", annotators.size(),
                                     plan.raters_per_text));
    }
    std::map<std::pair<std::string, std::string>, std::vector<std::string>> strata;
    for (const auto& t : texts) strata[{t.model, t.temperature.text()}].push_back(t.id);

    std::mt19937_64 engine(plan.seed);
    for (auto& [key, ids] : strata) {
        std::sort(ids.begin(), ids.end());
        // Fisher-Yates, plain modulo
        for (std::size_t i = ids.size(); i > 1; --i) {
            std::swap(ids[i - 1], ids[engine() % i]);
        }
    }

    std::vector<std::string> picked;
    for (std::size_t round = 0; picked.size() < plan.total_texts; ++round) {
        bool any = false;
        for (const auto& [key, ids] : strata) {
            if (round < ids.size() && picked.size() < plan.total_texts) {
                picked.push_back(ids[round]);
                any = true;
            }
        }
        if (!any) break;
    }

    std::vector<AnnotationBatch> batches;
    for (std::size_t start = 0; start < picked.size(); start += plan.batch_size) {
        AnnotationBatch b;
        auto index = batches.size();
        b.id = fmt::format("batch-{:03}", index + 1);
        auto end = std::min(picked.size(), start + plan.batch_size);
        b.text_ids.assign(picked.begin() + static_cast<std::ptrdiff_t>(start),
                          picked.begin() + static_cast<std::ptrdiff_t>(end));
        for (std::size_t r = 0; r < plan.raters_per_text; ++r) {
            b.annotators.push_back(annotators[(index * plan.raters_per_text + r) % annotators.size()]);
        }
        batches.push_back(std::move(b));
    }
    return batches;
}

} // namespace personaforge::annotation
