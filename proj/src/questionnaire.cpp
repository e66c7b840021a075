#include "personaforge/questionnaire.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "personaforge/io.hpp"
#include "personaforge/parallel.hpp"
#include "personaforge/text_util.hpp"

namespace personaforge::questionnaire {

namespace fs = std::filesystem;

Questionnaire::Questionnaire(std::vector<Item> items) : items_(std::move(items)) {
    std::set<std::string> ids;
    std::set<std::string> statements;
    for (const auto& item : items_) {
        if (item.id.empty() || item.statement.empty()) {
            throw ValueError("questionnaire items need an id and a statement");
        }
        if (!ids.insert(item.id).second) throw ValueError("duplicate item id " + item.id);
        if (!statements.insert(item.statement).second) {
            throw ValueError("duplicate statement: " + item.statement);
        }
    }
}

Questionnaire Questionnaire::from_json(const Json& j) {
    const Json& arr = j.is_object() && j.contains("items") ? j.at("items") : j;
    if (!arr.is_array()) throw ValueError("questionnaire must be a JSON array of items");
    std::vector<Item> items;
    for (const auto& e : arr) {
        Item it;
        it.id = e.at("id").is_string() ? e.at("id").get<std::string>() : e.at("id").dump();
        it.statement = e.at("statement").get<std::string>();
        it.trait = parse_trait(e.at("trait").get<std::string>());
        it.reverse_keyed = e.value("reverse_keyed", false);
        items.push_back(std::move(it));
    }
    return Questionnaire(std::move(items));
}

Questionnaire Questionnaire::load(const fs::path& path) {
    try {
        return from_json(Json::parse(io::read_file(path)));
    } catch (const Json::exception& e) {
        throw ValueError(fmt::format("questionnaire '{}': {}", path.string(), e.what()));
    }
}

std::vector<Item> Questionnaire::items_for(Trait t) const {
    std::vector<Item> out;
    std::copy_if(items_.begin(), items_.end(), std::back_inserter(out),
                 [t](const Item& i) { return i.trait == t; });
    return out;
}

std::string_view to_string(Level l) noexcept { return l == Level::High ? "high" : "low"; }

Level parse_level(std::string_view s) {
    auto f = text::to_lower_ascii(text::trim(s));
    if (f == "high") return Level::High;
    if (f == "low") return Level::Low;
    throw ValueError(fmt::format("unknown level '{}'", s));
}

const std::array<std::string, 5>& likert_options() {
    static const std::array<std::string, 5> kOptions{
        "disagree strongly with the statement", "disagree a little with the statement",
        "agree nor disagree with the statement", "agree a little with the statement",
        "agree strongly with the statement"};
    return kOptions;
}

LikertLevel::LikertLevel(int ordinal) : ordinal_(ordinal) {
    if (ordinal < 1 || ordinal > 5) throw ValueError(fmt::format("Likert ordinal {} outside 1..5", ordinal));
}

std::string_view LikertLevel::option_text() const noexcept { return likert_options()[ordinal_ - 1]; }

void TraitPrompts::set(Trait t, Level l, std::string text) { prompts_[{t, l}] = std::move(text); }

const std::string& TraitPrompts::get(Trait t, Level l) const {
    auto it = prompts_.find({t, l});
    if (it == prompts_.end()) {
        throw TemplateError(fmt::format("no trait prompt for {} / {}", trait_key(t), to_string(l)));
    }
    return it->second;
}

TraitPrompts TraitPrompts::load_dir(const fs::path& dir) {
    TraitPrompts tp;
    for (auto t : kAllTraits) {
        for (auto l : {Level::High, Level::Low}) {
            auto p = dir / fmt::format("{}_{}.txt", trait_key(t), to_string(l));
            if (fs::exists(p)) tp.set(t, l, std::string(text::trim(io::read_file(p))));
        }
    }
    return tp;
}

Json to_json(const RunRecord& r) {
    Json j{{"model", r.model},
           {"trait", trait_key(r.trait)},
           {"level", to_string(r.level)},
           {"temperature", r.temperature.text()},
           {"item_id", r.item_id},
           {"repetition", r.repetition},
           {"raw_response", r.raw_response},
           {"likert", r.likert ? Json(r.likert->ordinal()) : Json(nullptr)},
           {"item_score", r.item_score ? Json(*r.item_score) : Json(nullptr)}};
    if (r.error) j["error"] = *r.error;
    return j;
}

RunRecord run_record_from_json(const Json& j) {
    RunRecord r;
    r.model = j.at("model").get<std::string>();
    r.trait = parse_trait(j.at("trait").get<std::string>());
    r.level = parse_level(j.at("level").get<std::string>());
    r.temperature = Temperature::parse(j.at("temperature").get<std::string>());
    r.item_id = j.at("item_id").get<std::string>();
    r.repetition = j.value("repetition", 0);
    r.raw_response = j.value("raw_response", std::string{});
    if (j.contains("likert") && !j.at("likert").is_null()) r.likert = LikertLevel(j.at("likert").get<int>());
    if (j.contains("item_score") && !j.at("item_score").is_null()) r.item_score = j.at("item_score").get<int>();
    if (j.contains("error")) r.error = j.at("error").get<std::string>();
    if (r.likert.has_value() != r.item_score.has_value()) {
        throw ValueError("record must carry both likert and item_score, or neither");
    }
    return r;
}

ChatRequest build_questionnaire_prompt(Trait /*trait*/, Level /*level*/, const Item& item,
                                       const std::string& trait_prompt_text,
                                       const PromptOptions& options) {
    const auto& t = options.templates ? *options.templates : PromptTemplates::defaults();
    ChatRequest req;
    req.model = options.model;
    req.temperature = options.temperature;
    req.system_prompt = PromptTemplate(t.questionnaire_system).render({{"TRAIT PROMPT", trait_prompt_text}});
    req.user_prompt = PromptTemplate(t.questionnaire_user).render({{"STATEMENT", item.statement}});
    return req;
}

LikertLevel parse_likert_response(std::string_view raw) {
    auto hay = text::to_lower_ascii(text::trim(raw));
    struct Hit {
        std::size_t begin, end;
        int ordinal;
    };
    std::vector<Hit> hits;
    const auto& opts = likert_options();
    for (int i = 0; i < 5; ++i) {
        const auto& needle = opts[static_cast<std::size_t>(i)];
        for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) {
            hits.push_back({pos, pos + needle.size(), i + 1});
        }
    }
    std::set<int> found;
    for (const auto& h : hits) {
        bool nested = std::any_of(hits.begin(), hits.end(), [&](const Hit& o) {
            return &o != &h && o.begin <= h.begin && h.end <= o.end && (o.end - o.begin) > (h.end - h.begin);
        });
        if (!nested) found.insert(h.ordinal);
    }
    if (found.empty()) throw UnparseableResponse(fmt::format("no answer option in '{}'", raw));
    if (found.size() > 1) throw AmbiguousResponse(fmt::format("several answer options in '{}'", raw));
    return LikertLevel(*found.begin());
}

int score_item(LikertLevel likert, bool reverse_keyed) noexcept {
    return reverse_keyed ? 6 - likert.ordinal() : likert.ordinal();
}

double aggregate_trait_score(const std::vector<RunRecord>& records) {
    if (records.empty()) throw EmptyInput("no questionnaire records to aggregate");
    const auto& first = records.front();
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : records) {
        if (r.trait != first.trait || r.model != first.model || r.level != first.level) {
            throw ValueError("aggregate_trait_score needs records of one trait, model and level");
        }
        if (!r.item_score) continue;
        sum += *r.item_score;
        ++n;
    }
    if (n == 0) throw EmptyInput("every record failed to parse");
    return sum / static_cast<double>(n);
}

std::vector<RunRecord> run_questionnaire(ChatProvider& provider, const Questionnaire& questionnaire,
                                         const TraitPrompts& prompts, const RunSpec& spec,
                                         const PromptTemplates& templates) {
    auto items = questionnaire.items_for(spec.trait);
    if (items.empty()) {
        throw ValueError(fmt::format("questionnaire has no items for {}", trait_key(spec.trait)));
    }
    if (spec.repetitions < 1) throw ValueError("repetitions must be >= 1");
    const auto& persona = prompts.get(spec.trait, spec.level);
    PromptOptions opts{spec.model, spec.temperature, &templates};

    auto reps = static_cast<std::size_t>(spec.repetitions);
    std::vector<RunRecord> records(items.size() * reps);
    parallel_for(records.size(), spec.workers, [&](std::size_t idx) {
        const auto& item = items[idx / reps];
        int rep = static_cast<int>(idx % reps);
        auto req = build_questionnaire_prompt(spec.trait, spec.level, item, persona, opts);
        req.sample = rep;
        auto resp = provider.complete(req);

        RunRecord r;
        r.model = spec.model;
        r.trait = spec.trait;
        r.level = spec.level;
        r.temperature = spec.temperature;
        r.item_id = item.id;
        r.repetition = rep;
        r.raw_response = resp.text;
        try {
            auto lk = parse_likert_response(resp.text);
            r.likert = lk;
            r.item_score = score_item(lk, item.reverse_keyed);
        } catch (const UnparseableResponse&) {
            r.error = "unparseable";
        } catch (const AmbiguousResponse&) {
            r.error = "ambiguous";
        }
        records[idx] = std::move(r);
    });
    return records;
}

std::vector<ScoreDistribution> score_distributions(const std::vector<RunRecord>& records) {
    struct Key {
        std::string model;
        Trait trait;
        Level level;
        std::string temp;
        bool operator==(const Key&) const = default;
    };
    std::vector<Key> order;
    std::vector<ScoreDistribution> out;
    // per key: repetition -> (sum, n)
    std::vector<std::map<int, std::pair<double, int>>> per_rep;
    for (const auto& r : records) {
        Key k{r.model, r.trait, r.level, r.temperature.text()};
        auto it = std::find(order.begin(), order.end(), k);
        std::size_t idx = static_cast<std::size_t>(it - order.begin());
        if (it == order.end()) {
            order.push_back(k);
            ScoreDistribution d;
            d.model = r.model;
            d.trait = r.trait;
            d.level = r.level;
            d.temperature = r.temperature;
            out.push_back(std::move(d));
            per_rep.emplace_back();
        }
        if (!r.item_score) continue;
        auto& acc = per_rep[idx][r.repetition];
        acc.first += *r.item_score;
        acc.second += 1;
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto& d = out[i];
        double total = 0.0;
        for (const auto& [rep, acc] : per_rep[i]) {
            double s = acc.first / acc.second;
            d.scores.push_back(s);
            total += s;
            auto bin = static_cast<int>((s - 1.0) / 0.5);
            d.bins[static_cast<std::size_t>(std::clamp(bin, 0, 7))] += 1;
        }
        d.mean = d.scores.empty() ? std::numeric_limits<double>::quiet_NaN()
                                  : total / static_cast<double>(d.scores.size());
    }
    return out;
}

metrics::RatingMatrix reliability_matrix(const std::vector<RunRecord>& records,
                                         const Questionnaire& questionnaire, const std::string& model,
                                         Trait trait) {
    auto items = questionnaire.items_for(trait);
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < items.size(); ++i) col[items[i].id] = i;

    // (level, temperature, repetition) -> item scores
    std::map<std::tuple<int, std::string, int>, std::vector<std::optional<int>>> rows;
    for (const auto& r : records) {
        if (r.model != model || r.trait != trait) continue;
        auto c = col.find(r.item_id);
        if (c == col.end()) continue;
        auto& row = rows[{static_cast<int>(r.level), r.temperature.text(), r.repetition}];
        row.resize(items.size());
        row[c->second] = r.item_score;
    }
    std::vector<std::vector<double>> complete;
    for (const auto& [key, row] : rows) {
        if (std::all_of(row.begin(), row.end(), [](const auto& v) { return v.has_value(); })) {
            std::vector<double> vals;
            for (const auto& v : row) vals.push_back(*v);
            complete.push_back(std::move(vals));
        }
    }
    if (complete.empty()) return metrics::RatingMatrix(0, items.size(), {});
    return metrics::RatingMatrix::from_rows(complete);
}

} // namespace personaforge::questionnaire
