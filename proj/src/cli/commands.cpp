#include <algorithm>
#include <atomic>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "manifest.hpp"
#include "personaforge/annotation.hpp"
#include "personaforge/classifier.hpp"
#include "personaforge/cli.hpp"
#include "personaforge/generation.hpp"
#include "personaforge/io.hpp"
#include "personaforge/linguistics.hpp"
#include "personaforge/metrics.hpp"
#include "personaforge/questionnaire.hpp"
#include "personaforge/text_util.hpp"

namespace personaforge::cli {

namespace {

class UsageError : public Error {
public:
    using Error::Error;
};

class CountingProvider final : public ChatProvider {
public:
    explicit CountingProvider(std::shared_ptr<ChatProvider> inner) : inner_(std::move(inner)) {}
    ChatResponse complete(const ChatRequest& request) override {
        ++calls_;
        return inner_->complete(request);
    }
    std::size_t calls() const noexcept { return calls_.load(); }

private:
    std::shared_ptr<ChatProvider> inner_;
    std::atomic<std::size_t> calls_{0};
};

struct Stack {
    std::shared_ptr<ChatProvider> provider;
    std::shared_ptr<CachingProvider> cache;
    std::shared_ptr<CountingProvider> counter;

    ProviderStats stats() const {
        if (cache) return cache->stats();
        return {counter->calls(), 0};
    }
};

Stack make_stack(const Config& cfg, const ProviderConfig& pc) {
    auto built = make_provider_stack(pc, cfg.cache ? cfg.effective_cache_dir() / pc.name : fs::path{});
    Stack s;
    s.cache = built.cache;
    s.counter = std::make_shared<CountingProvider>(built.provider);
    s.provider = s.counter;
    return s;
}

Json num(double v) {
    if (std::isnan(v)) return nullptr;
    return std::stod(io::format_real(v, 6));
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    for (auto& part : text::split(s, ',')) {
        auto t = text::trim(part);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

class Run {
public:
    Run(Config cfg, std::string subcommand) : cfg_(std::move(cfg)) {
        manifest_.subcommand = std::move(subcommand);
        manifest_.config = config_snapshot(cfg_);
    }

    const Config& cfg() const noexcept { return cfg_; }
    fs::path out(const std::string& name) const { return cfg_.out_dir / name; }

    void input(const fs::path& path) {
        if (!fs::exists(path)) throw UsageError(fmt::format("input file '{}' does not exist", path.string()));
        if (fs::is_directory(path)) {
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(path)) {
                if (e.is_regular_file()) files.push_back(e.path());
            }
            std::sort(files.begin(), files.end());
            for (const auto& f : files) add_input(f);
        } else {
            add_input(path);
        }
    }

    void write(const std::string& name, const std::string& content) {
        io::write_file(out(name), content);
        manifest_.outputs.push_back({name, io::sha256_hex(content)});
    }

    void count(const Stack& s) {
        auto st = s.stats();
        manifest_.provider_calls += st.provider_calls;
        manifest_.cache_hits += st.cache_hits;
    }

    void warn(std::string message) {
        std::cerr << "warning: " << message << "\n";
        manifest_.warnings.push_back(std::move(message));
    }

    void finish() {
        auto body = manifest_.to_json(manifest_timestamp()).dump(2) + "\n";
        io::write_file(out("manifest_" + manifest_.subcommand + ".json"), body);
    }

private:
    void add_input(const fs::path& path) {
        auto rel = path.lexically_relative(cfg_.out_dir);
        std::string shown = (!rel.empty() && *rel.begin() != "..") ? rel.generic_string() : path.filename().string();
        manifest_.inputs.push_back({shown, io::file_sha256(path)});
    }

    Config cfg_;
    RunManifest manifest_;
};

std::string jsonl(const std::vector<Json>& rows) { return io::to_jsonl(rows); }

std::vector<GeneratedText> read_texts(const fs::path& path) {
    std::vector<GeneratedText> out;
    for (const auto& j : io::read_jsonl(path)) out.push_back(generated_text_from_json(j));
    return out;
}

// --- questionnaire --------------------------------------------------------

int cmd_questionnaire(Run& run) {
    const auto& cfg = run.cfg();
    const auto& qs = cfg.questionnaire;
    run.input(qs.items);
    run.input(qs.trait_prompts);
    auto q = questionnaire::Questionnaire::load(qs.items);
    auto prompts = questionnaire::TraitPrompts::load_dir(qs.trait_prompts);
    for (auto t : qs.traits) {
        for (auto l : qs.levels) {
            try {
                (void)prompts.get(t, l);
            } catch (const TemplateError& e) {
                throw ConfigError(e.what());
            }
        }
    }
    auto subjects = cfg.subject_providers();
    if (subjects.empty()) throw ConfigError("no providers to answer the questionnaire");
    auto templates = cfg.templates();

    std::vector<questionnaire::RunRecord> records;
    bool failed = false;
    for (const auto* pc : subjects) {
        auto stack = make_stack(cfg, *pc);
        for (auto trait : qs.traits) {
            for (auto level : qs.levels) {
                for (const auto& temp : qs.temperatures) {
                    questionnaire::RunSpec spec{pc->model, trait, level, temp, qs.repetitions, cfg.workers};
                    try {
                        auto rs = questionnaire::run_questionnaire(*stack.provider, q, prompts, spec, templates);
                        records.insert(records.end(), rs.begin(), rs.end());
                    } catch (const ConfigError&) {
                        throw;
                    } catch (const Error& e) {
                        failed = true;
                        run.warn(fmt::format("{} {} {} t={}: {}", pc->name, trait_key(trait),
                                             questionnaire::to_string(level), temp.text(), e.what()));
                    }
                }
            }
        }
        run.count(stack);
    }

    std::vector<Json> rows;
    std::size_t unreadable = 0;
    for (const auto& r : records) {
        rows.push_back(questionnaire::to_json(r));
        if (r.error) ++unreadable;
    }
    run.write("questionnaire_runs.jsonl", jsonl(rows));
    if (unreadable > 0) run.warn(fmt::format("{} answers could not be read as a Likert option", unreadable));

    io::CsvWriter hist({"model", "trait", "level", "temperature", "runs", "mean", "bin_1.0", "bin_1.5", "bin_2.0",
                        "bin_2.5", "bin_3.0", "bin_3.5", "bin_4.0", "bin_4.5"});
    for (const auto& d : questionnaire::score_distributions(records)) {
        std::vector<std::string> row{d.model, std::string(trait_key(d.trait)), std::string(questionnaire::to_string(d.level)),
                                     d.temperature.text(), std::to_string(d.scores.size()), io::format_real(d.mean)};
        for (int b : d.bins) row.push_back(std::to_string(b));
        hist.add_row(std::move(row));
    }
    run.write("questionnaire_histogram.csv", hist.str());

    io::CsvWriter rel({"model", "trait", "respondents", "items", "cronbach_alpha", "guttman_lambda6"});
    for (const auto* pc : subjects) {
        for (auto trait : qs.traits) {
            auto m = questionnaire::reliability_matrix(records, q, pc->model, trait);
            auto coef = [&](auto&& f) -> std::string {
                try {
                    return io::format_real(f(m));
                } catch (const Error& e) {
                    run.warn(fmt::format("{} {}: {}", pc->model, trait_key(trait), e.what()));
                    return "NA";
                }
            };
            rel.add_row({pc->model, std::string(trait_key(trait)), std::to_string(m.rows()), std::to_string(m.cols()),
                         coef([](const auto& x) { return metrics::cronbach_alpha(x); }),
                         coef([](const auto& x) { return metrics::guttman_lambda6(x); })});
        }
    }
    run.write("reliability.csv", rel.str());
    return failed ? kPartialFailure : kSuccess;
}

// --- generate ------------------------------------------------------------

int cmd_generate(Run& run) {
    const auto& cfg = run.cfg();
    const auto& gs = cfg.generation;
    run.input(gs.questions);
    run.input(gs.definitions);
    auto questions = generation::load_questions(gs.questions);
    auto defs = generation::TraitDefinitions::load(gs.definitions);
    auto detector = gs.leakage_lexicon ? generation::LeakageDetector::load(*gs.leakage_lexicon)
                                       : generation::LeakageDetector::with_default_lexicon();
    if (gs.leakage_lexicon) run.input(*gs.leakage_lexicon);

    if (gs.mode != "single" && gs.mode != "full" && gs.mode != "both") {
        throw UsageError(fmt::format("unknown generation mode '{}' (single, full or both)", gs.mode));
    }
    std::vector<generation::Job> jobs;
    if (gs.mode != "full") {
        jobs = generation::single_trait_grid(gs.traits, gs.scores, gs.temperatures, questions);
    }
    if (gs.mode != "single") {
        auto sampler = gs.sampler;
        sampler.seed = cfg.seed;
        auto profiles = generation::sample_profiles(sampler);
        auto full = generation::full_profile_jobs(profiles, gs.temperatures, questions);
        jobs.insert(jobs.end(), full.begin(), full.end());
    }
    auto subjects = cfg.subject_providers();
    if (subjects.empty()) throw ConfigError("no providers to generate texts");
    auto templates = cfg.templates();

    std::vector<Json> texts, failures;
    std::size_t masked = 0, total = 0;
    for (const auto* pc : subjects) {
        auto stack = make_stack(cfg, *pc);
        auto result = generation::generate_texts(*stack.provider, jobs, defs, pc->model, cfg.workers, templates);
        run.count(stack);
        for (auto& t : result.texts) {
            if (gs.mask) generation::apply_leakage_masking(t, detector);
            masked += t.edited ? 1 : 0;
            texts.push_back(to_json(t));
        }
        for (const auto& f : result.failures) failures.push_back(Json{{"job_id", f.job_id}, {"error", f.error}});
        total += jobs.size();
    }
    run.write("generated_texts.jsonl", jsonl(texts));
    run.write("generation_failures.jsonl", jsonl(failures));
    std::cerr << fmt::format("generated {} of {} texts, {} masked\n", texts.size(), total, masked);
    if (!failures.empty()) {
        run.warn(fmt::format("{} generation jobs failed", failures.size()));
        return kPartialFailure;
    }
    return kSuccess;
}

// --- classify ------------------------------------------------------------

int cmd_classify(Run& run, const std::optional<fs::path>& input) {
    const auto& cfg = run.cfg();
    auto in = input.value_or(run.out("generated_texts.jsonl"));
    run.input(in);
    run.input(cfg.generation.definitions);
    if (cfg.classifier.judge.empty()) throw ConfigError("no judge provider configured (classifier.judge)");
    const auto& judge = cfg.provider(cfg.classifier.judge);
    auto selector = classifier::parse_trait_selector(cfg.classifier.traits);

    classifier::ClassifierConfig cc;
    cc.model = judge.model;
    cc.definitions = generation::TraitDefinitions::load(cfg.generation.definitions);
    cc.retry_limit = cfg.classifier.retry_limit;
    cc.templates = cfg.templates();
    cc.validate();

    auto texts = read_texts(in);
    auto stack = make_stack(cfg, judge);
    auto result = classifier::classify_batch(*stack.provider, cc, texts, selector, cfg.workers);
    run.count(stack);

    std::vector<Json> outputs, failures;
    for (const auto& o : result.outputs) outputs.push_back(to_json(o));
    for (const auto& f : result.failures) {
        failures.push_back(Json{{"text_id", f.text_id}, {"trait", trait_key(f.trait)}, {"error", f.error}});
    }
    run.write("classifier_outputs.jsonl", jsonl(outputs));
    run.write("classifier_failures.jsonl", jsonl(failures));
    if (!failures.empty()) run.warn(fmt::format("{} of {} classifications failed", failures.size(), result.requested));
    return (result.requested > 0 && result.outputs.empty()) ? kPartialFailure : kSuccess;
}

// --- evaluate ------------------------------------------------------------

Json prf_json(const metrics::WeightedPrf& p) {
    return Json{{"precision", num(p.precision)}, {"recall", num(p.recall)}, {"f1", num(p.f1)}, {"support", p.support}};
}

int cmd_evaluate(Run& run) {
    const auto& cfg = run.cfg();
    const auto& es = cfg.evaluate;
    auto texts_path = run.out("generated_texts.jsonl");
    auto outputs_path = run.out("classifier_outputs.jsonl");
    run.input(texts_path);
    run.input(outputs_path);
    auto texts = read_texts(texts_path);
    std::vector<ClassifierOutput> outputs;
    for (const auto& j : io::read_jsonl(outputs_path)) outputs.push_back(classifier_output_from_json(j));
    if (outputs.empty()) throw EmptyInput("no classifier outputs to evaluate");

    std::map<std::string, const GeneratedText*, std::less<>> by_id;
    for (const auto& t : texts) by_id[t.id] = &t;
    std::vector<std::string> orphans;
    for (const auto& o : outputs) {
        if (!by_id.contains(o.text_id())) orphans.push_back(o.text_id());
    }
    if (!orphans.empty()) {
        throw AlignmentError(fmt::format("classifier outputs refer to unknown texts: {}", text::join(orphans, ", ")));
    }

    int status = kSuccess;
    Json report = Json::object();
    report["inputs"] = Json{{"texts", texts.size()}, {"classifier_outputs", outputs.size()}};

    // prompted level vs detected group
    std::map<Trait, std::vector<std::pair<PromptedLevel, ScoreGroup>>> pairs;
    std::vector<metrics::NdObservation> nd_obs;
    for (const auto& o : outputs) {
        auto prompted = by_id[o.text_id()]->profile.score(o.trait());
        if (!prompted) continue;
        auto level = metrics::prompt_score_to_level(*prompted);
        pairs[o.trait()].emplace_back(level, metrics::score_to_group(o.score()));
        nd_obs.push_back({o.trait(), level, o.score()});
    }
    auto nd = metrics::nd_distribution(nd_obs);

    Json prompted = Json::object();
    io::CsvWriter bias_csv({"trait", "high_row_low_share", "low_row_high_share", "mid_row_low_share",
                            "mid_row_high_share", "low_bias", "high_bias", "mid_follows_bias"});
    io::CsvWriter nd_csv({"trait", "total", "nd", "nd_rate", "share_L", "share_M", "share_H", "rate_L", "rate_M",
                          "rate_H"});
    for (auto trait : kAllTraits) {
        auto it = pairs.find(trait);
        if (it == pairs.end()) continue;
        auto cm = metrics::confusion_matrix(it->second);
        auto bias = metrics::detect_bias(cm, es.bias_threshold);
        auto props = cm.proportions();

        io::CsvWriter csv({"prompted_level", "low", "mid", "high", "nd", "total"});
        Json counts = Json::array(), proportions = Json::array();
        for (std::size_t r = 0; r < 3; ++r) {
            auto level = kAllPromptedLevels[r];
            std::vector<std::string> row{std::string(to_string(level))};
            Json crow = Json::array(), prow = Json::array();
            for (std::size_t c = 0; c < 4; ++c) {
                row.push_back(std::to_string(cm.counts[r][c]));
                crow.push_back(cm.counts[r][c]);
                prow.push_back(num(props[r][c]));
            }
            row.push_back(std::to_string(cm.row_total(level)));
            csv.add_row(std::move(row));
            counts.push_back(crow);
            proportions.push_back(prow);
        }
        run.write(fmt::format("confusion_{}.csv", trait_key(trait)), csv.str());

        const auto& s = nd.at(trait);
        auto yes = [](bool b) { return std::string(b ? "true" : "false"); };
        bias_csv.add_row({std::string(trait_key(trait)), io::format_real(bias.high_row_low_share),
                          io::format_real(bias.low_row_high_share), io::format_real(bias.mid_row_low_share),
                          io::format_real(bias.mid_row_high_share), yes(bias.low_bias), yes(bias.high_bias),
                          yes(bias.mid_follows_bias)});
        nd_csv.add_row({std::string(trait_key(trait)), std::to_string(s.total), std::to_string(s.nd),
                        io::format_real(s.rate), io::format_real(s.level_share[0]), io::format_real(s.level_share[1]),
                        io::format_real(s.level_share[2]), io::format_real(s.rate_by_level[0]),
                        io::format_real(s.rate_by_level[1]), io::format_real(s.rate_by_level[2])});

        prompted[std::string(trait_key(trait))] = Json{
            {"confusion",
             {{"rows", {"L", "M", "H"}},
              {"columns", {"low", "mid", "high", "nd"}},
              {"counts", counts},
              {"proportions", proportions}}},
            {"bias",
             {{"low_bias", bias.low_bias},
              {"high_bias", bias.high_bias},
              {"mid_follows_bias", bias.mid_follows_bias},
              {"high_row_low_share", num(bias.high_row_low_share)},
              {"low_row_high_share", num(bias.low_row_high_share)},
              {"mid_row_low_share", num(bias.mid_row_low_share)},
              {"mid_row_high_share", num(bias.mid_row_high_share)}}},
            {"non_distinguishable",
             {{"total", s.total},
              {"nd", s.nd},
              {"rate", num(s.rate)},
              {"level_share", {{"L", num(s.level_share[0])}, {"M", num(s.level_share[1])}, {"H", num(s.level_share[2])}}},
              {"rate_by_level",
               {{"L", num(s.rate_by_level[0])}, {"M", num(s.rate_by_level[1])}, {"H", num(s.rate_by_level[2])}}}}}};
    }
    report["bias_threshold"] = num(es.bias_threshold);
    report["prompted_vs_detected"] = prompted;
    run.write("bias_report.csv", bias_csv.str());
    run.write("nd_distribution.csv", nd_csv.str());

    // human judgments
    std::optional<std::vector<annotation::FinalScore>> humans;
    if (es.annotations) {
        run.input(*es.annotations);
        auto records = annotation::load_annotations(*es.annotations);
        annotation::ValidationOptions vo;
        if (es.reasons) {
            run.input(*es.reasons);
            auto words = io::read_word_list(*es.reasons);
            vo.reasons = std::set<std::string, std::less<>>(words.begin(), words.end());
        }
        auto validation = annotation::validate_annotations(records, texts, vo);
        std::vector<Json> violations;
        std::set<std::pair<std::string, Trait>> bad;
        for (const auto& v : validation.violations) {
            violations.push_back(Json{{"kind", annotation::to_string(v.kind)},
                                      {"text_id", v.text_id},
                                      {"annotator_id", v.annotator_id},
                                      {"trait", trait_key(v.trait)},
                                      {"detail", v.detail}});
            bad.insert({v.text_id, v.trait});
        }
        run.write("annotation_violations.jsonl", jsonl(violations));
        if (!bad.empty()) {
            run.warn(fmt::format("{} annotation problems; affected (text, trait) pairs are left out",
                                 validation.violations.size()));
            status = kPartialFailure;
            std::erase_if(records, [&](const AnnotationRecord& r) { return bad.contains({r.text_id, r.trait}); });
        }
        humans = annotation::aggregate_final_scores(records);
        std::vector<Json> finals;
        for (const auto& f : *humans) finals.push_back(annotation::to_json(f));
        run.write("final_scores.jsonl", jsonl(finals));

        auto k1 = annotation::interannotator_kappa(records, annotation::KappaLevel::Presence);
        auto k2 = annotation::interannotator_kappa(records, annotation::KappaLevel::Group);
        io::CsvWriter iaa({"trait", "level1_kappa", "level2_kappa"});
        auto cell = [](const std::map<Trait, std::optional<double>>& m, Trait t) {
            auto it = m.find(t);
            return it == m.end() || !it->second ? std::string("NA") : io::format_real(*it->second);
        };
        for (auto trait : kAllTraits) {
            if (!k1.contains(trait) && !k2.contains(trait)) continue;
            iaa.add_row({std::string(trait_key(trait)), cell(k1, trait), cell(k2, trait)});
        }
        run.write("iaa_report.csv", iaa.str());
    } else if (es.human_scores) {
        run.input(*es.human_scores);
        humans = annotation::load_final_scores(*es.human_scores);
    }

    if (humans) {
        std::map<std::pair<std::string, Trait>, const ClassifierOutput*> machine;
        for (const auto& o : outputs) machine[{o.text_id(), o.trait()}] = &o;
        std::vector<std::string> missing;
        std::map<Trait, std::vector<std::pair<const annotation::FinalScore*, const ClassifierOutput*>>> aligned;
        for (const auto& h : *humans) {
            auto it = machine.find({h.text_id, h.trait});
            if (it == machine.end()) {
                missing.push_back(fmt::format("{}/{}", h.text_id, trait_key(h.trait)));
            } else {
                aligned[h.trait].emplace_back(&h, it->second);
            }
        }
        if (!missing.empty()) {
            throw AlignmentError(
                fmt::format("human scores without classifier output: {}", text::join(missing, ", ")));
        }
        Json agreement = Json::object();
        io::CsvWriter levels({"trait", "level1_precision", "level1_recall", "level1_f1", "level2_precision",
                              "level2_recall", "level2_f1", "level3_mae", "level3_used", "level3_excluded"});
        for (auto trait : kAllTraits) {
            auto it = aligned.find(trait);
            if (it == aligned.end()) continue;
            std::vector<AnnotationScore> h, c;
            std::vector<metrics::Level3Pair> l3;
            for (const auto& [hs, cs] : it->second) {
                h.push_back(hs->score);
                c.push_back(cs->score());
                l3.push_back({hs->mean, cs->score()});
            }
            auto p1 = metrics::agreement_level1(h, c);
            auto p2 = metrics::agreement_level2(h, c);
            metrics::MaeResult mae;
            try {
                mae = metrics::agreement_level3(l3);
            } catch (const EmptyInput&) {
                mae.excluded = l3.size();
            }
            agreement[std::string(trait_key(trait))] =
                Json{{"level1", prf_json(p1)},
                     {"level2", prf_json(p2)},
                     {"level3", {{"mae", mae.used > 0 ? num(mae.mae) : Json(nullptr)},
                                 {"used", mae.used},
                                 {"excluded", mae.excluded}}}};
            levels.add_row({std::string(trait_key(trait)), io::format_real(p1.precision), io::format_real(p1.recall),
                            io::format_real(p1.f1), io::format_real(p2.precision), io::format_real(p2.recall),
                            io::format_real(p2.f1), mae.used > 0 ? io::format_real(mae.mae) : "NA",
                            std::to_string(mae.used), std::to_string(mae.excluded)});
        }
        report["human_agreement"] = agreement;
        run.write("agreement_levels.csv", levels.str());
    }

    run.write("agreement_report.json", report.dump(2) + "\n");
    return status;
}

// --- linguistics ---------------------------------------------------------

std::string strip_mask(const std::string& s) {
    std::string out;
    std::size_t cursor = 0;
    for (auto pos = s.find(generation::kMaskToken); pos != std::string::npos;
         pos = s.find(generation::kMaskToken, cursor)) {
        out.append(s, cursor, pos - cursor);
        out.push_back(' ');
        cursor = pos + generation::kMaskToken.size();
    }
    out.append(s, cursor);
    return out;
}

int cmd_linguistics(Run& run) {
    const auto& cfg = run.cfg();
    const auto& ls = cfg.linguistics;
    auto texts_path = run.out("generated_texts.jsonl");
    run.input(texts_path);
    run.input(ls.stopwords);
    run.input(ls.tagger_data / "pos_lexicon.txt");
    run.input(ls.tagger_data / "lemma_exceptions.txt");
    run.input(cfg.generation.definitions);
    auto texts = read_texts(texts_path);
    auto words = io::read_word_list(ls.stopwords);
    linguistics::StopwordSet stopwords(words.begin(), words.end());
    auto tagger = linguistics::RuleBasedTagger::load(ls.tagger_data);

    // similarity heatmap, one TF-IDF space per model
    std::map<std::string, std::vector<const GeneratedText*>> by_model;
    for (const auto& t : texts) {
        if (t.profile.kind() == PersonalityProfile::Kind::SingleTrait) by_model[t.model].push_back(&t);
    }
    if (by_model.empty()) throw InsufficientCorpus("no single-trait texts to compare");
    io::CsvWriter heat({"model", "trait", "query_score", "mean_neighbor_score", "texts"});
    io::CsvWriter neighbors({"model", "text_id", "trait", "score", "neighbor_mean", "neighbors"});
    for (const auto& [model, group] : by_model) {
        std::vector<std::string> corpus;
        std::vector<linguistics::TraitText> meta;
        for (const auto* t : group) {
            corpus.push_back(strip_mask(t->text));
            auto trait = t->profile.single_trait();
            meta.push_back({t->id, trait, t->profile.score(trait)->value()});
        }
        auto tfidf = linguistics::TfIdfModel::fit(corpus);
        auto results = linguistics::top_k_similar_trait_means(tfidf, meta, ls.k);
        for (const auto& r : results) {
            neighbors.add_row({model, r.id, std::string(trait_key(r.trait)), std::to_string(r.score),
                               io::format_real(r.mean), text::join(r.neighbors, ";")});
        }
        for (const auto& c : linguistics::similarity_heatmap(results)) {
            heat.add_row({model, std::string(trait_key(c.trait)), std::to_string(c.query_score),
                          io::format_real(c.mean_neighbor_score), std::to_string(c.texts)});
        }
    }
    run.write("similarity_heatmap.csv", heat.str());
    run.write("similarity_neighbors.csv", neighbors.str());

    // lexicon
    std::vector<linguistics::LexiconSource> sources;
    std::string source_kind = "texts";
    if (ls.annotations) {
        run.input(*ls.annotations);
        source_kind = "spans";
        std::map<std::string, const GeneratedText*, std::less<>> by_id;
        for (const auto& t : texts) by_id[t.id] = &t;
        for (const auto& r : annotation::load_annotations(*ls.annotations)) {
            auto it = by_id.find(r.text_id);
            if (it == by_id.end()) continue;
            auto score = it->second->profile.score(r.trait);
            if (!score) continue;
            for (const auto& s : r.spans) sources.push_back({r.trait, *score, s.surface});
        }
    } else {
        for (const auto& [model, group] : by_model) {
            for (const auto* t : group) {
                auto trait = t->profile.single_trait();
                sources.push_back({trait, *t->profile.score(trait), strip_mask(t->text)});
            }
        }
    }
    auto lexicon = linguistics::extract_lexicon(sources, tagger, stopwords);
    auto top = linguistics::top_n_per_cell(lexicon, ls.top_n);
    for (auto trait : kAllTraits) {
        io::CsvWriter csv({"trait", "band", "pos", "rank", "lemma", "frequency"});
        std::map<std::pair<int, std::string>, int> rank;
        for (const auto& e : top) {
            if (e.trait != trait) continue;
            int r = ++rank[{static_cast<int>(e.band), e.pos}];
            csv.add_row({std::string(trait_key(trait)), std::string(linguistics::to_string(e.band)), e.pos,
                         std::to_string(r), e.lemma, std::to_string(e.frequency)});
        }
        run.write(fmt::format("lexicon_{}.csv", trait_key(trait)), csv.str());
    }

    // overlap report
    auto defs = generation::TraitDefinitions::load(cfg.generation.definitions);
    auto templates = cfg.templates();
    std::vector<std::string> prompt_texts = defs.all_texts();
    prompt_texts.push_back(templates.generation_system);
    prompt_texts.push_back(templates.generation_personality_line);
    prompt_texts.push_back(templates.generation_rating_line);
    auto derived = linguistics::prompt_derived_fraction(lexicon, prompt_texts, tagger);

    using Freq = std::map<std::string, std::size_t, std::less<>>;
    std::map<std::pair<Trait, linguistics::ScoreBand>, Freq> bands;
    for (const auto& e : lexicon) bands[{e.trait, e.band}][e.lemma] += e.frequency;
    auto overlap = [&](Trait t, linguistics::ScoreBand a, linguistics::ScoreBand b) -> Json {
        auto ia = bands.find({t, a});
        auto ib = bands.find({t, b});
        if (ia == bands.end() || ib == bands.end()) return nullptr;
        std::set<std::string, std::less<>> sa, sb;
        for (const auto& [l, n] : ia->second) sa.insert(l);
        for (const auto& [l, n] : ib->second) sb.insert(l);
        return Json{{"type_level", num(linguistics::pattern_overlap(sa, sb))},
                    {"token_level", num(linguistics::weighted_pattern_overlap(ia->second, sb))}};
    };
    using linguistics::ScoreBand;
    Json band_overlap = Json::object();
    for (auto trait : kAllTraits) {
        band_overlap[std::string(trait_key(trait))] =
            Json{{"neutral_in_low", overlap(trait, ScoreBand::Neutral, ScoreBand::Low)},
                 {"neutral_in_high", overlap(trait, ScoreBand::Neutral, ScoreBand::High)},
                 {"low_in_high", overlap(trait, ScoreBand::Low, ScoreBand::High)},
                 {"high_in_low", overlap(trait, ScoreBand::High, ScoreBand::Low)}};
    }
    Json report{{"lexicon_source", source_kind},
                {"lexicon_entries", lexicon.size()},
                {"prompt_derived", {{"type_level", num(derived.type_level)}, {"token_level", num(derived.token_level)}}},
                {"band_overlap", band_overlap}};
    run.write("overlap_report.json", report.dump(2) + "\n");
    return kSuccess;
}

// --- report --------------------------------------------------------------

std::string markdown_table(const std::string& csv) {
    auto rows = io::parse_csv(csv);
    if (rows.empty()) return "_empty_\n";
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        out += "|";
        for (const auto& c : cells) {
            std::string esc;
            for (char ch : c) {
                if (ch == '|') esc += "\\|";
                else if (ch == '\n') esc += ' ';
                else esc += ch;
            }
            out += " " + esc + " |";
        }
        out += "\n";
    };
    line(rows[0]);
    out += "|";
    for (std::size_t i = 0; i < rows[0].size(); ++i) out += " --- |";
    out += "\n";
    for (std::size_t r = 1; r < rows.size(); ++r) line(rows[r]);
    return out;
}

int cmd_report(Run& run) {
    const auto& cfg = run.cfg();
    std::string md = "# personaforge report\n";
    bool any = false;
    auto have = [&](const std::string& name) { return fs::exists(run.out(name)); };
    auto table = [&](const std::string& title, const std::string& name) {
        if (!have(name)) return;
        run.input(run.out(name));
        md += fmt::format("\n### {}\n\n", title) + markdown_table(io::read_file(run.out(name)));
    };
    auto json_block = [&](const std::string& title, const std::string& name) {
        if (!have(name)) return;
        run.input(run.out(name));
        md += fmt::format("\n### {}\n\n```json\n{}```\n", title, io::read_file(run.out(name)));
    };

    if (have("questionnaire_runs.jsonl")) {
        any = true;
        run.input(run.out("questionnaire_runs.jsonl"));
        md += "\n## Questionnaire\n";
        table("Trait score distributions", "questionnaire_histogram.csv");
        table("Reliability", "reliability.csv");
    }
    if (have("generated_texts.jsonl")) {
        any = true;
        auto texts = read_texts(run.out("generated_texts.jsonl"));
        run.input(run.out("generated_texts.jsonl"));
        std::size_t edited = std::count_if(texts.begin(), texts.end(), [](const auto& t) { return t.edited; });
        md += fmt::format("\n## Generation\n\n{} texts, {} masked for trait leakage.\n", texts.size(), edited);
    }
    if (have("classifier_outputs.jsonl")) {
        any = true;
        run.input(run.out("classifier_outputs.jsonl"));
        auto n = io::read_jsonl(run.out("classifier_outputs.jsonl")).size();
        md += fmt::format("\n## Classification\n\n{} classifier verdicts.\n", n);
    }
    if (have("agreement_report.json")) {
        any = true;
        md += "\n## Evaluation\n";
        for (auto trait : kAllTraits) {
            table(fmt::format("Prompted level vs detected group: {}", trait_display_name(trait)),
                  fmt::format("confusion_{}.csv", trait_key(trait)));
        }
        table("Bias flags", "bias_report.csv");
        table("Nondistinguishable distribution", "nd_distribution.csv");
        table("Classifier vs human annotators", "agreement_levels.csv");
        table("Inter-annotator agreement (Fleiss' kappa)", "iaa_report.csv");
    }
    if (have("similarity_heatmap.csv")) {
        any = true;
        md += "\n## Linguistics\n";
        table("Mean prompted score of the most similar texts", "similarity_heatmap.csv");
        for (auto trait : kAllTraits) {
            table(fmt::format("Lexicon: {}", trait_display_name(trait)), fmt::format("lexicon_{}.csv", trait_key(trait)));
        }
        json_block("Pattern overlap", "overlap_report.json");
    }
    if (!any) {
        throw UsageError(fmt::format("no pipeline outputs in '{}'; run another subcommand first", cfg.out_dir.string()));
    }
    run.write("report.md", md);
    return kSuccess;
}

// --- batches -------------------------------------------------------------

int cmd_batches(Run& run, const std::vector<std::string>& annotators, std::size_t total, std::size_t batch_size) {
    auto texts_path = run.out("generated_texts.jsonl");
    run.input(texts_path);
    auto texts = read_texts(texts_path);
    annotation::BatchPlan plan;
    plan.total_texts = total;
    plan.batch_size = batch_size;
    plan.seed = run.cfg().seed;
    Json out = Json::array();
    for (const auto& b : annotation::sample_batches(texts, annotators, plan)) {
        out.push_back(Json{{"batch_id", b.id}, {"text_ids", b.text_ids}, {"annotators", b.annotators}});
    }
    run.write("annotation_batches.json", out.dump(2) + "\n");
    return kSuccess;
}

} // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Big Five personality simulation and evaluation pipeline", "personaforge"};
    app.require_subcommand(1);
    app.fallthrough();

    std::optional<std::string> config_path, out_dir, provider, data_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    app.add_option("--config", config_path, "JSON configuration file");
    app.add_option("--out-dir", out_dir, "Directory for outputs (and the response cache)");
    app.add_option("--seed", seed, "Seed for profile sampling and batch construction");
    app.add_option("--workers", workers, "Concurrent provider requests")->check(CLI::PositiveNumber);
    app.add_option("--provider", provider,
                   "Provider name(s), comma separated: subject models, or the judge for classify");
    app.add_option("--data-dir", data_dir, "Bundled data directory");

    auto* q = app.add_subcommand("questionnaire", "Administer the questionnaire under trait prompts");
    std::optional<int> repetitions;
    std::optional<std::string> q_temps, q_traits;
    q->add_option("--repetitions", repetitions);
    q->add_option("--temps", q_temps, "Comma separated temperatures");
    q->add_option("--traits", q_traits, "Comma separated traits or 'all'");

    auto* g = app.add_subcommand("generate", "Generate persona texts");
    std::optional<std::string> mode, scores, g_temps, g_traits;
    std::optional<int> count;
    g->add_option("--mode", mode, "single, full or both");
    g->add_option("--scores", scores, "Comma separated prompt scores (single mode)");
    g->add_option("--temps", g_temps, "Comma separated temperatures");
    g->add_option("--traits", g_traits, "Comma separated traits or 'all' (single mode)");
    g->add_option("--count", count, "Number of sampled full profiles");

    auto* c = app.add_subcommand("classify", "Classify generated texts with the judge model");
    std::optional<std::string> c_traits, c_input;
    c->add_option("--traits", c_traits, "prompted or all");
    c->add_option("--input", c_input, "Generated texts (default <out-dir>/generated_texts.jsonl)");

    auto* e = app.add_subcommand("evaluate", "Agreement, confusion, bias and ND reports");
    std::optional<std::string> annotations, human_scores;
    e->add_option("--annotations", annotations, "Raw annotator records (JSONL)");
    e->add_option("--human-scores", human_scores, "Aggregated human scores (JSONL)");

    auto* l = app.add_subcommand("linguistics", "TF-IDF similarity and lexicon extraction");
    std::optional<std::size_t> k;
    std::optional<std::string> l_annotations;
    l->add_option("--k", k, "Neighbours per text")->check(CLI::PositiveNumber);
    l->add_option("--annotations", l_annotations, "Use highlighted spans from this annotation file");

    auto* r = app.add_subcommand("report", "Markdown summary of all outputs");

    auto* b = app.add_subcommand("batches", "Sample annotation batches from generated texts");
    std::string annotators_list = "A1,A2,A3,A4,A5,A6,A7,A8";
    std::size_t total = 288, batch_size = 20;
    b->add_option("--annotators", annotators_list, "Comma separated annotator ids");
    b->add_option("--total", total, "Texts to sample");
    b->add_option("--batch-size", batch_size, "Texts per batch");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        int code = app.exit(err);
        return code == 0 ? kSuccess : kUsageError;
    }

    auto* sub = app.get_subcommands().front();
    std::optional<Config> resolved;
    try {
        fs::path data = data_dir ? fs::path(*data_dir) : bundled_data_dir();
        Config cfg = config_path ? load_config(*config_path, data) : default_config(data);
        if (out_dir) cfg.out_dir = *out_dir;
        if (seed) cfg.seed = *seed;
        if (workers) cfg.workers = *workers;
        if (provider) {
            if (sub == c) {
                cfg.classifier.judge = *provider;
            } else {
                cfg.models = split_list(*provider);
            }
        }
        auto temps = [](const std::string& s) {
            std::vector<Temperature> out;
            for (const auto& t : split_list(s)) out.push_back(Temperature::parse(t));
            return out;
        };
        auto trait_list = [](const std::string& s) {
            std::vector<Trait> out;
            if (s == "all") return std::vector<Trait>(kAllTraits.begin(), kAllTraits.end());
            for (const auto& t : split_list(s)) out.push_back(parse_trait(t));
            return out;
        };
        if (repetitions) cfg.questionnaire.repetitions = *repetitions;
        if (q_temps) cfg.questionnaire.temperatures = temps(*q_temps);
        if (q_traits) cfg.questionnaire.traits = trait_list(*q_traits);
        if (mode) cfg.generation.mode = *mode;
        if (scores) {
            cfg.generation.scores.clear();
            for (const auto& s : split_list(*scores)) cfg.generation.scores.push_back(std::stoi(s));
        }
        if (g_temps) cfg.generation.temperatures = temps(*g_temps);
        if (g_traits) cfg.generation.traits = trait_list(*g_traits);
        if (count) cfg.generation.sampler.count = *count;
        if (c_traits) cfg.classifier.traits = *c_traits;
        if (annotations) cfg.evaluate.annotations = *annotations;
        if (human_scores) cfg.evaluate.human_scores = *human_scores;
        if (k) cfg.linguistics.k = *k;
        if (l_annotations) cfg.linguistics.annotations = *l_annotations;
        if (cfg.workers < 1) throw ConfigError("workers must be >= 1");
        resolved = std::move(cfg);
    } catch (const std::exception& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return kUsageError;
    }

    try {
        Run run_ctx(std::move(*resolved), sub->get_name());
        int status = kSuccess;
        try {
            if (sub == q) {
                status = cmd_questionnaire(run_ctx);
            } else if (sub == g) {
                status = cmd_generate(run_ctx);
            } else if (sub == c) {
                status = cmd_classify(run_ctx, c_input ? std::optional<fs::path>(*c_input) : std::nullopt);
            } else if (sub == e) {
                status = cmd_evaluate(run_ctx);
            } else if (sub == l) {
                status = cmd_linguistics(run_ctx);
            } else if (sub == r) {
                status = cmd_report(run_ctx);
            } else if (sub == b) {
                status = cmd_batches(run_ctx, split_list(annotators_list), total, batch_size);
            }
        } catch (...) {
            run_ctx.finish();
            throw;
        }
        run_ctx.finish();
        return status;
    } catch (const UsageError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kUsageError;
    } catch (const ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return kUsageError;
    } catch (const AuthError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return kUsageError;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kPartialFailure;
    }
}

} // namespace personaforge::cli
