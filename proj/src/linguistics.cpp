#include "personaforge/linguistics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include <fmt/format.h>

#include "personaforge/io.hpp"
#include "personaforge/text_util.hpp"

namespace personaforge::linguistics {

namespace fs = std::filesystem;

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && !text::is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && text::is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) out.push_back(text::to_lower_ascii(text.substr(start, i - start)));
    }
    return out;
}

TfIdfModel TfIdfModel::fit(const std::vector<std::string>& corpus) {
    if (corpus.empty()) throw EmptyCorpus("TF-IDF needs at least one document");

    std::vector<std::map<std::string, std::size_t, std::less<>>> counts(corpus.size());
    std::map<std::string, std::size_t, std::less<>> df;
    for (std::size_t d = 0; d < corpus.size(); ++d) {
        for (auto& tok : tokenize(corpus[d])) ++counts[d][tok];
        for (const auto& [term, n] : counts[d]) ++df[term];
    }

    TfIdfModel m;
    m.vocabulary_.reserve(df.size());
    const double n_docs = static_cast<double>(corpus.size());
    for (const auto& [term, f] : df) {
        m.vocabulary_.push_back(term);
        m.idf_.push_back(std::log((1.0 + n_docs) / (1.0 + static_cast<double>(f))) + 1.0);
    }
    m.documents_.reserve(corpus.size());
    for (const auto& c : counts) {
        SparseVector v;
        v.reserve(c.size());
        for (const auto& [term, n] : c) {
            auto col = *m.column(term);
            v.emplace_back(col, static_cast<double>(n) * m.idf_[col]);
        }
        m.documents_.push_back(std::move(v));
    }
    return m;
}

std::optional<std::size_t> TfIdfModel::column(std::string_view term) const {
    auto it = std::lower_bound(vocabulary_.begin(), vocabulary_.end(), term);
    if (it == vocabulary_.end() || *it != term) return std::nullopt;
    return static_cast<std::size_t>(it - vocabulary_.begin());
}

SparseVector TfIdfModel::transform(std::string_view text) const {
    std::map<std::size_t, std::size_t> counts;
    for (const auto& tok : tokenize(text)) {
        if (auto col = column(tok)) ++counts[*col];
    }
    SparseVector v;
    for (const auto& [col, n] : counts) v.emplace_back(col, static_cast<double>(n) * idf_[col]);
    return v;
}

double cosine_similarity(const SparseVector& a, const SparseVector& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [c, w] : a) na += w * w;
    for (const auto& [c, w] : b) nb += w * w;
    if (na == 0.0 || nb == 0.0) throw ZeroVector("cosine similarity of a zero vector");
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i].first < b[j].first) {
            ++i;
        } else if (b[j].first < a[i].first) {
            ++j;
        } else {
            dot += a[i].second * b[j].second;
            ++i;
            ++j;
        }
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ValueError("cosine similarity of vectors with different lengths");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw ZeroVector("cosine similarity of a zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<NeighborMean> top_k_similar_trait_means(const TfIdfModel& model, const std::vector<TraitText>& texts,
                                                    std::size_t k) {
    if (k < 1) throw ValueError("k must be >= 1");
    if (texts.size() != model.document_count()) {
        throw ValueError(fmt::format("{} texts for a model of {} documents", texts.size(), model.document_count()));
    }
    std::map<Trait, std::vector<std::size_t>> by_trait;
    std::set<std::string, std::less<>> ids;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (!ids.insert(texts[i].id).second) throw ValueError("duplicate text id " + texts[i].id);
        by_trait[texts[i].trait].push_back(i);
    }
    for (const auto& [trait, members] : by_trait) {
        if (members.size() <= k) {
            throw InsufficientCorpus(fmt::format("{} has {} texts; top-{} needs at least {}", trait_key(trait),
                                                 members.size(), k, k + 1));
        }
    }

    std::vector<NeighborMean> out;
    out.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        const auto& members = by_trait[texts[i].trait];
        std::vector<std::pair<double, std::size_t>> ranked;
        ranked.reserve(members.size() - 1);
        for (auto j : members) {
            if (j == i) continue;
            double sim = 0.0;
            try {
                sim = cosine_similarity(model.document(i), model.document(j));
            } catch (const ZeroVector&) {
                sim = 0.0; // an empty text resembles nothing
            }
            ranked.emplace_back(sim, j);
        }
        std::sort(ranked.begin(), ranked.end(), [&](const auto& x, const auto& y) {
            if (x.first != y.first) return x.first > y.first;
            return texts[x.second].id < texts[y.second].id;
        });
        NeighborMean r{texts[i].id, texts[i].trait, texts[i].score, {}, 0.0};
        double sum = 0.0;
        for (std::size_t n = 0; n < k; ++n) {
            r.neighbors.push_back(texts[ranked[n].second].id);
            sum += texts[ranked[n].second].score;
        }
        r.mean = sum / static_cast<double>(k);
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<HeatmapCell> similarity_heatmap(const std::vector<NeighborMean>& results) {
    std::map<std::pair<std::size_t, int>, std::pair<double, std::size_t>> cells;
    for (const auto& r : results) {
        auto& c = cells[{trait_index(r.trait), r.score}];
        c.first += r.mean;
        ++c.second;
    }
    std::vector<HeatmapCell> out;
    for (const auto& [key, acc] : cells) {
        out.push_back({kAllTraits[key.first], key.second, acc.first / static_cast<double>(acc.second), acc.second});
    }
    return out;
}

namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() > suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

// "running" -> "runn" -> "run"
std::optional<std::string> undouble(std::string_view stem) {
    if (stem.size() >= 3 && stem.back() == stem[stem.size() - 2] && !is_vowel(stem.back())) {
        return std::string(stem.substr(0, stem.size() - 1));
    }
    return std::nullopt;
}

struct SuffixRule {
    std::string_view suffix;
    std::vector<std::string_view> replacements; // appended to the stem
    bool try_undouble;
    std::vector<std::string_view> tags; // tags the inflection can carry
};

const std::vector<SuffixRule>& suffix_rules() {
    static const std::vector<SuffixRule> kRules{
        {"ies", {"y"}, false, {"NOUN", "VERB"}},
        {"ves", {"f", "fe"}, false, {"NOUN"}},
        {"es", {"", "e"}, false, {"NOUN", "VERB"}},
        {"s", {""}, false, {"NOUN", "VERB"}},
        {"ing", {"", "e"}, true, {"VERB"}},
        {"ied", {"y"}, false, {"VERB"}},
        {"ed", {"", "e"}, true, {"VERB"}},
        {"d", {""}, false, {"VERB"}},
        {"iest", {"y"}, false, {"ADJ"}},
        {"ier", {"y"}, false, {"ADJ"}},
        {"est", {"", "e"}, true, {"ADJ"}},
        {"er", {"", "e"}, true, {"ADJ"}},
    };
    return kRules;
}

const std::set<std::string, std::less<>>& noun_preferring_context() {
    static const std::set<std::string, std::less<>> k{
        "a", "an", "the", "my", "your", "his", "her", "its", "our", "their", "this", "that", "these", "those",
        "every", "each", "some", "any", "no", "of"};
    return k;
}

const std::set<std::string, std::less<>>& verb_preferring_context() {
    static const std::set<std::string, std::less<>> k{
        "to", "i", "you", "we", "they", "he", "she", "will", "would", "can", "could", "should", "might",
        "must", "may", "shall", "don", "didn", "not", "often", "always", "never", "usually", "really"};
    return k;
}

bool contains(const std::vector<std::string>& v, std::string_view s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

} // namespace

RuleBasedTagger::RuleBasedTagger(std::map<std::string, std::vector<std::string>, std::less<>> lexicon,
                                 std::map<std::string, std::pair<std::string, std::string>, std::less<>> exceptions)
    : lexicon_(std::move(lexicon)), exceptions_(std::move(exceptions)) {}

RuleBasedTagger RuleBasedTagger::load(const fs::path& data_dir) {
    std::map<std::string, std::vector<std::string>, std::less<>> lexicon;
    for (const auto& line : io::read_word_list(data_dir / "pos_lexicon.txt")) {
        std::istringstream in(line);
        std::string lemma, tag;
        in >> lemma;
        auto& tags = lexicon[text::to_lower_ascii(lemma)];
        while (in >> tag) {
            if (!contains(tags, tag)) tags.push_back(tag);
        }
        if (tags.empty()) throw ConfigError(fmt::format("pos lexicon entry '{}' has no tag", line));
    }
    std::map<std::string, std::pair<std::string, std::string>, std::less<>> exceptions;
    for (const auto& line : io::read_word_list(data_dir / "lemma_exceptions.txt")) {
        std::istringstream in(line);
        std::string form, lemma, tag;
        if (!(in >> form >> lemma >> tag)) {
            throw ConfigError(fmt::format("lemma exception '{}' needs: form lemma TAG", line));
        }
        exceptions[text::to_lower_ascii(form)] = {text::to_lower_ascii(lemma), tag};
    }
    return RuleBasedTagger(std::move(lexicon), std::move(exceptions));
}

const std::vector<std::string>* RuleBasedTagger::lookup(std::string_view lemma) const {
    auto it = lexicon_.find(lemma);
    return it == lexicon_.end() ? nullptr : &it->second;
}

RuleBasedTagger::Analysis RuleBasedTagger::analyse(const std::string& word) const {
    if (auto it = exceptions_.find(word); it != exceptions_.end()) {
        return {it->second.first, {it->second.second}};
    }
    if (const auto* tags = lookup(word)) return {word, *tags};
    if (std::all_of(word.begin(), word.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        return {word, {"NUM"}};
    }

    for (const auto& rule : suffix_rules()) {
        if (!ends_with(word, rule.suffix)) continue;
        std::string_view stem = std::string_view(word).substr(0, word.size() - rule.suffix.size());
        if (stem.size() < 2) continue;
        std::vector<std::string> candidates;
        for (auto rep : rule.replacements) candidates.push_back(std::string(stem) + std::string(rep));
        if (rule.try_undouble) {
            if (auto u = undouble(stem)) candidates.push_back(*u);
        }
        for (const auto& cand : candidates) {
            const auto* tags = lookup(cand);
            if (tags == nullptr) continue;
            std::vector<std::string> compatible;
            for (const auto& t : *tags) {
                if (std::find(rule.tags.begin(), rule.tags.end(), t) != rule.tags.end()) compatible.push_back(t);
            }
            if (!compatible.empty()) return {cand, compatible};
        }
    }

    // Unknown word: guess from its shape.
    static const std::vector<std::string_view> kNounSuffixes{"tion", "sion", "ness", "ment", "ity", "ism",
                                                             "ance", "ence", "ship", "hood", "ist"};
    static const std::vector<std::string_view> kAdjSuffixes{"ous", "ful", "ive", "able", "ible", "less",
                                                            "ish", "ical", "ic", "al", "ary", "ent", "ant"};
    if (ends_with(word, "ly")) return {word, {"ADV"}};
    for (auto s : kNounSuffixes) {
        if (ends_with(word, s)) return {word, {"NOUN"}};
        if (ends_with(word, std::string(s) + "s")) return {word.substr(0, word.size() - 1), {"NOUN"}};
    }
    for (auto s : kAdjSuffixes) {
        if (ends_with(word, s)) return {word, {"ADJ"}};
    }
    if (ends_with(word, "ing") && word.size() > 5) {
        auto stem = word.substr(0, word.size() - 3);
        return {undouble(stem).value_or(stem), {"VERB", "NOUN"}};
    }
    if (ends_with(word, "ed") && word.size() > 4) {
        auto stem = word.substr(0, word.size() - 2);
        return {undouble(stem).value_or(stem), {"VERB", "ADJ"}};
    }
    if (ends_with(word, "s") && !ends_with(word, "ss") && !ends_with(word, "us") && !ends_with(word, "is") &&
        word.size() > 3) {
        return {word.substr(0, word.size() - 1), {"NOUN", "VERB"}};
    }
    return {word, {"NOUN"}};
}

std::vector<TaggedToken> RuleBasedTagger::tag(std::string_view text) const {
    std::vector<TaggedToken> out;
    auto tokens = tokenize(text);
    out.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        auto a = analyse(tokens[i]);
        std::string chosen = a.tags.front();
        if (i > 0 && a.tags.size() > 1) {
            const auto& prev = tokens[i - 1];
            if (noun_preferring_context().contains(prev) && contains(a.tags, "NOUN")) {
                chosen = "NOUN";
            } else if (verb_preferring_context().contains(prev) && contains(a.tags, "VERB")) {
                chosen = "VERB";
            }
        }
        out.push_back({tokens[i], std::move(a.lemma), std::move(chosen)});
    }
    return out;
}

std::string_view to_string(ScoreBand b) noexcept {
    switch (b) {
    case ScoreBand::Low: return "low";
    case ScoreBand::Neutral: return "neutral";
    case ScoreBand::High: return "high";
    }
    return "neutral";
}

ScoreBand score_band(PromptScore s) noexcept {
    if (s.value() <= 2) return ScoreBand::Low;
    if (s.value() == 3) return ScoreBand::Neutral;
    return ScoreBand::High;
}

namespace {

int pos_rank(std::string_view pos) {
    if (pos == "NOUN") return 0;
    if (pos == "VERB") return 1;
    return 2;
}

std::vector<TaggedToken> checked_tag(const PosTagger& tagger, std::string_view text) {
    std::vector<TaggedToken> tagged;
    try {
        tagged = tagger.tag(text);
    } catch (const TaggerFailure&) {
        throw;
    } catch (const std::exception& e) {
        throw TaggerFailure(e.what());
    }
    auto lowered = text::to_lower_ascii(text);
    std::size_t cursor = 0;
    for (const auto& t : tagged) {
        auto at = lowered.find(text::to_lower_ascii(t.token), cursor);
        if (t.token.empty() || at == std::string::npos) {
            throw TaggerFailure(fmt::format("tagger token '{}' is not in input order", t.token));
        }
        cursor = at + t.token.size();
    }
    return tagged;
}

} // namespace

std::vector<LexiconEntry> extract_lexicon(std::span<const LexiconSource> sources, const PosTagger& tagger,
                                          const StopwordSet& stopwords) {
    // (trait, band, pos rank, lemma) -> count
    std::map<std::tuple<std::size_t, int, int, std::string>, std::size_t> counts;
    std::map<int, std::string> pos_names{{0, "NOUN"}, {1, "VERB"}, {2, "ADJ"}};
    for (const auto& src : sources) {
        auto band = static_cast<int>(score_band(src.score));
        for (const auto& t : checked_tag(tagger, src.text)) {
            if (t.pos != "NOUN" && t.pos != "VERB" && t.pos != "ADJ") continue;
            auto lemma = text::to_lower_ascii(t.lemma);
            if (lemma.empty() || stopwords.contains(lemma) || stopwords.contains(text::to_lower_ascii(t.token))) {
                continue;
            }
            ++counts[{trait_index(src.trait), band, pos_rank(t.pos), lemma}];
        }
    }
    std::vector<LexiconEntry> out;
    out.reserve(counts.size());
    for (const auto& [key, n] : counts) {
        const auto& [trait, band, pos, lemma] = key;
        out.push_back({lemma, pos_names[pos], kAllTraits[trait], static_cast<ScoreBand>(band), n});
    }
    std::stable_sort(out.begin(), out.end(), [](const LexiconEntry& a, const LexiconEntry& b) {
        auto ka = std::make_tuple(trait_index(a.trait), static_cast<int>(a.band), pos_rank(a.pos));
        auto kb = std::make_tuple(trait_index(b.trait), static_cast<int>(b.band), pos_rank(b.pos));
        if (ka != kb) return ka < kb;
        if (a.frequency != b.frequency) return a.frequency > b.frequency;
        return a.lemma < b.lemma;
    });
    return out;
}

std::vector<LexiconEntry> top_n_per_cell(const std::vector<LexiconEntry>& lexicon, std::size_t n) {
    std::vector<LexiconEntry> out;
    std::map<std::tuple<Trait, ScoreBand, std::string>, std::size_t> taken;
    for (const auto& e : lexicon) {
        auto& c = taken[{e.trait, e.band, e.pos}];
        if (c < n) {
            out.push_back(e);
            ++c;
        }
    }
    return out;
}

double pattern_overlap(const std::set<std::string, std::less<>>& a, const std::set<std::string, std::less<>>& b) {
    if (a.empty()) throw EmptySet("pattern overlap of an empty set");
    std::size_t shared = 0;
    for (const auto& x : a) shared += b.contains(x) ? 1 : 0;
    return static_cast<double>(shared) / static_cast<double>(a.size());
}

double weighted_pattern_overlap(const std::map<std::string, std::size_t, std::less<>>& a,
                                const std::set<std::string, std::less<>>& b) {
    std::size_t total = 0, shared = 0;
    for (const auto& [lemma, n] : a) {
        total += n;
        if (b.contains(lemma)) shared += n;
    }
    if (total == 0) throw EmptySet("pattern overlap of an empty set");
    return static_cast<double>(shared) / static_cast<double>(total);
}

OverlapFigures prompt_derived_fraction(const std::vector<LexiconEntry>& lexicon,
                                       const std::vector<std::string>& prompt_texts, const PosTagger& tagger) {
    std::map<std::string, std::size_t, std::less<>> freq;
    for (const auto& e : lexicon) freq[e.lemma] += e.frequency;
    if (freq.empty()) return {};

    std::set<std::string, std::less<>> prompt_lemmas;
    for (const auto& p : prompt_texts) {
        for (const auto& t : checked_tag(tagger, p)) prompt_lemmas.insert(text::to_lower_ascii(t.lemma));
    }
    std::set<std::string, std::less<>> types;
    for (const auto& [lemma, n] : freq) types.insert(lemma);
    OverlapFigures f;
    f.type_level = pattern_overlap(types, prompt_lemmas);
    f.token_level = weighted_pattern_overlap(freq, prompt_lemmas);
    return f;
}

} // namespace personaforge::linguistics
