#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "personaforge/domain.hpp"

namespace personaforge::linguistics {

/// Lowercased maximal runs of word bytes (ASCII letters, digits, and any
/// non-ASCII byte, so multi-byte letters stay inside their word).
std::vector<std::string> tokenize(std::string_view text);

/// (column, weight) pairs sorted by column, weights non-zero.
using SparseVector = std::vector<std::pair<std::size_t, double>>;

class TfIdfModel {
public:
    /// tf = raw count, idf = ln((1 + N) / (1 + df)) + 1. Throws EmptyCorpus.
    static TfIdfModel fit(const std::vector<std::string>& corpus);

    std::size_t document_count() const noexcept { return documents_.size(); }
    /// Sorted terms; a term's position is its column.
    const std::vector<std::string>& vocabulary() const noexcept { return vocabulary_; }
    const std::vector<double>& idf() const noexcept { return idf_; }
    std::optional<std::size_t> column(std::string_view term) const;
    const SparseVector& document(std::size_t i) const { return documents_.at(i); }
    /// Vector for unseen text; out-of-vocabulary terms are dropped.
    SparseVector transform(std::string_view text) const;

private:
    std::vector<std::string> vocabulary_;
    std::vector<double> idf_;
    std::vector<SparseVector> documents_;
};

/// dot(a, b) / (|a| |b|). Throws ZeroVector when either norm is zero.
double cosine_similarity(const SparseVector& a, const SparseVector& b);
double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct TraitText {
    std::string id;
    Trait trait = Trait::Openness;
    int score = 3; // prompted score
};

struct NeighborMean {
    std::string id;
    Trait trait = Trait::Openness;
    int score = 3;
    std::vector<std::string> neighbors; // best first
    double mean = 0.0;
};

/// texts[i] describes model document i. Each text is compared with every
/// other text of its trait; ties go to the smaller id. Throws
/// InsufficientCorpus when a trait has k or fewer texts, ValueError when k < 1
/// or the sizes disagree.
std::vector<NeighborMean> top_k_similar_trait_means(const TfIdfModel& model,
                                                    const std::vector<TraitText>& texts,
                                                    std::size_t k = 5);

struct HeatmapCell {
    Trait trait = Trait::Openness;
    int query_score = 3;
    double mean_neighbor_score = 0.0;
    std::size_t texts = 0;
};

/// Averages neighbor means per (trait, query score), sorted by trait then score.
std::vector<HeatmapCell> similarity_heatmap(const std::vector<NeighborMean>& results);

struct TaggedToken {
    std::string token;
    std::string lemma;
    std::string pos; // universal tags: NOUN, VERB, ADJ, ADV, DET, PRON, ...
};

class PosTagger {
public:
    virtual ~PosTagger() = default;
    /// Tokens in input order.
    virtual std::vector<TaggedToken> tag(std::string_view text) const = 0;
};

/// Dictionary lookup with suffix-stripping lemmatisation and a few context
/// rules (determiner -> noun, "to"/modal/pronoun -> verb).
class RuleBasedTagger final : public PosTagger {
public:
    /// `lexicon` maps a lemma to its tags, most likely first; `exceptions` maps
    /// irregular forms to (lemma, tag).
    RuleBasedTagger(std::map<std::string, std::vector<std::string>, std::less<>> lexicon,
                    std::map<std::string, std::pair<std::string, std::string>, std::less<>> exceptions);

    /// pos_lexicon.txt ("lemma TAG [TAG...]") and lemma_exceptions.txt
    /// ("form lemma TAG") from a directory.
    static RuleBasedTagger load(const std::filesystem::path& data_dir);

    std::vector<TaggedToken> tag(std::string_view text) const override;

private:
    struct Analysis {
        std::string lemma;
        std::vector<std::string> tags;
    };
    Analysis analyse(const std::string& word) const;
    const std::vector<std::string>* lookup(std::string_view lemma) const;

    std::map<std::string, std::vector<std::string>, std::less<>> lexicon_;
    std::map<std::string, std::pair<std::string, std::string>, std::less<>> exceptions_;
};

enum class ScoreBand { Low, Neutral, High };

std::string_view to_string(ScoreBand b) noexcept;
/// 1-2 low, 3 neutral, 4-5 high.
ScoreBand score_band(PromptScore s) noexcept;

struct LexiconEntry {
    std::string lemma;
    std::string pos; // NOUN, VERB or ADJ
    Trait trait = Trait::Openness;
    ScoreBand band = ScoreBand::Neutral;
    std::size_t frequency = 0;
    friend bool operator==(const LexiconEntry&, const LexiconEntry&) = default;
};

struct LexiconSource {
    Trait trait = Trait::Openness;
    PromptScore score{3};
    std::string text; // a highlighted span or a whole text
};

using StopwordSet = std::set<std::string, std::less<>>;

/// Counts NOUN/VERB/ADJ lemmas per (trait, band, pos), dropping stopwords.
/// Sorted by trait, band, pos, then frequency descending and lemma. Tagger
/// errors and out-of-order output raise TaggerFailure.
std::vector<LexiconEntry> extract_lexicon(std::span<const LexiconSource> sources, const PosTagger& tagger,
                                          const StopwordSet& stopwords);

/// At most n entries per (trait, band, pos) cell of a sorted lexicon.
std::vector<LexiconEntry> top_n_per_cell(const std::vector<LexiconEntry>& lexicon, std::size_t n);

/// |A and B| / |A|. Throws EmptySet when A is empty.
double pattern_overlap(const std::set<std::string, std::less<>>& a, const std::set<std::string, std::less<>>& b);
/// Frequency-weighted variant: occurrences of A's lemmas that are in B over
/// all occurrences in A. Throws EmptySet when A has no occurrences.
double weighted_pattern_overlap(const std::map<std::string, std::size_t, std::less<>>& a,
                                const std::set<std::string, std::less<>>& b);

struct OverlapFigures {
    double type_level = 0.0;
    double token_level = 0.0;
};

/// Share of lexicon lemmas that also occur as lemmas of the prompt texts.
/// An empty lexicon gives 0 at both levels.
OverlapFigures prompt_derived_fraction(const std::vector<LexiconEntry>& lexicon,
                                       const std::vector<std::string>& prompt_texts, const PosTagger& tagger);

} // namespace personaforge::linguistics
