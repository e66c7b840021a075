#pragma once

// Reliability coefficients, inter-rater agreement, vote aggregation and the
// classifier-vs-reference agreement levels. Every function here is pure.
//
// Variance convention: population (divide by N) everywhere.

#include <array>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "personaforge/domain.hpp"

namespace personaforge::metrics {

/// Respondents (rows) by items (columns).
class RatingMatrix {
public:
    RatingMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);
    /// Throws ValueError for ragged input.
    static RatingMatrix from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    double at(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
    std::vector<double> column(std::size_t c) const;

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> values_;
};

/// k/(k-1) * (1 - sum of item variances / variance of row totals).
/// Throws DegenerateMatrix for fewer than 2x2 cells or zero total variance.
double cronbach_alpha(const RatingMatrix& m);

enum class GuttmanVariant { Lambda2, Lambda6 };

/// 1 - sum_i e_i^2 / total variance, with e_i^2 the residual variance of item
/// i regressed on all other items. When every item is an exact linear function
/// of the others the result is 1; any other singular covariance raises
/// SingularCovariance.
double guttman_lambda6(const RatingMatrix& m);
/// lambda1 + sqrt(k/(k-1) * sum of squared off-diagonal covariances) / total variance.
double guttman_lambda2(const RatingMatrix& m);
double guttman_lambda(const RatingMatrix& m, GuttmanVariant variant);

/// counts[subject][category] = raters who chose the category. Every subject
/// must sum to the same n >= 2. Throws DegenerateAgreement when chance
/// agreement is 1.
double fleiss_kappa(const std::vector<std::vector<int>>& counts);

ScoreGroup score_to_group(const AnnotationScore& s) noexcept;
PromptedLevel prompt_score_to_level(PromptScore p) noexcept;

/// Three-rater vote. Any value given by two or more raters wins (including
/// Nondistinguishable). Otherwise the numeric scores decide: the median of
/// three, or for two numeric scores their mean truncated toward zero.
AnnotationScore majority_vote(std::span<const AnnotationScore> scores);

struct WeightedPrf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

/// Support-weighted precision, recall and F1 over integer labels. Classes are
/// the union of labels on both sides; a class never predicted has precision 0.
WeightedPrf weighted_prf(std::span<const int> truth, std::span<const int> predicted);

/// Present (numeric) vs absent (Nondistinguishable), humans as truth.
WeightedPrf agreement_level1(std::span<const AnnotationScore> human,
                             std::span<const AnnotationScore> classifier);
/// Four score groups, humans as truth.
WeightedPrf agreement_level2(std::span<const AnnotationScore> human,
                             std::span<const AnnotationScore> classifier);

struct Level3Pair {
    std::optional<double> human_mean; // nullopt when every rater said Nondistinguishable
    AnnotationScore classifier = AnnotationScore::non_distinguishable();
};

struct MaeResult {
    double mae = 0.0;
    std::size_t used = 0;
    std::size_t excluded = 0;
};

/// Mean |classifier - human mean| over pairs numeric on both sides.
MaeResult agreement_level3(std::span<const Level3Pair> pairs);

struct ConfusionMatrix {
    /// rows L, M, H; columns Low, Mid, High, ND
    std::array<std::array<int, 4>, 3> counts{};

    int total() const noexcept;
    int row_total(PromptedLevel l) const noexcept;
    int at(PromptedLevel l, ScoreGroup g) const noexcept;
    /// Row-normalised; empty rows stay all zero.
    std::array<std::array<double, 4>, 3> proportions() const noexcept;
};

ConfusionMatrix confusion_matrix(std::span<const std::pair<PromptedLevel, ScoreGroup>> pairs);

struct BiasReport {
    bool low_bias = false;        // prompted H mostly detected Low
    bool high_bias = false;       // prompted L mostly detected High
    bool mid_follows_bias = false;
    double high_row_low_share = 0.0;
    double low_row_high_share = 0.0;
    double mid_row_low_share = 0.0;
    double mid_row_high_share = 0.0;
};

/// Shares are taken among non-ND detections of a row. Bias fires when the
/// share strictly exceeds `threshold`; the mid row follows a flagged
/// direction when its share in that direction is at least `threshold`.
/// Throws ValueError unless threshold is in (0.5, 1].
BiasReport detect_bias(const ConfusionMatrix& cm, double threshold = 0.7);

struct NdObservation {
    Trait trait = Trait::Openness;
    PromptedLevel level = PromptedLevel::M;
    AnnotationScore score = AnnotationScore::non_distinguishable();
};

struct NdStats {
    std::size_t total = 0;
    std::size_t nd = 0;
    double rate = 0.0;
    /// Of the ND texts, the share prompted at L, M, H.
    std::array<double, 3> level_share{};
    /// ND rate within each prompted level.
    std::array<double, 3> rate_by_level{};
    std::array<std::size_t, 3> level_total{};
    std::array<std::size_t, 3> level_nd{};
};

std::map<Trait, NdStats> nd_distribution(std::span<const NdObservation> observations);

} // namespace personaforge::metrics
