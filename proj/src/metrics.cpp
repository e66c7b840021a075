#include "personaforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <Eigen/Dense>
#include <fmt/format.h>

namespace personaforge::metrics {

RatingMatrix::RatingMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) throw ValueError("rating matrix size mismatch");
}

RatingMatrix RatingMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return RatingMatrix(0, 0, {});
    auto cols = rows.front().size();
    std::vector<double> v;
    v.reserve(rows.size() * cols);
    for (const auto& r : rows) {
        if (r.size() != cols) throw ValueError("rating matrix rows must have equal length");
        v.insert(v.end(), r.begin(), r.end());
    }
    return RatingMatrix(rows.size(), cols, std::move(v));
}

std::vector<double> RatingMatrix::column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = at(r, c);
    return out;
}

namespace {

void require_shape(const RatingMatrix& m) {
    if (m.rows() < 2 || m.cols() < 2) {
        throw DegenerateMatrix(fmt::format("reliability needs at least 2x2 cells, got {}x{}", m.rows(),
                                           m.cols()));
    }
}

Eigen::MatrixXd to_eigen(const RatingMatrix& m) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m.at(r, c);
        }
    }
    return x;
}

// Population covariance of the columns.
Eigen::MatrixXd covariance(const RatingMatrix& m) {
    Eigen::MatrixXd x = to_eigen(m);
    Eigen::RowVectorXd mean = x.colwise().mean();
    Eigen::MatrixXd centered = x.rowwise() - mean;
    return (centered.transpose() * centered) / static_cast<double>(m.rows());
}

double population_variance(const std::vector<double>& v) {
    double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(v.size());
}

double total_variance(const RatingMatrix& m) {
    std::vector<double> totals(m.rows(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) totals[r] += m.at(r, c);
    }
    double var = population_variance(totals);
    if (!(var > 0.0)) throw DegenerateMatrix("row totals have zero variance");
    return var;
}

} // namespace

double cronbach_alpha(const RatingMatrix& m) {
    require_shape(m);
    double total = total_variance(m);
    double item_sum = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) item_sum += population_variance(m.column(c));
    auto k = static_cast<double>(m.cols());
    return k / (k - 1.0) * (1.0 - item_sum / total);
}

double guttman_lambda6(const RatingMatrix& m) {
    require_shape(m);
    double total = total_variance(m);
    Eigen::MatrixXd cov = covariance(m);
    const auto k = cov.rows();

    // Scale-aware rank test: the covariance is singular when a pivot falls
    // below a relative tolerance.
    Eigen::FullPivLU<Eigen::MatrixXd> lu(cov);
    lu.setThreshold(1e-10);
    if (lu.isInvertible()) {
        Eigen::MatrixXd inv = lu.inverse();
        double residual_sum = 0.0;
        for (Eigen::Index i = 0; i < k; ++i) residual_sum += 1.0 / inv(i, i);
        return 1.0 - residual_sum / total;
    }

    // Singular covariance: least-squares residuals still exist. If every item
    // is reproduced exactly by the others the items are parallel and the
    // coefficient is 1; otherwise the regression weights are unidentified.
    Eigen::MatrixXd x = to_eigen(m);
    Eigen::RowVectorXd mean = x.colwise().mean();
    Eigen::MatrixXd centered = x.rowwise() - mean;
    for (Eigen::Index i = 0; i < k; ++i) {
        Eigen::MatrixXd others(centered.rows(), k - 1);
        for (Eigen::Index j = 0, c = 0; j < k; ++j) {
            if (j != i) others.col(c++) = centered.col(j);
        }
        Eigen::VectorXd y = centered.col(i);
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(others);
        cod.setThreshold(1e-10);
        Eigen::VectorXd beta = cod.solve(y);
        double resid = (y - others * beta).squaredNorm() / static_cast<double>(centered.rows());
        double scale = std::max(cov(i, i), 1e-300);
        if (resid > 1e-10 * scale) {
            throw SingularCovariance("item covariance matrix is singular");
        }
    }
    return 1.0;
}

double guttman_lambda2(const RatingMatrix& m) {
    require_shape(m);
    double total = total_variance(m);
    Eigen::MatrixXd cov = covariance(m);
    auto k = static_cast<double>(cov.rows());
    double diag = cov.diagonal().sum();
    double off_sq = cov.array().square().sum() - cov.diagonal().array().square().sum();
    double lambda1 = 1.0 - diag / total;
    return lambda1 + std::sqrt(k / (k - 1.0) * off_sq) / total;
}

double guttman_lambda(const RatingMatrix& m, GuttmanVariant variant) {
    return variant == GuttmanVariant::Lambda2 ? guttman_lambda2(m) : guttman_lambda6(m);
}

double fleiss_kappa(const std::vector<std::vector<int>>& counts) {
    if (counts.empty()) throw EmptyInput("Fleiss' kappa needs at least one subject");
    const auto categories = counts.front().size();
    int raters = -1;
    for (const auto& row : counts) {
        if (row.size() != categories) throw ValueError("every subject needs the same category count");
        int n = 0;
        for (int c : row) {
            if (c < 0) throw ValueError("category counts must be non-negative");
            n += c;
        }
        if (raters < 0) raters = n;
        if (n != raters) throw ValueError("every subject must be rated by the same number of raters");
    }
    if (raters < 2) throw ValueError("Fleiss' kappa needs at least two raters per subject");

    const auto subjects = static_cast<double>(counts.size());
    const auto n = static_cast<double>(raters);
    double p_bar = 0.0;
    std::vector<double> column(categories, 0.0);
    for (const auto& row : counts) {
        double sq = 0.0;
        for (std::size_t j = 0; j < categories; ++j) {
            sq += static_cast<double>(row[j]) * row[j];
            column[j] += row[j];
        }
        p_bar += (sq - n) / (n * (n - 1.0));
    }
    p_bar /= subjects;
    double p_e = 0.0;
    for (double c : column) {
        double p = c / (subjects * n);
        p_e += p * p;
    }
    if (p_e >= 1.0) throw DegenerateAgreement("chance agreement is 1 (a single category was used)");
    return (p_bar - p_e) / (1.0 - p_e);
}

ScoreGroup score_to_group(const AnnotationScore& s) noexcept {
    if (s.is_nd()) return ScoreGroup::NonDistinguishable;
    int v = s.value();
    if (v < 0) return ScoreGroup::Low;
    if (v == 0) return ScoreGroup::Mid;
    return ScoreGroup::High;
}

PromptedLevel prompt_score_to_level(PromptScore p) noexcept {
    if (p.value() <= 2) return PromptedLevel::L;
    if (p.value() == 3) return PromptedLevel::M;
    return PromptedLevel::H;
}

AnnotationScore majority_vote(std::span<const AnnotationScore> scores) {
    if (scores.size() != 3) {
        throw ValueError(fmt::format("majority vote needs exactly 3 scores, got {}", scores.size()));
    }
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = i + 1; j < 3; ++j) {
            if (scores[i] == scores[j]) return scores[i];
        }
    }
    std::vector<int> numeric;
    for (const auto& s : scores) {
        if (s.is_numeric()) numeric.push_back(s.value());
    }
    std::sort(numeric.begin(), numeric.end());
    if (numeric.size() == 3) return AnnotationScore::numeric(numeric[1]);
    // one ND and two distinct numbers: midpoint, truncated toward zero
    return AnnotationScore::numeric((numeric[0] + numeric[1]) / 2);
}

WeightedPrf weighted_prf(std::span<const int> truth, std::span<const int> predicted) {
    if (truth.size() != predicted.size()) throw ValueError("label sequences differ in length");
    if (truth.empty()) throw EmptyInput("no labels to compare");
    std::set<int> labels(truth.begin(), truth.end());
    labels.insert(predicted.begin(), predicted.end());

    WeightedPrf out;
    out.support = truth.size();
    const auto total = static_cast<double>(truth.size());
    for (int label : labels) {
        std::size_t tp = 0, true_n = 0, pred_n = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            bool t = truth[i] == label;
            bool p = predicted[i] == label;
            true_n += t;
            pred_n += p;
            tp += t && p;
        }
        if (true_n == 0) continue; // zero weight
        double precision = pred_n ? static_cast<double>(tp) / static_cast<double>(pred_n) : 0.0;
        double recall = static_cast<double>(tp) / static_cast<double>(true_n);
        double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        double w = static_cast<double>(true_n) / total;
        out.precision += w * precision;
        out.recall += w * recall;
        out.f1 += w * f1;
    }
    return out;
}

namespace {

template <typename Fn>
WeightedPrf labelled_prf(std::span<const AnnotationScore> human, std::span<const AnnotationScore> clf,
                         Fn label) {
    if (human.size() != clf.size()) throw ValueError("human and classifier scores are not aligned");
    if (human.empty()) throw EmptyInput("no aligned scores");
    std::vector<int> t, p;
    t.reserve(human.size());
    p.reserve(human.size());
    for (std::size_t i = 0; i < human.size(); ++i) {
        t.push_back(label(human[i]));
        p.push_back(label(clf[i]));
    }
    return weighted_prf(t, p);
}

} // namespace

WeightedPrf agreement_level1(std::span<const AnnotationScore> human,
                             std::span<const AnnotationScore> classifier) {
    return labelled_prf(human, classifier, [](const AnnotationScore& s) { return s.is_numeric() ? 1 : 0; });
}

WeightedPrf agreement_level2(std::span<const AnnotationScore> human,
                             std::span<const AnnotationScore> classifier) {
    return labelled_prf(human, classifier,
                        [](const AnnotationScore& s) { return static_cast<int>(score_to_group(s)); });
}

MaeResult agreement_level3(std::span<const Level3Pair> pairs) {
    MaeResult out;
    double sum = 0.0;
    for (const auto& p : pairs) {
        if (!p.human_mean || p.classifier.is_nd()) {
            ++out.excluded;
            continue;
        }
        sum += std::abs(static_cast<double>(p.classifier.value()) - *p.human_mean);
        ++out.used;
    }
    if (out.used == 0) throw EmptyInput("no pairs numeric on both sides");
    out.mae = sum / static_cast<double>(out.used);
    return out;
}

int ConfusionMatrix::total() const noexcept {
    int t = 0;
    for (const auto& row : counts) t += std::accumulate(row.begin(), row.end(), 0);
    return t;
}

int ConfusionMatrix::row_total(PromptedLevel l) const noexcept {
    const auto& row = counts[static_cast<std::size_t>(l)];
    return std::accumulate(row.begin(), row.end(), 0);
}

int ConfusionMatrix::at(PromptedLevel l, ScoreGroup g) const noexcept {
    return counts[static_cast<std::size_t>(l)][static_cast<std::size_t>(g)];
}

std::array<std::array<double, 4>, 3> ConfusionMatrix::proportions() const noexcept {
    std::array<std::array<double, 4>, 3> out{};
    for (std::size_t r = 0; r < 3; ++r) {
        int rt = std::accumulate(counts[r].begin(), counts[r].end(), 0);
        if (rt == 0) continue;
        for (std::size_t c = 0; c < 4; ++c) out[r][c] = static_cast<double>(counts[r][c]) / rt;
    }
    return out;
}

ConfusionMatrix confusion_matrix(std::span<const std::pair<PromptedLevel, ScoreGroup>> pairs) {
    ConfusionMatrix cm;
    for (const auto& [level, group] : pairs) {
        cm.counts[static_cast<std::size_t>(level)][static_cast<std::size_t>(group)] += 1;
    }
    return cm;
}

BiasReport detect_bias(const ConfusionMatrix& cm, double threshold) {
    if (!(threshold > 0.5 && threshold <= 1.0)) {
        throw ValueError(fmt::format("bias threshold {} outside (0.5, 1]", threshold));
    }
    auto share = [&](PromptedLevel row, ScoreGroup g) {
        int detected = cm.at(row, ScoreGroup::Low) + cm.at(row, ScoreGroup::Mid) + cm.at(row, ScoreGroup::High);
        return detected == 0 ? 0.0 : static_cast<double>(cm.at(row, g)) / detected;
    };
    BiasReport b;
    b.high_row_low_share = share(PromptedLevel::H, ScoreGroup::Low);
    b.low_row_high_share = share(PromptedLevel::L, ScoreGroup::High);
    b.mid_row_low_share = share(PromptedLevel::M, ScoreGroup::Low);
    b.mid_row_high_share = share(PromptedLevel::M, ScoreGroup::High);
    b.low_bias = b.high_row_low_share > threshold;
    b.high_bias = b.low_row_high_share > threshold;
    b.mid_follows_bias = (b.low_bias && b.mid_row_low_share >= threshold) ||
                         (b.high_bias && b.mid_row_high_share >= threshold);
    return b;
}

std::map<Trait, NdStats> nd_distribution(std::span<const NdObservation> observations) {
    std::map<Trait, NdStats> out;
    for (const auto& o : observations) {
        auto& s = out[o.trait];
        auto li = static_cast<std::size_t>(o.level);
        ++s.total;
        ++s.level_total[li];
        if (o.score.is_nd()) {
            ++s.nd;
            ++s.level_nd[li];
        }
    }
    for (auto& [trait, s] : out) {
        s.rate = s.total ? static_cast<double>(s.nd) / static_cast<double>(s.total) : 0.0;
        for (std::size_t l = 0; l < 3; ++l) {
            s.level_share[l] = s.nd ? static_cast<double>(s.level_nd[l]) / static_cast<double>(s.nd) : 0.0;
            s.rate_by_level[l] = s.level_total[l]
                                     ? static_cast<double>(s.level_nd[l]) / static_cast<double>(s.level_total[l])
                                     : 0.0;
        }
    }
    return out;
}

} // namespace personaforge::metrics
