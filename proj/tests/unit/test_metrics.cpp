#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "personaforge/metrics.hpp"

using namespace personaforge;
using namespace personaforge::metrics;

namespace {

AnnotationScore n(int v) { return AnnotationScore::numeric(v); }
const AnnotationScore kNd = AnnotationScore::non_distinguishable();

} // namespace

TEST_SUITE("metrics") {

TEST_CASE("alpha on a hand-worked matrix") {
    // item variances 2/3, 2/3, 2/3; totals 3, 6, 9 -> variance 6
    auto m = RatingMatrix::from_rows({{1, 1, 1}, {2, 2, 2}, {3, 3, 3}});
    CHECK(cronbach_alpha(m) == doctest::Approx(1.0));
    auto m2 = RatingMatrix::from_rows({{1, 2}, {2, 1}, {3, 3}});
    // var(i1)=var(i2)=2/3, totals 3,3,6 -> var 2; alpha = 2 * (1 - (4/3)/2) = 2/3
    CHECK(cronbach_alpha(m2) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("degenerate shapes are rejected") {
    CHECK_THROWS_AS(cronbach_alpha(RatingMatrix::from_rows({{1, 2}})), DegenerateMatrix);
    CHECK_THROWS_AS(cronbach_alpha(RatingMatrix::from_rows({{1}, {2}})), DegenerateMatrix);
    CHECK_THROWS_AS(cronbach_alpha(RatingMatrix::from_rows({{1, 2}, {1, 2}})), DegenerateMatrix);
    CHECK_THROWS_AS(RatingMatrix::from_rows({{1, 2}, {1}}), ValueError);
    CHECK_THROWS_AS(RatingMatrix(2, 2, {1, 2, 3}), ValueError);
}

TEST_CASE("lambda6 matches the regression oracle") {
    auto m = RatingMatrix::from_rows({{1, 2, 2}, {2, 2, 3}, {3, 4, 3}, {4, 3, 5}, {5, 5, 4}, {2, 1, 1}});
    oracle::Matrix o{{1, 2, 2}, {2, 2, 3}, {3, 4, 3}, {4, 3, 5}, {5, 5, 4}, {2, 1, 1}};
    CHECK(guttman_lambda6(m) == doctest::Approx(oracle::guttman_lambda6(o)).epsilon(1e-12));
    CHECK(guttman_lambda(m, GuttmanVariant::Lambda6) == guttman_lambda6(m));
    CHECK(guttman_lambda2(m) >= cronbach_alpha(m) - 1e-12);
}

TEST_CASE("lambda6 on singular covariance") {
    // parallel items: exact copies up to a shift
    auto parallel = RatingMatrix::from_rows({{1, 2, 3}, {2, 3, 4}, {4, 5, 6}, {5, 6, 7}});
    CHECK(guttman_lambda6(parallel) == doctest::Approx(1.0).epsilon(1e-12));
    // two identical items next to one the others cannot reproduce
    auto dup = RatingMatrix::from_rows({{1, 1, 3}, {2, 2, 1}, {3, 3, 5}, {4, 4, 2}, {5, 5, 4}});
    CHECK_THROWS_AS(guttman_lambda6(dup), SingularCovariance);
    // fewer respondents than items: every item is fitted exactly
    auto wide = RatingMatrix::from_rows({{1, 5, 2, 4}, {3, 1, 4, 2}, {5, 2, 1, 3}});
    CHECK(guttman_lambda6(wide) == doctest::Approx(1.0));
}

TEST_CASE("fleiss kappa on the textbook example") {
    std::vector<std::vector<int>> counts{{0, 0, 0, 0, 14}, {0, 2, 6, 4, 2}, {0, 0, 3, 5, 6}, {0, 3, 9, 2, 0},
                                         {2, 2, 8, 1, 1},  {7, 7, 0, 0, 0}, {3, 2, 6, 3, 0}, {2, 5, 3, 2, 2},
                                         {6, 5, 2, 1, 0},  {0, 2, 2, 3, 7}};
    CHECK(fleiss_kappa(counts) == doctest::Approx(0.20993).epsilon(1e-4));
    CHECK(fleiss_kappa({{3, 0}, {0, 3}}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(fleiss_kappa({{3, 0}, {3, 0}}), DegenerateAgreement);
    CHECK_THROWS_AS(fleiss_kappa({{3, 0}, {2, 0}}), ValueError);
    CHECK_THROWS_AS(fleiss_kappa({{1, 0}}), ValueError);
    CHECK_THROWS_AS(fleiss_kappa({}), EmptyInput);
}

TEST_CASE("score groups and prompted levels") {
    CHECK(score_to_group(n(-2)) == ScoreGroup::Low);
    CHECK(score_to_group(n(-1)) == ScoreGroup::Low);
    CHECK(score_to_group(n(0)) == ScoreGroup::Mid);
    CHECK(score_to_group(n(1)) == ScoreGroup::High);
    CHECK(score_to_group(n(2)) == ScoreGroup::High);
    CHECK(score_to_group(kNd) == ScoreGroup::NonDistinguishable);
    CHECK(prompt_score_to_level(PromptScore{1}) == PromptedLevel::L);
    CHECK(prompt_score_to_level(PromptScore{2}) == PromptedLevel::L);
    CHECK(prompt_score_to_level(PromptScore{3}) == PromptedLevel::M);
    CHECK(prompt_score_to_level(PromptScore{4}) == PromptedLevel::H);
    CHECK(prompt_score_to_level(PromptScore{5}) == PromptedLevel::H);
}

TEST_CASE("majority vote cases") {
    auto vote = [](AnnotationScore a, AnnotationScore b, AnnotationScore c) {
        std::array<AnnotationScore, 3> s{a, b, c};
        return majority_vote(s);
    };
    CHECK(vote(n(1), n(1), n(-2)) == n(1));
    CHECK(vote(kNd, kNd, n(2)) == kNd);
    CHECK(vote(n(-2), n(0), n(2)) == n(0));
    CHECK(vote(n(2), n(-1), n(1)) == n(1));
    CHECK(vote(kNd, n(-1), n(-2)) == n(-1)); // -1.5 truncates to -1
    CHECK(vote(n(2), kNd, n(-1)) == n(0));   // 0.5 truncates to 0
    std::array<AnnotationScore, 2> two{n(1), n(1)};
    CHECK_THROWS_AS(majority_vote(two), ValueError);
}

TEST_CASE("weighted prf") {
    std::vector<int> t{0, 0, 1, 1, 2}, p{0, 1, 1, 1, 0};
    auto r = weighted_prf(t, p);
    auto o = oracle::weighted_prf(t, p);
    CHECK(r.precision == doctest::Approx(o.precision));
    CHECK(r.recall == doctest::Approx(o.recall));
    CHECK(r.f1 == doctest::Approx(o.f1));
    // class 0: p 1/2 r 1/2; class 1: p 2/3 r 1; class 2: p 0 r 0
    CHECK(r.precision == doctest::Approx(0.4 * 0.5 + 0.4 * (2.0 / 3.0)));
    CHECK(r.recall == doctest::Approx(0.6));
    CHECK(r.support == 5);
    std::vector<int> shorter{0};
    CHECK_THROWS_AS(weighted_prf(t, shorter), ValueError);
    CHECK_THROWS_AS(weighted_prf(std::span<const int>{}, std::span<const int>{}), EmptyInput);
}

TEST_CASE("agreement levels") {
    std::vector<AnnotationScore> h{n(1), kNd, n(-2), n(0)}, c{n(2), kNd, kNd, n(0)};
    auto l1 = agreement_level1(h, c);
    // truth present 1,0,1,1 / predicted 1,0,0,1
    auto o1 = oracle::weighted_prf({1, 0, 1, 1}, {1, 0, 0, 1});
    CHECK(l1.f1 == doctest::Approx(o1.f1));
    auto l2 = agreement_level2(h, c);
    auto o2 = oracle::weighted_prf({2, 3, 0, 1}, {2, 3, 3, 1});
    CHECK(l2.f1 == doctest::Approx(o2.f1));

    std::vector<Level3Pair> pairs{{1.5, n(2)}, {std::nullopt, n(1)}, {-1.0, kNd}, {0.0, n(-1)}};
    auto l3 = agreement_level3(pairs);
    CHECK(l3.mae == doctest::Approx(0.75));
    CHECK(l3.used == 2);
    CHECK(l3.excluded == 2);
    std::vector<Level3Pair> none{{std::nullopt, n(1)}};
    CHECK_THROWS_AS(agreement_level3(none), EmptyInput);
    std::vector<AnnotationScore> shorter{n(1)};
    CHECK_THROWS_AS(agreement_level1(h, shorter), ValueError);
}

TEST_CASE("confusion matrix and bias flags") {
    std::vector<std::pair<PromptedLevel, ScoreGroup>> pairs;
    for (int i = 0; i < 8; ++i) pairs.emplace_back(PromptedLevel::H, ScoreGroup::Low);
    pairs.emplace_back(PromptedLevel::H, ScoreGroup::High);
    pairs.emplace_back(PromptedLevel::H, ScoreGroup::NonDistinguishable);
    for (int i = 0; i < 3; ++i) pairs.emplace_back(PromptedLevel::M, ScoreGroup::Low);
    pairs.emplace_back(PromptedLevel::L, ScoreGroup::Low);
    auto cm = confusion_matrix(pairs);
    CHECK(cm.total() == 14);
    CHECK(cm.row_total(PromptedLevel::H) == 10);
    CHECK(cm.at(PromptedLevel::H, ScoreGroup::Low) == 8);
    CHECK(cm.proportions()[2][0] == doctest::Approx(0.8));
    auto b = detect_bias(cm);
    CHECK(b.low_bias);
    CHECK_FALSE(b.high_bias);
    CHECK(b.mid_follows_bias);
    CHECK(b.high_row_low_share == doctest::Approx(8.0 / 9.0));
    CHECK_FALSE(detect_bias(cm, 0.9).low_bias);
    CHECK_THROWS_AS(detect_bias(cm, 0.5), ValueError);

    // exactly at the threshold does not fire
    std::vector<std::pair<PromptedLevel, ScoreGroup>> edge;
    for (int i = 0; i < 7; ++i) edge.emplace_back(PromptedLevel::H, ScoreGroup::Low);
    for (int i = 0; i < 3; ++i) edge.emplace_back(PromptedLevel::H, ScoreGroup::Mid);
    CHECK_FALSE(detect_bias(confusion_matrix(edge), 0.7).low_bias);
}

TEST_CASE("nd distribution") {
    std::vector<NdObservation> obs{{Trait::Neuroticism, PromptedLevel::L, kNd},
                                   {Trait::Neuroticism, PromptedLevel::L, n(1)},
                                   {Trait::Neuroticism, PromptedLevel::H, kNd},
                                   {Trait::Neuroticism, PromptedLevel::M, n(0)},
                                   {Trait::Openness, PromptedLevel::H, n(2)}};
    auto d = nd_distribution(obs);
    CHECK(d.at(Trait::Neuroticism).rate == doctest::Approx(0.5));
    CHECK(d.at(Trait::Neuroticism).level_share[0] == doctest::Approx(0.5));
    CHECK(d.at(Trait::Neuroticism).rate_by_level[2] == doctest::Approx(1.0));
    CHECK(d.at(Trait::Openness).nd == 0);
}

TEST_CASE("alpha is invariant to shifting an item") {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::vector<double>> rows(6, std::vector<double>(4));
        for (auto& r : rows) {
            for (auto& v : r) v = static_cast<double>(rng() % 5 + 1);
        }
        auto base = RatingMatrix::from_rows(rows);
        for (auto& r : rows) r[1] += 3.0;
        auto shifted = RatingMatrix::from_rows(rows);
        try {
            CHECK(cronbach_alpha(shifted) == doctest::Approx(cronbach_alpha(base)).epsilon(1e-12));
        } catch (const DegenerateMatrix&) {
        }
    }
}

}
