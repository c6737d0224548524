#include <gtest/gtest.h>

#include <cmath>

#include "cxr/error.hpp"
#include "cxr/eval.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace cxr;

namespace {

struct Scored {
    std::vector<double> scores;
    std::vector<Label> labels;
};

/// Random scores on a coarse grid (ties) or continuous, with both classes.
Scored random_scored(Rng& rng, std::size_t n, bool ties) {
    Scored s;
    for (std::size_t i = 0; i < n; ++i) {
        const bool pos = i == 0 || (i != 1 && rng.below(3) == 0);
        s.labels.push_back(pos ? Label::Positive : Label::Negative);
        const double shift = pos ? 0.2 : 0.0;
        s.scores.push_back(ties ? static_cast<double>(rng.below(12)) / 11.0 + shift
                                : rng.uniform() + shift);
    }
    return s;
}

}  // namespace

TEST(Roc, SeparatedAndUninformative) {
    std::vector<double> s = {0.9, 0.8, 0.7, 0.3, 0.2};
    std::vector<Label> l = {Label::Positive, Label::Positive, Label::Positive, Label::Negative, Label::Negative};
    EXPECT_EQ(roc(s, l).auc, 1.0);
    std::vector<double> same(5, 0.4);
    auto flat = roc(same, l);
    EXPECT_EQ(flat.auc, 0.5);
    EXPECT_EQ(flat.points.size(), 2u);
    EXPECT_TRUE(std::isinf(flat.points[0].threshold));
}

TEST(Roc, MatchesMannWhitney) {
    Rng rng(1);
    for (int t = 0; t < 20; ++t) {
        auto s = random_scored(rng, 1000, t % 2 == 0);
        EXPECT_NEAR(roc(s.scores, s.labels).auc, oracle::mann_whitney_auc(s.scores, s.labels), 1e-9);
    }
}

TEST(Roc, InvariantUnderIncreasingMaps) {
    Rng rng(2);
    for (int t = 0; t < 10; ++t) {
        auto s = random_scored(rng, 500, t % 2 == 0);
        const double base = roc(s.scores, s.labels).auc;
        std::vector<double> cube, affine;
        for (double x : s.scores) {
            cube.push_back(x * x * x);
            affine.push_back(2 * x + 1);
        }
        EXPECT_NEAR(roc(cube, s.labels).auc, base, 1e-12);
        EXPECT_NEAR(roc(affine, s.labels).auc, base, 1e-12);
    }
}

TEST(Roc, CurveStructure) {
    Rng rng(3);
    auto s = random_scored(rng, 300, true);
    auto c = roc(s.scores, s.labels);
    EXPECT_EQ(c.auc, trapezoid_auc(c.points));
    for (std::size_t i = 1; i < c.points.size(); ++i) {
        EXPECT_LT(c.points[i].threshold, c.points[i - 1].threshold);
        EXPECT_GE(c.points[i].fpr(), c.points[i - 1].fpr());
        EXPECT_GE(c.points[i].sensitivity, c.points[i - 1].sensitivity);
        EXPECT_LE(c.points[i].specificity, c.points[i - 1].specificity);
    }
    EXPECT_EQ(c.points.back().sensitivity, 1.0);
    EXPECT_EQ(c.points.back().specificity, 0.0);
}

TEST(Roc, VoteScoresGiveAtMostKPlusTwoPoints) {
    Rng rng(4);
    for (std::size_t k : {1u, 11u, 51u}) {
        std::vector<double> scores;
        std::vector<Label> labels;
        for (int i = 0; i < 2000; ++i) {
            scores.push_back(static_cast<double>(rng.below(k + 1)) / static_cast<double>(k));
            labels.push_back(i % 2 ? Label::Positive : Label::Negative);
        }
        EXPECT_LE(roc(scores, labels).points.size(), k + 2);
    }
}

TEST(Roc, Errors) {
    std::vector<double> s = {0.1, 0.2};
    std::vector<Label> one = {Label::Positive, Label::Positive};
    EXPECT_THROW(roc(s, one), ValidationError);
    std::vector<Label> short_labels = {Label::Positive};
    EXPECT_THROW(roc(s, short_labels), ValidationError);
    std::vector<double> nan = {0.1, std::nan("")};
    std::vector<Label> both = {Label::Positive, Label::Negative};
    EXPECT_THROW(roc(nan, both), ValidationError);
}

TEST(Youden, PublishedOperatingPoint) {
    EXPECT_EQ(youden_j(86, 100, 84, 100), 0.70);
    EXPECT_NEAR(youden_j(73, 100, 75, 100), 0.48, 1e-15);
}

TEST(Youden, DegenerateSinglePoint) {
    RocCurve c;
    c.points.push_back({0.5, 0, 0, 0.5, 0.5});
    EXPECT_EQ(youden(c).j, 0.0);
    EXPECT_EQ(youden(c).index, 0u);
    EXPECT_THROW(youden(RocCurve{}), ValidationError);
}

TEST(Youden, MatchesExhaustiveScan) {
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
        auto s = random_scored(rng, 50 + rng.below(400), t % 2 == 0);
        auto c = roc(s.scores, s.labels);
        auto y = youden(c);
        double best = -2.0;
        for (const auto& p : c.points) best = std::max(best, youden_j(p.tp, c.positives, c.negatives - p.fp, c.negatives));
        EXPECT_EQ(y.j, best);
        EXPECT_EQ(y.index, c.youden_index_argmax);
        // Tie-break: among maximisers, highest sensitivity then lowest threshold.
        for (std::size_t i = 0; i < c.points.size(); ++i) {
            const auto& p = c.points[i];
            if (youden_j(p.tp, c.positives, c.negatives - p.fp, c.negatives) != best) continue;
            EXPECT_GE(y.sensitivity, p.sensitivity);
            if (p.sensitivity == y.sensitivity) {
                EXPECT_LE(y.threshold, p.threshold);
            }
        }
        // Classifying at the chosen threshold reproduces the point.
        auto conf = confusion(s.scores, s.labels, y.threshold);
        EXPECT_EQ(conf.sensitivity(), y.sensitivity);
        EXPECT_EQ(conf.specificity(), y.specificity);
    }
}

TEST(Youden, PrefersHigherSensitivityOnTies) {
    // Points (sens, spec): (0.5, 1.0) and (1.0, 0.5) both give J = 0.5.
    std::vector<double> s = {0.9, 0.6, 0.5, 0.1};
    std::vector<Label> l = {Label::Positive, Label::Negative, Label::Positive, Label::Negative};
    auto y = youden(roc(s, l));
    EXPECT_EQ(y.j, 0.5);
    EXPECT_EQ(y.sensitivity, 1.0);
    EXPECT_EQ(y.threshold, 0.5);
}

TEST(Confusion, Boundaries) {
    std::vector<double> s = {0.7, 0.8, 0.9};
    std::vector<Label> pos(3, Label::Positive);
    EXPECT_EQ(confusion(s, pos, 0.5), (Confusion{3, 0, 0, 0}));
    std::vector<Label> mixed = {Label::Negative, Label::Positive, Label::Negative};
    EXPECT_EQ(confusion(s, mixed, 0.0), (Confusion{1, 2, 0, 0}));
    EXPECT_EQ(confusion(s, mixed, 0.8), (Confusion{1, 1, 1, 0}));
    EXPECT_EQ(confusion(s, mixed, 0.95), (Confusion{0, 0, 2, 1}));
    std::vector<Label> two(2, Label::Positive);
    EXPECT_THROW(confusion(s, two, 0.5), ValidationError);
}
