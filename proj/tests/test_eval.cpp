#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fcnad/eval.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace fcnad;
using gen::mask_with;
using gen::random_scores;

TEST(Roc, AucMatchesPairwiseCount) {
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const auto s = random_scores(rng, 5 + uniform_index(rng, 60), 1 + trial % 8);
        EXPECT_NEAR(roc(s).auc, oracle::pairwise_auc(s), 1e-9) << "trial " << trial;
    }
}

TEST(Roc, EerMatchesDenseSweep) {
    Rng rng(18);
    for (int trial = 0; trial < 100; ++trial) {
        const auto s = random_scores(rng, 5 + uniform_index(rng, 60), 1 + trial % 8);
        EXPECT_NEAR(roc(s).eer, oracle::dense_sweep_eer(s), 1e-6) << "trial " << trial;
    }
}

TEST(Roc, PerfectAndInvertedSeparation) {
    std::vector<LabeledScore> s;
    for (int k = 0; k < 10; ++k) s.push_back({k, k < 5 ? 0.1 * k : 1.0 + k, k >= 5});
    const auto good = roc(s);
    EXPECT_DOUBLE_EQ(good.auc, 1.0);
    EXPECT_DOUBLE_EQ(good.eer, 0.0);
    for (auto& v : s) v.positive = !v.positive;
    const auto bad = roc(s);
    EXPECT_DOUBLE_EQ(bad.auc, 0.0);
    EXPECT_DOUBLE_EQ(bad.eer, 1.0);
}

TEST(Roc, CurveEndsAndMonotone) {
    Rng rng(19);
    const auto curve = roc(random_scores(rng, 80, 5));
    EXPECT_TRUE(std::isinf(curve.points.front().threshold));
    EXPECT_EQ(curve.points.front().fpr, 0.0);
    EXPECT_EQ(curve.points.back().fpr, 1.0);
    EXPECT_EQ(curve.points.back().tpr, 1.0);
    for (std::size_t k = 1; k < curve.points.size(); ++k) {
        EXPECT_GE(curve.points[k].fpr, curve.points[k - 1].fpr);
        EXPECT_GE(curve.points[k].tpr, curve.points[k - 1].tpr);
        EXPECT_LT(curve.points[k].threshold, curve.points[k - 1].threshold);
    }
}

TEST(Roc, InvariantUnderMonotoneTransform) {
    Rng rng(20);
    auto s = random_scores(rng, 70, 6);
    const auto a = roc(s);
    for (auto& v : s) v.score = std::exp(0.5 * v.score) - 3.0;
    const auto b = roc(s);
    EXPECT_NEAR(a.auc, b.auc, 1e-12);
    EXPECT_NEAR(a.eer, b.eer, 1e-12);
}

TEST(Roc, SingleClassIsUndefined) {
    std::vector<LabeledScore> s{{0, 0.3, false}, {1, 0.9, false}};
    try {
        roc(s);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UndefinedMetric);
    }
    s.push_back({2, std::nan(""), true});
    EXPECT_THROW(roc(s), Error);
}

TEST(Roc, TextAndJsonCarryTheNumbers) {
    std::vector<LabeledScore> s{{0, 0.1, false}, {1, 0.9, true}, {2, 0.4, false}, {3, 0.5, true}};
    const auto c = roc(s);
    const auto j = roc_json(c, "frame");
    EXPECT_EQ(j["level"], "frame");
    EXPECT_EQ(j["points"][0]["threshold"], "inf");
    EXPECT_DOUBLE_EQ(j["auc"].get<double>(), 1.0);
    EXPECT_NE(roc_text(c, "frame").find("AUC"), std::string::npos);
    EXPECT_EQ(roc_csv(c).substr(0, 17), "threshold,fpr,tpr");
}

TEST(PixelMatch, FortyPercentBoundary) {
    const DetectionMask truth = mask_with(10, 10, 100);
    EXPECT_FALSE(pixel_level_match(mask_with(10, 10, 39), truth));
    EXPECT_TRUE(pixel_level_match(mask_with(10, 10, 40), truth));
    EXPECT_TRUE(pixel_level_match(mask_with(10, 10, 41), truth));
}

TEST(PixelMatch, EdgeCases) {
    const DetectionMask empty(4, 4);
    EXPECT_FALSE(pixel_level_match(mask_with(4, 4, 16), empty));
    const DetectionMask one = mask_with(4, 4, 1);
    EXPECT_TRUE(pixel_level_match(one, one));
    EXPECT_FALSE(pixel_level_match(empty, one));
    const DetectionMask full = mask_with(4, 4, 16);
    EXPECT_TRUE(pixel_level_match(full, full));
    EXPECT_TRUE(pixel_level_match(full, mask_with(4, 4, 5)));
    EXPECT_THROW(pixel_level_match(DetectionMask(4, 5), full), Error);
    EXPECT_FALSE(frame_level_label(empty));
    EXPECT_TRUE(frame_level_label(one));
}

TEST(Sweep, ThinsToCapKeepingEnds) {
    std::vector<double> v;
    for (int k = 0; k < 2000; ++k) v.push_back(k % 1000);
    const auto t = sweep_thresholds(v, 50);
    EXPECT_LE(t.size(), 50u);
    EXPECT_EQ(t.front(), 999.0);
    EXPECT_EQ(t.back(), 0.0);
    EXPECT_EQ(sweep_thresholds({3.0, 1.0, 3.0}, 50), (std::vector<double>{3.0, 1.0}));
}

TEST(PixelRoc, SeparatedFramesGiveUnitArea) {
    const NetworkSpec net = default_network(1);
    const auto g = geometry_of(net, net.tap_index);
    const auto [gh, gw] = grid_dims(net, net.tap_index, 120, 160);
    std::vector<PixelFrame> frames;
    for (int k = 0; k < 6; ++k) {
        PixelFrame f{k, gh, gw, std::vector<double>(gh * gw, 0.1), DetectionMask(120, 160, k)};
        if (k % 2 == 0) {
            // truth under cells (6..7, 8..9), which those cells' fields cover entirely
            for (std::size_t y = 60; y < 70; ++y) {
                for (std::size_t x = 75; x < 85; ++x) f.truth.pixels[y * 160 + x] = 1;
            }
            for (std::size_t i = 6; i < 8; ++i) {
                for (std::size_t j = 8; j < 10; ++j) f.cell_scores[i * gw + j] = 5.0;
            }
        }
        frames.push_back(std::move(f));
    }
    const auto curve = pixel_level_roc(frames, g, 3);
    EXPECT_EQ(curve.positives, 3u);
    EXPECT_EQ(curve.negatives, 3u);
    EXPECT_DOUBLE_EQ(curve.auc, 1.0);
    EXPECT_DOUBLE_EQ(curve.points.back().fpr, 1.0);
    EXPECT_DOUBLE_EQ(curve.points.back().tpr, 1.0);
}

TEST(PixelRoc, MisplacedDetectionsNeverCount) {
    const NetworkSpec net = default_network(1);
    const auto g = geometry_of(net, net.tap_index);
    const auto [gh, gw] = grid_dims(net, net.tap_index, 120, 160);
    std::vector<PixelFrame> frames;
    for (int k = 0; k < 4; ++k) {
        PixelFrame f{k, gh, gw, std::vector<double>(gh * gw, 0.0), DetectionMask(120, 160, k)};
        if (k < 2) {
            for (std::size_t x = 150; x < 160; ++x) f.truth.pixels[115 * 160 + x] = 1;
            f.cell_scores[0] = 9.0;
        }
        frames.push_back(std::move(f));
    }
    const auto curve = pixel_level_roc(frames, g, 0);
    // at the lowest threshold every cell votes, so the truth is covered; before that it never is
    for (std::size_t k = 0; k + 1 < curve.points.size(); ++k) {
        if (curve.points[k].threshold > 0.0) EXPECT_EQ(curve.points[k].tpr, 0.0);
    }
    EXPECT_LE(curve.auc, 0.5 + 1e-12);
}
