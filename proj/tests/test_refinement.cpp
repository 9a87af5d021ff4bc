#include <gtest/gtest.h>

#include <cmath>

#include "afb/errors.hpp"
#include "afb/refinement.hpp"
#include "test_util.hpp"

using namespace afb;

namespace {

PixelFeatures random_feats(Rng& rng, std::size_t h, std::size_t w, std::size_t d = 3) {
    PixelFeatures f{Grid<Vec32>(h, w)};
    for (auto& v : f.r.cells()) v = test::random_vec(rng, d);
    return f;
}

std::vector<ScalarMap> random_masks(Rng& rng, std::size_t n, std::size_t h, std::size_t w) {
    return normalize(test::random_maps(rng, n, h, w, 2.0)).masks;
}

RefineSample random_sample(Rng& rng, std::size_t n, std::size_t h, std::size_t w) {
    RefineSample s;
    s.masks = random_masks(rng, n, h, w);
    s.u = uncertainty_map(s.masks);
    s.feats = random_feats(rng, h, w);
    s.labels = test::random_labels(rng, h, w, n);
    return s;
}

}  // namespace

TEST(LocalReference, Examples) {
    const std::size_t h = 3, w = 3;
    PixelFeatures c{Grid<Vec32>(h, w, Vec32{0.25f, -2.0f})};
    const LocalReference uni = local_reference({ScalarMap(h, w, 1.0), ScalarMap(h, w, 0.0)}, c, 1);
    for (const Vec32& y : uni.refs[0].cells()) {
        EXPECT_FLOAT_EQ(y[0], 0.25f);
        EXPECT_FLOAT_EQ(y[1], -2.0f);
    }
    for (std::size_t p = 0; p < h * w; ++p) {
        EXPECT_TRUE(uni.supported[0][p]);
        EXPECT_FALSE(uni.supported[1][p]);
        EXPECT_EQ(uni.refs[1][p], (Vec32{0.0f, 0.0f}));
    }

    // Window of two pixels: features (1,0) and (0,1) with weights 0.75, 0.25.
    PixelFeatures two{Grid<Vec32>(1, 2)};
    two.r[0] = Vec32{1, 0};
    two.r[1] = Vec32{0, 1};
    ScalarMap m(1, 2);
    m[0] = 0.75;
    m[1] = 0.25;
    const LocalReference wm = local_reference({m, ScalarMap(1, 2, 0.5)}, two, 1);
    EXPECT_NEAR(wm.refs[0][0][0], 0.75, 1e-6);
    EXPECT_NEAR(wm.refs[0][0][1], 0.25, 1e-6);
}

TEST(LocalReference, BruteForceOracle) {
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t h = 1 + rng.below(8), w = 1 + rng.below(8), r = 1 + rng.below(2);
        const auto masks = random_masks(rng, 3, h, w);
        const auto feats = random_feats(rng, h, w);
        const LocalReference got = local_reference(masks, feats, r);
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t x = 0; x < w; ++x) {
                    double num[3] = {0, 0, 0}, den = 0.0;
                    for (std::size_t qy = 0; qy < h; ++qy) {
                        for (std::size_t qx = 0; qx < w; ++qx) {
                            if (std::abs(double(qy) - double(y)) > double(r) || std::abs(double(qx) - double(x)) > double(r)) continue;
                            den += masks[i](qy, qx);
                            for (int d = 0; d < 3; ++d) num[d] += masks[i](qy, qx) * feats.r(qy, qx)[d];
                        }
                    }
                    for (int d = 0; d < 3; ++d) ASSERT_NEAR(got.refs[i](y, x)[d], num[d] / den, 1e-6);
                }
            }
        }
    }
}

TEST(ConfidenceScores, Examples) {
    const auto flat = confidence_scores({ScalarMap(4, 5, 0.3)}, 1);
    for (double v : flat[0].cells()) EXPECT_EQ(v, 0.3);
    ScalarMap point(5, 5, 0.1);
    point(2, 2) = 1.0;
    const ScalarMap c = confidence_scores({point}, 1)[0];
    for (std::size_t y = 0; y < 5; ++y) {
        for (std::size_t x = 0; x < 5; ++x) {
            const bool near = y >= 1 && y <= 3 && x >= 1 && x <= 3;
            EXPECT_EQ(c(y, x), near ? 1.0 : 0.1);
        }
    }
}

TEST(ConfidenceScores, BruteForceOracle) {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t h = 1 + rng.below(8), w = 1 + rng.below(8), r = 1 + rng.below(3);
        const auto masks = random_masks(rng, 2, h, w);
        const auto got = confidence_scores(masks, r);
        for (std::size_t i = 0; i < 2; ++i) {
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t x = 0; x < w; ++x) {
                    double mx = -INFINITY;
                    for (std::size_t qy = y >= r ? y - r : 0; qy <= std::min(h - 1, y + r); ++qy) {
                        for (std::size_t qx = x >= r ? x - r : 0; qx <= std::min(w - 1, x + r); ++qx)
                            mx = std::max(mx, masks[i](qy, qx));
                    }
                    ASSERT_EQ(got[i](y, x), mx);
                }
            }
        }
    }
}

TEST(Refine, NoOpBelowThreshold) {
    Rng rng(3);
    const auto masks = random_masks(rng, 3, 6, 7);
    UncertaintyMap u{ScalarMap(6, 7, 0.7)};
    RefineConfig cfg;
    const RefineResult r = refine(masks, u, random_feats(rng, 6, 7), cfg);
    EXPECT_EQ(r.refined_pixels, 0u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(r.scores[i], masks[i]);
    EXPECT_EQ(r.labels, argmax_labels(masks));
}

TEST(Refine, HandEvaluatedPixel) {
    PixelFeatures f{Grid<Vec32>(1, 3)};
    f.r[0] = Vec32{1, 0};
    f.r[1] = Vec32{1, 0};
    f.r[2] = Vec32{-1, 0};
    ScalarMap m0(1, 3), m1(1, 3);
    m0[0] = 1.0, m1[0] = 0.0;
    m0[1] = 0.5, m1[1] = 0.5;
    m0[2] = 0.0, m1[2] = 1.0;
    UncertaintyMap u{ScalarMap(1, 3, 0.0)};
    u.u[1] = 1.0;
    RefineConfig cfg;
    const RefineResult r = refine({m0, m1}, u, f, cfg);
    EXPECT_EQ(r.refined_pixels, 1u);
    EXPECT_NEAR(r.scores[0][1], 1.5, 1e-6);
    EXPECT_NEAR(r.scores[1][1], -0.5, 1e-6);
    EXPECT_EQ(r.labels[1], 0);
    EXPECT_EQ(r.masks[0][1], 1.0);
    EXPECT_EQ(r.masks[1][1], 0.0);
}

TEST(Refine, BoundsAndConfidentPixelsPreserved) {
    Rng rng(4);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t h = 2 + rng.below(8), w = 2 + rng.below(8);
        const auto masks = random_masks(rng, 3, h, w);
        const UncertaintyMap u = uncertainty_map(masks);
        RefineConfig cfg;
        cfg.u_threshold = rng.uniform(0.0, 0.9);
        cfg.scorer = rng.uniform() < 0.5 ? Scorer::fixed_cosine() : Scorer::trainable(rng.normal(), rng.normal());
        const RefineResult r = refine(masks, u, random_feats(rng, h, w), cfg);
        const auto c = confidence_scores(masks, cfg.radius);
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t p = 0; p < h * w; ++p) {
                if (u.u[p] <= cfg.u_threshold) {
                    EXPECT_EQ(r.scores[i][p], masks[i][p]);
                } else {
                    EXPECT_LE(std::abs(r.scores[i][p] - masks[i][p]), u.u[p] * c[i][p] + 1e-12);
                }
                EXPECT_GE(r.masks[i][p], 0.0);
                EXPECT_LE(r.masks[i][p], 1.0);
            }
        }
        EXPECT_EQ(r.labels, argmax_labels(r.scores));
    }
}

TEST(Refine, Locality) {
    Rng rng(5);
    const std::size_t h = 9, w = 9;
    auto masks = random_masks(rng, 2, h, w);
    UncertaintyMap u{ScalarMap(h, w, 1.0)};
    auto feats = random_feats(rng, h, w);
    RefineConfig cfg;
    cfg.u_threshold = 0.0;
    const RefineResult a = refine(masks, u, feats, cfg);
    // Change everything outside the 5x5 block that can reach pixel (4,4) via radius-1 windows.
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            if (y >= 2 && y <= 6 && x >= 2 && x <= 6) continue;
            masks[0](y, x) = rng.uniform();
            masks[1](y, x) = rng.uniform();
            feats.r(y, x) = test::random_vec(rng, 3);
        }
    }
    const RefineResult b = refine(masks, u, feats, cfg);
    EXPECT_EQ(a.scores[0](4, 4), b.scores[0](4, 4));
    EXPECT_EQ(a.scores[1](4, 4), b.scores[1](4, 4));
}

TEST(Refine, ArgmaxTiesToSmallerIndex) {
    std::vector<ScalarMap> maps{ScalarMap(1, 1, 0.4), ScalarMap(1, 1, 0.4), ScalarMap(1, 1, 0.2)};
    EXPECT_EQ(argmax_labels(maps)[0], 0);
}

TEST(Scorer, RangeAndKinds) {
    const Scorer fixed = Scorer::fixed_cosine();
    EXPECT_EQ(fixed.score(0.3), 0.3);
    EXPECT_EQ(fixed.score(1.0000001), 1.0);
    const Scorer t = Scorer::trainable(50.0, -3.0);
    for (double c = -1.0; c <= 1.0; c += 0.01) {
        EXPECT_LE(std::abs(t.score(c)), 1.0);
    }
    EXPECT_NEAR(Scorer::trainable(2.0, 0.5).score(0.25), std::tanh(1.0), 1e-15);
    EXPECT_EQ(fixed.kind_name(), "fixed-cosine");
    EXPECT_EQ(t.kind_name(), "trainable-affine");
}

TEST(RefineConfig, Validation) {
    RefineConfig c;
    c.radius = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.u_threshold = 1.5;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(TrainScorer, FixedScorerRejected) {
    Rng rng(6);
    const std::vector<RefineSample> data{random_sample(rng, 2, 4, 4)};
    RefineConfig cfg;
    try {
        train_scorer(data, cfg, 0.5, 3, 0.1);
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_STREQ(e.what(), "scorer not trainable");
    }
}

TEST(TrainScorer, ZeroLearningRateOrStepsKeepsParams) {
    Rng rng(7);
    const std::vector<RefineSample> data{random_sample(rng, 3, 5, 5)};
    RefineConfig cfg;
    cfg.u_threshold = 0.0;
    cfg.scorer = Scorer::trainable(0.7, -0.2);
    const TrainResult a = train_scorer(data, cfg, 0.5, 5, 0.0);
    EXPECT_EQ(a.scorer.w, 0.7);
    EXPECT_EQ(a.scorer.b, -0.2);
    const TrainResult b = train_scorer(data, cfg, 0.5, 0, 1.0);
    EXPECT_EQ(b.scorer.w, 0.7);
    EXPECT_EQ(b.scorer.b, -0.2);
    EXPECT_EQ(b.loss_curve.size(), 1u);
}

TEST(TrainScorer, LossCurveNonIncreasing) {
    Rng rng(8);
    std::vector<RefineSample> data;
    for (int i = 0; i < 3; ++i) data.push_back(random_sample(rng, 3, 6, 6));
    RefineConfig cfg;
    cfg.u_threshold = 0.0;
    cfg.scorer = Scorer::trainable();
    const TrainResult r = train_scorer(data, cfg, 0.5, 25, 5.0);
    ASSERT_GE(r.loss_curve.size(), 2u);
    for (std::size_t i = 1; i < r.loss_curve.size(); ++i) EXPECT_LE(r.loss_curve[i], r.loss_curve[i - 1] + 1e-6);
    EXPECT_LT(r.loss_curve.back(), r.loss_curve.front());
}

TEST(TrainScorer, NoWorseWhenCosineAlreadySeparates) {
    // Features equal the one-hot label and masks lean to the truth: the fixed
    // cosine head is already right, so training must not raise the loss.
    Rng rng(9);
    RefineSample s;
    const std::size_t h = 6, w = 6;
    s.labels = test::random_labels(rng, h, w, 2);
    s.feats.r = Grid<Vec32>(h, w);
    s.masks = {ScalarMap(h, w), ScalarMap(h, w)};
    for (std::size_t p = 0; p < h * w; ++p) {
        s.feats.r[p] = s.labels[p] ? Vec32{0, 1} : Vec32{1, 0};
        s.masks[s.labels[p]][p] = 0.55;
        s.masks[1 - s.labels[p]][p] = 0.45;
    }
    s.u = uncertainty_map(s.masks);
    RefineConfig cfg;
    cfg.u_threshold = 0.0;
    cfg.scorer = Scorer::trainable();
    const TrainResult r = train_scorer({s}, cfg, 0.5, 20, 1.0);
    EXPECT_LE(r.loss_curve.back(), r.loss_curve.front() + 1e-6);
}

TEST(TrainScorer, GradientMatchesFiniteDifferences) {
    Rng rng(10);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<RefineSample> data{random_sample(rng, 2 + rng.below(2), 2 + rng.below(4), 2 + rng.below(4))};
        RefineConfig cfg;
        cfg.u_threshold = rng.uniform(0.0, 0.5);
        cfg.scorer = Scorer::trainable(rng.normal(), 0.5 * rng.normal());
        const double lambda = rng.uniform(0.0, 1.0);
        const ScorerGrad g = scorer_loss_with_grad(data, cfg, lambda);
        const double h = 1e-5;
        auto at = [&](double dw, double db) {
            RefineConfig c = cfg;
            c.scorer.w += dw;
            c.scorer.b += db;
            return scorer_loss_with_grad(data, c, lambda).loss;
        };
        EXPECT_LT(test::rel_error(g.dw, (at(h, 0) - at(-h, 0)) / (2 * h), 1e-6), 1e-4);
        EXPECT_LT(test::rel_error(g.db, (at(0, h) - at(0, -h)) / (2 * h), 1e-6), 1e-4);
    }
}
