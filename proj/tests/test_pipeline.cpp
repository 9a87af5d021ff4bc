#include <gtest/gtest.h>

#include <cmath>

#include "afb/errors.hpp"
#include "afb/metrics.hpp"
#include "afb/parallel.hpp"
#include "afb/pipeline.hpp"
#include "test_util.hpp"

using namespace afb;

namespace {

RgbImage constant_frame(std::size_t w, std::size_t h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    RgbImage img(w, h);
    for (std::size_t p = 0; p < w * h; ++p) {
        img.data[3 * p] = r;
        img.data[3 * p + 1] = g;
        img.data[3 * p + 2] = b;
    }
    return img;
}

RgbImage noise_frame(Rng& rng, std::size_t w, std::size_t h) {
    RgbImage img(w, h);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.below(256));
    return img;
}

SceneSpec small_scene(std::size_t frames, Motion motion, double drift, std::uint64_t seed = 1) {
    SceneSpec s;
    s.width = 64;
    s.height = 64;
    s.frames = frames;
    s.motion = motion;
    s.drift = drift;
    s.seed = seed;
    return s;
}

MatchResult concat_only(const Vec32& query, const Vec32& retrieved) {
    MatchResult m;
    Vec32 cat = query;
    cat.insert(cat.end(), retrieved.begin(), retrieved.end());
    m.concat = Grid<Vec32>(1, 1, cat);
    m.retrieved = Grid<Vec32>(1, 1, retrieved);
    return m;
}

}  // namespace

TEST(Extractor, ConstantFrameGivesEqualKeys) {
    const Extractor ex(ExtractorConfig{});
    const auto q = ex.extract_query(constant_frame(32, 24, 40, 120, 200));
    ASSERT_EQ(q.grid.rows, (24u - 8) / 4 + 1);
    ASSERT_EQ(q.grid.cols, (32u - 8) / 4 + 1);
    // Position enters the descriptor, so compare the position-free part.
    const auto d0 = ex.descriptor(analyze(constant_frame(32, 24, 40, 120, 200)), q.grid, 0, 0, nullptr);
    for (std::size_t r = 0; r < q.grid.rows; ++r) {
        for (std::size_t c = 0; c < q.grid.cols; ++c) {
            const auto d = ex.descriptor(analyze(constant_frame(32, 24, 40, 120, 200)), q.grid, r, c, nullptr);
            for (std::size_t k = 0; k < 14; ++k) EXPECT_EQ(d[k], d0[k]);
        }
    }
    ExtractorConfig no_pos;
    no_pos.position_weight = 0.0;
    const Extractor flat(no_pos);
    const auto fq = flat.extract_query(constant_frame(32, 24, 40, 120, 200));
    for (const Vec32& k : fq.features.keys.cells()) EXPECT_EQ(k, fq.features.keys[0]);
}

TEST(Extractor, DeterministicAndUnitRms) {
    Rng rng(1);
    const Extractor a(ExtractorConfig{}), b(ExtractorConfig{});
    double total = 0.0;
    std::size_t count = 0;
    for (int trial = 0; trial < 5; ++trial) {
        const RgbImage frame = noise_frame(rng, 40, 36);
        const auto qa = a.extract_query(frame), qb = b.extract_query(frame);
        EXPECT_EQ(qa.features.keys, qb.features.keys);
        EXPECT_EQ(qa.features.values, qb.features.values);
        EXPECT_EQ(qa.pixels.r, qb.pixels.r);
        for (const Vec32& k : qa.features.keys.cells()) {
            double sq = 0.0;
            for (float x : k) sq += x * x;
            total += std::sqrt(sq / static_cast<double>(k.size()));
            ++count;
        }
    }
    EXPECT_NEAR(total / static_cast<double>(count), 1.0, 0.2);
}

TEST(Extractor, PixelFeatureLayout) {
    const Extractor ex(ExtractorConfig{});
    const auto q = ex.extract_query(constant_frame(16, 12, 10, 20, 30));
    ASSERT_EQ(q.pixels.r.height(), 12u);
    ASSERT_EQ(q.pixels.r.width(), 16u);
    for (const Vec32& r : q.pixels.r.cells()) {
        ASSERT_EQ(r.size(), kPixelFeatureDim);
        EXPECT_NEAR(r[0], 0.0, 1e-6);   // centered on the frame mean
        EXPECT_NEAR(r[3], 0.0, 1e-6);   // no gradient on a flat frame
    }
    EXPECT_NEAR(q.pixels.r(0, 0)[4], -0.2, 1e-6);
    EXPECT_NEAR(q.pixels.r(11, 15)[5], 0.2, 1e-6);
}

TEST(Extractor, ReferenceCoverage) {
    Rng rng(2);
    const RgbImage frame = noise_frame(rng, 32, 32);
    const Extractor ex(ExtractorConfig{});
    EXPECT_TRUE(ex.extract_reference(frame, ScalarMap(32, 32, 0.0)).empty());
    const auto all = ex.extract_reference(frame, ScalarMap(32, 32, 1.0));
    const auto q = ex.extract_query(frame);
    ASSERT_EQ(all.size(), q.grid.rows * q.grid.cols);
    for (std::size_t c = 0; c < all.size(); ++c) EXPECT_EQ(all[c].key, q.features.keys[c]);

    // A single 8x8 cell, left half covered.
    const RgbImage cell = noise_frame(rng, 8, 8);
    ScalarMap half(8, 8, 0.0);
    for (std::size_t y = 0; y < 8; ++y) {
        for (std::size_t x = 0; x < 4; ++x) half(y, x) = 1.0;
    }
    ExtractorConfig c25, c60;
    c25.coverage_min = 0.25;
    c60.coverage_min = 0.6;
    EXPECT_EQ(Extractor(c25).extract_reference(cell, half).size(), 1u);
    EXPECT_EQ(Extractor(c60).extract_reference(cell, half).size(), 0u);
}

TEST(Extractor, Errors) {
    const Extractor ex(ExtractorConfig{});
    EXPECT_THROW(ex.extract_query(RgbImage(4, 4)), std::invalid_argument);
    EXPECT_THROW(analyze(RgbImage()), std::invalid_argument);
    EXPECT_THROW(ex.extract_reference(RgbImage(16, 16), ScalarMap(8, 8, 1.0)), std::invalid_argument);
    ExtractorConfig bad;
    bad.stride = 0;
    EXPECT_THROW(Extractor{bad}, ConfigError);
    bad = {};
    bad.coverage_min = 0.0;
    EXPECT_THROW(Extractor{bad}, ConfigError);
}

TEST(Decode, Examples) {
    const CellGrid grid{1, 1, 4, 8};
    const double tau = 10.0;
    const Vec32 v{1, 2, 3, 4};
    const Vec32 perp{2, -1, 4, -3};
    const ScoreMaps m = decode({concat_only(v, v), concat_only(v, perp)}, grid, 1, 1, tau);
    EXPECT_NEAR(m.logits[0][0], tau, 1e-5);
    EXPECT_NEAR(m.logits[1][0], 0.0, 1e-5);
    EXPECT_NEAR(m.masks[0][0], 1.0 / (1.0 + std::exp(-tau)), 1e-6);

    const ScoreMaps same = decode({concat_only(v, perp), concat_only(v, perp), concat_only(v, perp)}, grid, 3, 3, tau);
    for (const auto& mask : same.masks) {
        for (double x : mask.cells()) EXPECT_NEAR(x, 1.0 / 3.0, 1e-12);
    }

    const Vec32 w{0.5f, -1, 2, 0};
    const Vec32 v2{2, 4, 6, 8}, w2{1, -2, 4, 0}, perp2{4, -2, 8, -6};
    const ScoreMaps a = decode({concat_only(v, w), concat_only(v, perp)}, grid, 2, 2, tau);
    const ScoreMaps b = decode({concat_only(v2, w2), concat_only(v2, perp2)}, grid, 2, 2, tau);
    for (std::size_t p = 0; p < 4; ++p) EXPECT_NEAR(a.masks[0][p], b.masks[0][p], 1e-6);

    EXPECT_THROW(decode({concat_only(v, v)}, grid, 1, 1, tau), std::invalid_argument);
}

TEST(ErodeLabels, KeepsOnlyInteriorPixels) {
    LabelMap l(7, 7, 0);
    for (std::size_t y = 1; y < 6; ++y) {
        for (std::size_t x = 1; x < 6; ++x) l(y, x) = 1;
    }
    EXPECT_EQ(erode_labels(l, 0), l);
    const LabelMap e = erode_labels(l, 1);
    for (std::size_t y = 0; y < 7; ++y) {
        for (std::size_t x = 0; x < 7; ++x) {
            const bool interior1 = y >= 2 && y <= 4 && x >= 2 && x <= 4;
            if (interior1) EXPECT_EQ(e(y, x), 1);
            else if (l(y, x) == 1) { EXPECT_EQ(e(y, x), kUnlabeled); }
        }
    }
    // Background diagonal to the square is within the margin too.
    EXPECT_EQ(e(0, 0), kUnlabeled);
    const LabelMap big(9, 9, 3);
    EXPECT_EQ(erode_labels(big, 2), big);   // image borders are not label changes
}

TEST(ErodeLabels, MatchesChebyshevOracle) {
    Rng rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t h = 1 + rng.below(12), w = 1 + rng.below(12), m = rng.below(3);
        LabelMap l = test::random_labels(rng, h, w, 2);
        const LabelMap e = erode_labels(l, m);
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                bool uniform = true;
                for (std::size_t qy = y >= m ? y - m : 0; qy <= std::min(h - 1, y + m); ++qy) {
                    for (std::size_t qx = x >= m ? x - m : 0; qx <= std::min(w - 1, x + m); ++qx)
                        uniform &= l(qy, qx) == l(y, x);
                }
                ASSERT_EQ(e(y, x), uniform ? l(y, x) : kUnlabeled);
            }
        }
    }
}

TEST(PipelineConfig, Validation) {
    PipelineConfig c;
    EXPECT_NO_THROW(c.validate());
    c.bank.key_dim = 16;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.tau_d = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.absorb_interval = 0;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(MemoryPolicy, NamesRoundTrip) {
    for (MemoryPolicy p : all_memory_policies()) EXPECT_EQ(parse_memory_policy(to_string(p)), p);
    EXPECT_THROW(parse_memory_policy("lru"), ConfigError);
}

TEST(MemoryPolicy, FixedPoliciesKeepTheRightFrames) {
    BankConfig c;
    c.key_dim = 2;
    c.value_dim = 2;
    auto frame_feats = [](float t) { return std::vector<Feature>{{Vec32{t, 1}, Vec32{t, t}}}; };
    auto births = [](const ObjectMemory& m) {
        std::vector<std::uint64_t> out;
        for (const auto& e : m.entries()) out.push_back(e.birth);
        return out;
    };
    ObjectMemory first(MemoryPolicy::First, c, frame_feats(0), 0);
    ObjectMemory latest(MemoryPolicy::Latest, c, frame_feats(0), 0);
    ObjectMemory fl(MemoryPolicy::FirstLatest, c, frame_feats(0), 0);
    ObjectMemory fl5(MemoryPolicy::FirstLatest5, c, frame_feats(0), 0);
    for (std::uint64_t t = 1; t <= 7; ++t) {
        for (ObjectMemory* m : {&first, &latest, &fl, &fl5}) m->update(frame_feats(static_cast<float>(t)), t);
    }
    EXPECT_EQ(births(first), (std::vector<std::uint64_t>{0}));
    EXPECT_EQ(births(latest), (std::vector<std::uint64_t>{7}));
    EXPECT_EQ(births(fl), (std::vector<std::uint64_t>{0, 7}));
    EXPECT_EQ(births(fl5), (std::vector<std::uint64_t>{0, 3, 4, 5, 6, 7}));
    // An empty update keeps the latest frame.
    latest.update({}, 8);
    EXPECT_EQ(births(latest), (std::vector<std::uint64_t>{7}));
}

TEST(MemoryPolicy, AfbPrepoolsOversizedFirstFrame) {
    BankConfig c;
    c.key_dim = 2;
    c.value_dim = 2;
    c.budget = 3;
    std::vector<Feature> many;
    for (int i = 0; i < 12; ++i) {
        const float a = static_cast<float>(i) * 0.5f;
        many.push_back({Vec32{std::cos(a), std::sin(a)}, Vec32{0, 0}});
    }
    const ObjectMemory m(MemoryPolicy::Afb, c, many, 0);
    EXPECT_LE(m.size(), 3u);
    ASSERT_NE(m.bank(), nullptr);
}

TEST(SegmentVideo, SingleFrameGivesNoResults) {
    const VideoSequence v = generate(small_scene(2, Motion::Static, 0.0));
    VideoSequence one = v;
    one.frames.resize(1);
    one.gt.resize(1);
    EXPECT_TRUE(segment_video(one, PipelineConfig{}).empty());
    Segmenter seg(PipelineConfig{}, 2);
    seg.init(v.frames[0], v.gt[0]);
    EXPECT_EQ(seg.memories().size(), 3u);
    EXPECT_GT(seg.stored_features(), 0u);
}

TEST(SegmentVideo, Errors) {
    VideoSequence empty;
    EXPECT_THROW(segment_video(empty, PipelineConfig{}), std::invalid_argument);
    const VideoSequence v = generate(small_scene(3, Motion::Static, 0.0));
    Segmenter seg(PipelineConfig{}, 2);
    EXPECT_THROW(seg.step(v.frames[1]), std::logic_error);
    EXPECT_THROW(seg.init(v.frames[0], LabelMap(10, 10, 0)), std::invalid_argument);
    LabelMap no_object(v.gt[0].height(), v.gt[0].width(), 0);
    EXPECT_THROW(seg.init(v.frames[0], no_object), std::invalid_argument);
    PipelineConfig gt_cfg;
    gt_cfg.absorb_ground_truth = true;
    Segmenter s2(gt_cfg, 2);
    s2.init(v.frames[0], v.gt[0]);
    EXPECT_THROW(s2.step(v.frames[1]), std::invalid_argument);
}

TEST(SegmentVideo, BudgetFourRespectedEveryFrame) {
    PipelineConfig cfg;
    cfg.bank.budget = 4;
    const VideoSequence v = generate(small_scene(100, Motion::Linear, 0.01));
    const auto results = segment_video(v, cfg);
    ASSERT_EQ(results.size(), 99u);
    for (const FrameResult& r : results) {
        ASSERT_EQ(r.bank_stats.size(), 3u);
        for (const MemoryStats& s : r.bank_stats) EXPECT_LE(s.size, 4u);
        for (auto l : r.labels.cells()) EXPECT_LE(l, 2);
    }
}

TEST(SegmentVideo, StaticVideoStaysAccurate) {
    const VideoSequence v = generate(small_scene(12, Motion::Static, 0.0, 4));
    const auto results = segment_video(v, PipelineConfig{});
    for (std::size_t o = 1; o <= 2; ++o) {
        const double first = jaccard(object_mask(results.front().labels, o), object_mask(v.gt[1], o));
        const double last = jaccard(object_mask(results.back().labels, o), object_mask(v.gt.back(), o));
        EXPECT_GT(first, 0.75);
        EXPECT_GE(last, first - 0.01);
    }
}

TEST(SegmentVideo, DeterministicAcrossThreadCounts) {
    const VideoSequence v = generate(small_scene(6, Motion::Linear, 0.01, 2));
    set_num_threads(1);
    const auto a = segment_video(v, PipelineConfig{});
    set_num_threads(4);
    const auto b = segment_video(v, PipelineConfig{});
    set_num_threads(1);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t t = 0; t < a.size(); ++t) {
        EXPECT_EQ(a[t].labels, b[t].labels);
        EXPECT_EQ(a[t].stats_json(false), b[t].stats_json(false));
    }
}

TEST(FrameResult, StatsJsonFields) {
    const VideoSequence v = generate(small_scene(2, Motion::Linear, 0.0));
    const auto r = segment_video(v, PipelineConfig{});
    const auto j = r[0].stats_json(true);
    for (const char* key : {"frame", "per_object_bank_size", "merges", "appends", "evictions", "mean_u", "runtime_ms"})
        EXPECT_TRUE(j.contains(key)) << key;
    EXPECT_FALSE(r[0].stats_json(false).contains("runtime_ms"));
    EXPECT_EQ(j["frame"], 1);
}
