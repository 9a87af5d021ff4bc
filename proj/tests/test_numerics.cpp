#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "afb/numerics.hpp"
#include "test_util.hpp"

using namespace afb;

TEST(Softmax, Examples) {
    const Vec32 half = softmax(Vec32{0.0f, 0.0f});
    EXPECT_NEAR(half[0], 0.5, 1e-7);
    EXPECT_NEAR(half[1], 0.5, 1e-7);
    for (float x : {-1e30f, -3.0f, 0.0f, 7.5f, 1e30f}) EXPECT_EQ(softmax(Vec32{x})[0], 1.0f);
    const Vec32 s = softmax(Vec32{1.0f, 2.0f, 3.0f});
    EXPECT_NEAR(s[0], 0.09003, 1e-5);
    EXPECT_NEAR(s[1], 0.24473, 1e-5);
    EXPECT_NEAR(s[2], 0.66524, 1e-5);
}

TEST(Softmax, EmptyThrows) {
    try {
        softmax(Vec32{});
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_STREQ(e.what(), "empty softmax");
    }
    EXPECT_THROW(softmax(std::vector<double>{}), std::invalid_argument);
}

TEST(Softmax, SumsToOneAndShiftInvariant) {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.below(40);
        Vec32 x = test::random_vec(rng, n, 20.0);
        const Vec32 s = softmax(x);
        double sum = 0.0;
        for (float v : s) {
            EXPECT_GE(v, 0.0f);
            EXPECT_LE(v, 1.0f);
            sum += v;
        }
        EXPECT_NEAR(sum, 1.0, 1e-6);
        const float c = static_cast<float>(rng.uniform(-50.0, 50.0));
        for (float& v : x) v += c;
        const Vec32 t = softmax(x);
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(s[i], t[i], 1e-6);
    }
}

TEST(Softmax, LargeInputsStayFinite) {
    const auto s = softmax(std::vector<double>{1000.0, 1001.0});
    EXPECT_NEAR(s[1], 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
}

TEST(Cosine, Examples) {
    EXPECT_NEAR(cosine(Vec32{3, 4}, Vec32{3, 4}), 1.0, 1e-6);
    EXPECT_NEAR(cosine(Vec32{1, 0}, Vec32{0, 1}), 0.0, 1e-6);
    EXPECT_NEAR(cosine(Vec32{1, 0}, Vec32{1, 1}), 0.70711, 1e-5);
}

TEST(Cosine, Errors) {
    try {
        cosine(Vec32{0, 0}, Vec32{1, 0});
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_STREQ(e.what(), "zero-norm vector");
    }
    EXPECT_THROW(cosine(Vec32{1, 0}, Vec32{1, 0, 0}), std::invalid_argument);
    EXPECT_EQ(cosine_or_zero(Vec32{0, 0}, Vec32{1, 0}), 0.0);
}

TEST(Cosine, SymmetricScaleInvariantBounded) {
    Rng rng(5);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 1 + rng.below(32);
        const Vec32 a = test::random_vec(rng, n), b = test::random_vec(rng, n);
        const double c = cosine(a, b);
        EXPECT_LE(std::abs(c), 1.0 + 1e-6);
        EXPECT_NEAR(c, cosine(b, a), 1e-6);
        Vec32 la = a, mb = b;
        const float l = static_cast<float>(rng.uniform(0.01, 100.0)), m = static_cast<float>(rng.uniform(0.01, 100.0));
        for (float& x : la) x *= l;
        for (float& x : mb) x *= m;
        EXPECT_NEAR(c, cosine(la, mb), 1e-6);
    }
}

TEST(Dot, MatchesNaiveSumAndIsOrderFixed) {
    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = rng.below(70);
        const Vec32 a = test::random_vec(rng, n), b = test::random_vec(rng, n);
        double naive = 0.0;
        for (std::size_t i = 0; i < n; ++i) naive += static_cast<double>(a[i]) * b[i];
        EXPECT_NEAR(dot(a, b), naive, 1e-9);
        EXPECT_EQ(dot(a, b), dot(a.data(), b.data(), n));
    }
    EXPECT_THROW(dot(Vec32{1}, Vec32{1, 2}), std::invalid_argument);
}

TEST(Bilinear, Examples) {
    const Grid<float> c(3, 2, 2.5f);
    const Grid<float> flat = bilinear_upsample(c, 7, 11);
    for (float v : flat.cells()) EXPECT_FLOAT_EQ(v, 2.5f);

    Grid<float> row(1, 2);
    row[0] = 0.0f;
    row[1] = 1.0f;
    const auto up = bilinear_upsample(row, 1, 3);
    EXPECT_FLOAT_EQ(up[0], 0.0f);
    EXPECT_FLOAT_EQ(up[1], 0.5f);
    EXPECT_FLOAT_EQ(up[2], 1.0f);

    Grid<float> sq(2, 2);
    sq(0, 0) = 0;
    sq(0, 1) = 1;
    sq(1, 0) = 2;
    sq(1, 1) = 3;
    EXPECT_FLOAT_EQ(bilinear_upsample(sq, 3, 3)(1, 1), 1.5f);
}

TEST(Bilinear, VectorGridAndErrors) {
    Grid<Vec32> g(1, 2);
    g[0] = Vec32{0, 10};
    g[1] = Vec32{2, 20};
    const auto up = bilinear_upsample(g, 1, 3);
    EXPECT_FLOAT_EQ(up[1][0], 1.0f);
    EXPECT_FLOAT_EQ(up[1][1], 15.0f);
    EXPECT_THROW(bilinear_upsample(Grid<float>(2, 2), 0, 3), std::invalid_argument);
    EXPECT_THROW(bilinear_upsample(Grid<float>(), 2, 3), std::invalid_argument);
}

TEST(LatticeResample, CellCentersReproduceValues) {
    Rng rng(2);
    Grid<float> src(4, 5);
    for (float& v : src.cells()) v = static_cast<float>(rng.normal());
    // Cell centers at 3 + 4 i: every center pixel reads its cell exactly.
    const auto out = lattice_resample(src, 20, 24, 3.0, 4.0);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 5; ++j) EXPECT_FLOAT_EQ(out(3 + 4 * i, 3 + 4 * j), src(i, j));
    }
    EXPECT_FLOAT_EQ(out(0, 0), src(0, 0));       // clamped before the first center
    EXPECT_FLOAT_EQ(out(19, 23), src(3, 4));     // clamped after the last center
    EXPECT_NEAR(out(3, 5), 0.5 * (src(0, 0) + src(0, 1)), 1e-6);
}

TEST(LatticeResample, LinearBetweenCenters) {
    Grid<float> row(1, 2);
    row[0] = 0;
    row[1] = 4;
    const auto r = lattice_resample(row, 1, 12, 3.0, 4.0);
    EXPECT_FLOAT_EQ(r[2], 0.0f);
    EXPECT_FLOAT_EQ(r[4], 1.0f);
    EXPECT_FLOAT_EQ(r[5], 2.0f);
    EXPECT_FLOAT_EQ(r[7], 4.0f);
    EXPECT_FLOAT_EQ(r[11], 4.0f);
    EXPECT_THROW(lattice_resample(row, 1, 12, 3.0, 0.0), std::invalid_argument);
}

TEST(Rng, ReproducibleStreams) {
    Rng a(123), b(123), c(124);
    bool differs = false;
    for (int i = 0; i < 100000; ++i) {
        const auto x = a.next_u64();
        ASSERT_EQ(x, b.next_u64());
        differs |= x != c.next_u64();
    }
    EXPECT_TRUE(differs);
}

TEST(Rng, SplitIsDeterministicAndIndependent) {
    const Rng parent(77);
    Rng s1 = parent.split(1), s1b = parent.split(1), s2 = parent.split(2);
    int same = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto x = s1.next_u64();
        EXPECT_EQ(x, s1b.next_u64());
        same += x == s2.next_u64();
    }
    EXPECT_EQ(same, 0);
}

TEST(Rng, DistributionsInRange) {
    Rng rng(3);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    std::vector<int> buckets(7, 0);
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        ++buckets[rng.below(7)];
        const double z = rng.normal();
        sum += z;
        sq += z * z;
    }
    EXPECT_NEAR(sum / n, 0.0, 0.01);
    EXPECT_NEAR(sq / n, 1.0, 0.02);
    for (int c : buckets) EXPECT_NEAR(c / static_cast<double>(n), 1.0 / 7.0, 0.005);
    EXPECT_THROW(rng.below(0), std::invalid_argument);
}
