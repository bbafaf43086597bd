#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "ranklab/format.hpp"
#include "ranklab/matrix.hpp"
#include "ranklab/rng.hpp"

using namespace ranklab;

TEST(Format, RoundTripsArbitraryDoubles) {
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        const double x = std::ldexp(rng.gaussian(), static_cast<int>(rng.below(600)) - 300);
        EXPECT_EQ(parse_double(format_double(x), "roundtrip"), x);
    }
    EXPECT_EQ(format_double(0.25), "0.25");
    EXPECT_EQ(parse_double("-0", "zero"), 0.0);
}

TEST(Format, ParseRejectsJunk) {
    EXPECT_THROW(parse_double("pony", "x"), std::runtime_error);
    EXPECT_THROW(parse_double("1.5extra", "x"), std::runtime_error);
    EXPECT_THROW(parse_double("", "x"), std::runtime_error);
    EXPECT_THROW(parse_integer("3.14", "x"), std::runtime_error);
    EXPECT_THROW(parse_integer("ten", "x"), std::runtime_error);
    EXPECT_EQ(parse_integer("-42", "x"), -42);
}

TEST(Mat, ConstructionAndInvariants) {
    Mat a(2, 3, 1.5);
    EXPECT_EQ(a.rows(), 2u);
    EXPECT_EQ(a.cols(), 3u);
    EXPECT_EQ(a(1, 2), 1.5);
    EXPECT_THROW(Mat(0, 3), std::invalid_argument);
    EXPECT_THROW(Mat(3, 0), std::invalid_argument);
}

TEST(Mat, ProductAgainstHandResult) {
    const Mat a = Mat::from_rows({{1, 2}, {3, 4}});
    const Mat b = Mat::from_rows({{5, 6}, {7, 8}});
    const Mat c = a * b;
    EXPECT_EQ(c, Mat::from_rows({{19, 22}, {43, 50}}));

    const Mat wide(2, 5, 1.0);
    EXPECT_THROW(a * wide.transposed(), std::invalid_argument);
}

TEST(Mat, TransposeAndScale) {
    const Mat a = Mat::from_rows({{1, 2, 3}, {4, 5, 6}});
    const Mat at = a.transposed();
    EXPECT_EQ(at.rows(), 3u);
    EXPECT_EQ(at(2, 1), 6.0);
    EXPECT_EQ(at.transposed(), a);

    Mat b = a;
    b *= 2.0;
    EXPECT_EQ(b(1, 2), 12.0);
    EXPECT_EQ((a + a), b);
    EXPECT_EQ((b - a), a);
}

TEST(Mat, FrobeniusNormCases) {
    EXPECT_EQ(frobenius_norm(Mat(2, 2, 0.0)), 0.0);
    EXPECT_DOUBLE_EQ(frobenius_norm(Mat::identity(3)), std::sqrt(3.0));
    EXPECT_DOUBLE_EQ(frobenius_norm(Mat::from_rows({{3, 4}})), 5.0);
}

TEST(Mat, AddScaledMatchesManualUpdate) {
    Mat a = Mat::from_rows({{1, 2}, {3, 4}});
    const Mat g = Mat::from_rows({{10, 20}, {30, 40}});
    add_scaled(a, -0.1, g);
    EXPECT_EQ(a, Mat::from_rows({{1.0 - 1.0, 2.0 - 2.0}, {3.0 - 3.0, 4.0 - 4.0}}));
}

TEST(ColVec, BasicsAndDot) {
    ColVec v{1.0, 2.0, 3.0};
    EXPECT_EQ(v.dim(), 3u);
    EXPECT_DOUBLE_EQ(dot(v.span(), v.span()), 14.0);
    EXPECT_DOUBLE_EQ(euclidean_norm(v), std::sqrt(14.0));

    const Mat a = Mat::from_rows({{1, 0, 0}, {0, 0, 2}});
    const ColVec av = a * v;
    EXPECT_EQ(av.dim(), 2u);
    EXPECT_DOUBLE_EQ(av[0], 1.0);
    EXPECT_DOUBLE_EQ(av[1], 6.0);
}

TEST(Mat, FiniteChecks) {
    Mat a(2, 2, 1.0);
    EXPECT_NO_THROW(require_finite(a, "a"));
    a(0, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_FALSE(a.all_finite());
    EXPECT_THROW(require_finite(a, "a"), std::invalid_argument);
}

TEST(Rng, DeterministicPerSeed) {
    Rng a(42), b(42), c(43);
    bool all_equal = true;
    bool any_diff_across_seeds = false;
    for (int i = 0; i < 100; ++i) {
        const double xa = a.gaussian();
        all_equal = all_equal && xa == b.gaussian();
        any_diff_across_seeds = any_diff_across_seeds || xa != c.gaussian();
    }
    EXPECT_TRUE(all_equal);
    EXPECT_TRUE(any_diff_across_seeds);
}

TEST(Rng, GaussianMomentsRoughlyStandard) {
    Rng rng(123);
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.gaussian();
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    EXPECT_NEAR(mean, 0.0, 0.01);
    EXPECT_NEAR(var, 1.0, 0.02);
}

TEST(Rng, ShuffleIsAPermutation) {
    auto idx = iota_indices(257);
    Rng rng(9);
    shuffle_indices(idx, rng);
    std::set<std::size_t> seen(idx.begin(), idx.end());
    EXPECT_EQ(seen.size(), 257u);
    EXPECT_EQ(*seen.begin(), 0u);
    EXPECT_EQ(*seen.rbegin(), 256u);

    auto idx2 = iota_indices(257);
    Rng rng2(9);
    shuffle_indices(idx2, rng2);
    EXPECT_EQ(idx, idx2);
}

TEST(GaussianMatrix, SeededAndDegenerate) {
    const Mat a = gaussian_matrix(4, 5, 0.0, 0.01, 11);
    const Mat b = gaussian_matrix(4, 5, 0.0, 0.01, 11);
    EXPECT_EQ(a, b);

    const Mat flat = gaussian_matrix(3, 3, 2.5, 0.0, 1);
    for (std::size_t i = 0; i < flat.size(); ++i) EXPECT_EQ(flat.data()[i], 2.5);

    EXPECT_THROW(gaussian_matrix(2, 2, 0.0, -1.0, 1), std::invalid_argument);
}

TEST(GaussianMatrix, EmpiricalVarianceMatches) {
    const Mat a = gaussian_matrix(400, 300, 0.0, 0.01, 5);
    double sumsq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sumsq += a.data()[i] * a.data()[i];
    EXPECT_NEAR(sumsq / static_cast<double>(a.size()), 0.01, 0.0005);
}
