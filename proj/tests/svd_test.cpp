#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "oracles.hpp"
#include "ranklab/matrix.hpp"
#include "ranklab/rng.hpp"
#include "ranklab/svd.hpp"

using namespace ranklab;

TEST(SingularValues, DiagonalAndRankOne) {
    const auto sv = singular_values(Mat::from_rows({{2, 0}, {0, 1}}));
    ASSERT_EQ(sv.size(), 2u);
    EXPECT_NEAR(sv[0], 2.0, 1e-14);
    EXPECT_NEAR(sv[1], 1.0, 1e-14);

    // outer product of unit vectors: singular values 1, 0, 0
    const double s = 1.0 / std::sqrt(2.0);
    Mat outer(3, 3);
    const double u[3] = {s, s, 0.0};
    const double v[3] = {0.0, s, -s};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) outer(i, j) = u[i] * v[j];
    }
    const auto sv1 = singular_values(outer);
    EXPECT_NEAR(sv1[0], 1.0, 1e-12);
    EXPECT_NEAR(sv1[1], 0.0, 1e-12);
    EXPECT_NEAR(sv1[2], 0.0, 1e-12);
}

TEST(SingularValues, MatchesGramOracleOnSeededMatrices) {
    int checked = 0;
    for (std::uint64_t seed = 1; seed <= 110; ++seed) {
        Rng shape_rng(seed * 977);
        const std::size_t rows = 1 + shape_rng.below(64);
        const std::size_t cols = 1 + shape_rng.below(64);
        const Mat a = gaussian_matrix(rows, cols, 0.0, 1.0, seed);
        const auto got = singular_values(a);
        const auto want = oracles::gram_singular_values(a);
        ASSERT_EQ(got.size(), want.size());
        const double scale = std::max(want[0], 1.0);
        for (std::size_t i = 0; i < got.size(); ++i) {
            ASSERT_NEAR(got[i], want[i], 1e-9 * scale) << "seed " << seed << " index " << i;
        }
        ++checked;
    }
    EXPECT_GE(checked, 100);
}

TEST(SingularValues, SquaresSumToFrobeniusSquared) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Mat a = gaussian_matrix(37, 23, 0.0, 2.0, seed);
        const auto sv = singular_values(a);
        double sum = 0.0;
        for (double s : sv) sum += s * s;
        const double f = frobenius_norm(a);
        EXPECT_NEAR(sum, f * f, 1e-9 * f * f);
    }
}

TEST(SpectralNorm, MatchesTopSingularValue) {
    EXPECT_NEAR(spectral_norm(Mat::identity(3)), 1.0, 1e-12);
    EXPECT_NEAR(spectral_norm(Mat::from_rows({{3, 0}, {0, 1}})), 3.0, 1e-12);

    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        const Mat a = gaussian_matrix(5, 4, 0.0, 1.0, seed);
        const auto sv = singular_values(a);
        EXPECT_NEAR(spectral_norm(a), sv[0], 1e-10 * sv[0]) << "seed " << seed;
    }
}

TEST(SpectralNorm, SurvivesStartVectorOrthogonalToTopDirection) {
    // Rank-one matrix whose right singular vector is orthogonal to the
    // all-ones start: the fallback perturbation has to recover sigma_1.
    const double s = 1.0 / std::sqrt(2.0);
    Mat a(2, 2);
    const double u[2] = {1.0, 0.0};
    const double v[2] = {s, -s};
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) a(i, j) = 5.0 * u[i] * v[j];
    }
    const auto res = spectral_norm_power(a);
    EXPECT_TRUE(res.converged);
    EXPECT_NEAR(res.value, 5.0, 1e-9);
}

TEST(SpectralNorm, ZeroMatrix) {
    const auto res = spectral_norm_power(Mat(4, 3, 0.0));
    EXPECT_TRUE(res.converged);
    EXPECT_EQ(res.value, 0.0);
}

TEST(StableRank, AnalyticCases) {
    EXPECT_NEAR(stable_rank(Mat::identity(2)), 2.0, 1e-12);
    EXPECT_NEAR(stable_rank(Mat::from_rows({{2, 0}, {0, 1}})), 1.25, 1e-12);

    Mat outer(4, 3);
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 3; ++j) outer(i, j) = (i + 1.0) * (j - 1.5);
    }
    EXPECT_NEAR(stable_rank(outer), 1.0, 1e-12);

    EXPECT_THROW(stable_rank(Mat(2, 2, 0.0)), std::invalid_argument);
}

TEST(StableRank, NeverExceedsExactRank) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng shape_rng(seed);
        const std::size_t rows = 2 + shape_rng.below(30);
        const std::size_t cols = 2 + shape_rng.below(30);
        const Mat a = gaussian_matrix(rows, cols, 0.0, 1.0, seed + 500);
        EXPECT_LE(stable_rank(a), static_cast<double>(matrix_rank(a)) + 1e-9);
    }
}

TEST(MatrixRank, LowRankProducts) {
    const Mat a = gaussian_matrix(10, 3, 0.0, 1.0, 3);
    const Mat b = gaussian_matrix(3, 8, 0.0, 1.0, 4);
    EXPECT_EQ(matrix_rank(a * b), 3u);
    EXPECT_EQ(matrix_rank(Mat(5, 5, 0.0)), 0u);
    EXPECT_EQ(matrix_rank(Mat::identity(4)), 4u);
}

TEST(GaussianMatrix, FrobeniusMatchesExpectation) {
    // E||G||_F^2 = rows * cols * variance; modest sizes keep this test fast.
    const double expected = std::sqrt(512.0 * 128.0 * 0.01);
    double mean = 0.0;
    const int draws = 20;
    for (int i = 0; i < draws; ++i) {
        mean += frobenius_norm(gaussian_matrix(512, 128, 0.0, 0.01, 1000 + i));
    }
    mean /= draws;
    EXPECT_NEAR(mean, expected, 0.02 * expected);
}
