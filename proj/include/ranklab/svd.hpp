#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "ranklab/matrix.hpp"

namespace ranklab {

struct SpectralNormResult {
    double value = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
};

/// Largest singular value via power iteration on A^T A. Each step computes
/// v <- normalize(A^T (A v)) without forming the Gram matrix. The start
/// vector is fixed (all-ones, normalized) for determinism; if it happens to
/// be annihilated by A, the first coordinate is perturbed by 1e-8 once and
/// the iteration restarts.
inline SpectralNormResult spectral_norm_power(const Mat& a, double tol = 1e-12,
                                              std::size_t max_iters = 10000) {
    detail::require(tol > 0.0, "spectral_norm: tol must be positive");
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();

    const double fro = frobenius_norm(a);
    if (fro == 0.0) return {0.0, true, 0};

    std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n)));
    std::vector<double> av(m, 0.0);
    std::vector<double> atav(n, 0.0);

    bool perturbed = false;
    double estimate = 0.0;
    for (std::size_t iter = 1; iter <= max_iters; ++iter) {
        for (std::size_t i = 0; i < m; ++i) av[i] = dot(a.row(i), {v.data(), n});
        double av_norm_sq = 0.0;
        for (double x : av) av_norm_sq += x * x;
        const double sigma = std::sqrt(av_norm_sq);

        if (sigma <= 1e-300 * fro) {
            // Start vector lies in (or numerically in) the null space.
            if (!perturbed) {
                v.assign(n, 1.0 / std::sqrt(static_cast<double>(n)));
                v[0] += 1e-8;
                double norm = euclidean_norm({v.data(), n});
                for (double& x : v) x /= norm;
                perturbed = true;
                continue;
            }
            return {0.0, true, iter};
        }

        for (std::size_t j = 0; j < n; ++j) atav[j] = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double w = av[i];
            if (w == 0.0) continue;
            auto r = a.row(i);
            for (std::size_t j = 0; j < n; ++j) atav[j] += w * r[j];
        }
        double u_norm = euclidean_norm({atav.data(), n});
        for (std::size_t j = 0; j < n; ++j) v[j] = atav[j] / u_norm;

        if (iter > 1 && std::abs(sigma - estimate) <= tol * sigma) {
            return {sigma, true, iter};
        }
        estimate = sigma;
    }
    return {estimate, false, max_iters};
}

inline double spectral_norm(const Mat& a, double tol = 1e-12, std::size_t max_iters = 10000) {
    return spectral_norm_power(a, tol, max_iters).value;
}

namespace detail {

// Off-diagonal Gram entries below this relative level count as annihilated.
inline constexpr double kJacobiTol = 1e-12;
inline constexpr std::size_t kJacobiMaxSweeps = 60;

// One-sided Jacobi on the columns of w (rows x cols, cols <= rows preferred):
// repeatedly rotates column pairs until every pair is numerically orthogonal.
// Singular values are the final column norms.
inline std::vector<double> one_sided_jacobi(Mat w) {
    const std::size_t m = w.rows();
    const std::size_t n = w.cols();

    auto col_dot = [&](std::size_t p, std::size_t q) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += w(i, p) * w(i, q);
        return acc;
    };

    for (std::size_t sweep = 0; sweep < kJacobiMaxSweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double alpha = col_dot(p, p);
                const double beta = col_dot(q, q);
                const double gamma = col_dot(p, q);
                if (std::abs(gamma) <= kJacobiTol * std::sqrt(alpha * beta)) continue;

                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const double wp = w(i, p);
                    const double wq = w(i, q);
                    w(i, p) = c * wp - s * wq;
                    w(i, q) = s * wp + c * wq;
                }
                rotated = true;
            }
        }
        if (!rotated) break;
    }

    std::vector<double> sigma(n);
    for (std::size_t q = 0; q < n; ++q) sigma[q] = std::sqrt(col_dot(q, q));
    std::sort(sigma.begin(), sigma.end(), std::greater<double>());
    return sigma;
}

}  // namespace detail

/// All min(rows, cols) singular values, descending, via one-sided Jacobi.
/// Values below 1e-12 * sigma_max are reported as computed, not clamped.
inline std::vector<double> singular_values(const Mat& a) {
    if (a.rows() >= a.cols()) return detail::one_sided_jacobi(a);
    return detail::one_sided_jacobi(a.transposed());
}

/// Count of singular values above rel_threshold * sigma_max.
inline std::size_t matrix_rank(const Mat& a, double rel_threshold = 1e-9) {
    auto sigma = singular_values(a);
    if (sigma.empty() || sigma.front() == 0.0) return 0;
    const double cut = rel_threshold * sigma.front();
    std::size_t rank = 0;
    for (double s : sigma)
        if (s > cut) ++rank;
    return rank;
}

/// ||A||_F^2 / sigma_max^2. Lies in [1, min(rows, cols)] for nonzero A;
/// undefined (throws) for the zero matrix.
inline double stable_rank(const Mat& a) {
    const double fro = frobenius_norm(a);
    if (fro == 0.0) throw std::invalid_argument("stable_rank: undefined for the zero matrix");
    const double sigma = spectral_norm(a, 1e-13);
    return (fro / sigma) * (fro / sigma);
}

}  // namespace ranklab
