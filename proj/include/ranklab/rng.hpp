#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ranklab/matrix.hpp"

namespace ranklab {

/// Seeded deterministic random source. The generator is mt19937_64 and
/// all derived draws (uniforms, gaussians, shuffles) are implemented here
/// rather than through std distributions, so that identical seeds produce
/// identical streams on every platform and standard library.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; second deviate is cached.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] so the log is finite.
        const double u1 = (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * 3.141592653589793238462643383279502884 * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

    /// Uniform index in [0, n). Modulo bias is below 2^-53 for the sizes here.
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }

  private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// In-place Fisher-Yates shuffle driven by the seeded generator.
template <typename T>
void shuffle_indices(std::vector<T>& values, Rng& rng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        std::size_t j = rng.below(i);
        std::swap(values[i - 1], values[j]);
    }
}

inline std::vector<std::size_t> iota_indices(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
}

/// Matrix of i.i.d. N(mean, variance) entries, filled row-major.
/// Same seed always yields the identical matrix.
inline Mat gaussian_matrix(std::size_t rows, std::size_t cols, double mean, double variance,
                           std::uint64_t seed) {
    detail::require(variance >= 0.0, "gaussian_matrix: variance must be nonnegative");
    Rng rng(seed);
    const double stddev = std::sqrt(variance);
    Mat m(rows, cols);
    double* p = m.data();
    for (std::size_t k = 0; k < m.size(); ++k) p[k] = mean + stddev * rng.gaussian();
    return m;
}

}  // namespace ranklab
