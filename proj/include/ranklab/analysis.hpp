#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ranklab/data.hpp"
#include "ranklab/format.hpp"
#include "ranklab/matrix.hpp"
#include "ranklab/network.hpp"
#include "ranklab/rng.hpp"
#include "ranklab/svd.hpp"
#include "ranklab/training.hpp"

namespace ranklab {

// --- Batch families -------------------------------------------------------

/// The explicit collections of batches over which gradient norms are
/// measured. epoch_partition mirrors what one training epoch visits;
/// swap_family is the combinatorial object the rank certificates manipulate:
/// all batches sharing base P1 and differing in one element drawn from
/// P0 ∪ {i1}; random_batches samples independent index sets.
struct BatchFamily {
    enum class Kind { epoch_partition, swap_family, random_batches };

    Kind kind = Kind::epoch_partition;
    std::uint64_t seed = 0;
    std::size_t count = 0;
    std::vector<std::size_t> p0;
    std::vector<std::size_t> p1;
    std::size_t i1 = 0;

    static BatchFamily epoch_partition(std::uint64_t seed) {
        BatchFamily f;
        f.kind = Kind::epoch_partition;
        f.seed = seed;
        return f;
    }

    static BatchFamily swap_family(std::vector<std::size_t> p0, std::vector<std::size_t> p1,
                                   std::size_t i1) {
        BatchFamily f;
        f.kind = Kind::swap_family;
        f.p0 = std::move(p0);
        f.p1 = std::move(p1);
        f.i1 = i1;
        return f;
    }

    static BatchFamily random_batches(std::size_t count, std::uint64_t seed) {
        BatchFamily f;
        f.kind = Kind::random_batches;
        f.count = count;
        f.seed = seed;
        return f;
    }

    std::string describe() const {
        switch (kind) {
            case Kind::epoch_partition:
                return "epoch_partition(seed=" + std::to_string(seed) + ")";
            case Kind::swap_family:
                return "swap_family(i1=" + std::to_string(i1) + ")";
            case Kind::random_batches:
                return "random_batches(count=" + std::to_string(count) +
                       ",seed=" + std::to_string(seed) + ")";
        }
        return "unknown";
    }

    std::vector<std::vector<std::size_t>> materialize(std::size_t n_samples,
                                                      std::size_t batch_size) const;
};

namespace detail {

inline void check_swap_feasible(const std::vector<std::size_t>& p0,
                                const std::vector<std::size_t>& p1, std::size_t i1,
                                std::size_t n_samples, std::size_t b) {
    if (n_samples < 2 * b) {
        throw std::invalid_argument("swap family: need at least 2B samples, have " +
                                    std::to_string(n_samples));
    }
    require(p0.size() == b - 1 && p1.size() == b - 1,
            "swap family: base sets must each have B-1 elements");
    std::set<std::size_t> seen;
    for (const auto lst : {&p0, &p1}) {
        for (std::size_t idx : *lst) {
            require(idx < n_samples, "swap family: index out of range");
            require(seen.insert(idx).second, "swap family: base sets must be disjoint");
        }
    }
    require(i1 < n_samples, "swap family: i1 out of range");
    require(!seen.count(i1), "swap family: i1 must avoid both base sets");
}

}  // namespace detail

inline std::vector<std::vector<std::size_t>> BatchFamily::materialize(
    std::size_t n_samples, std::size_t batch_size) const {
    detail::require(batch_size >= 2 && batch_size <= n_samples,
                    "BatchFamily: need 2 <= B <= dataset size");
    std::vector<std::vector<std::size_t>> batches;
    switch (kind) {
        case Kind::epoch_partition: {
            auto order = iota_indices(n_samples);
            Rng rng(seed);
            shuffle_indices(order, rng);
            const std::size_t n_batches = n_samples / batch_size;
            batches.reserve(n_batches);
            for (std::size_t k = 0; k < n_batches; ++k) {
                batches.emplace_back(order.begin() + k * batch_size,
                                     order.begin() + (k + 1) * batch_size);
            }
            break;
        }
        case Kind::swap_family: {
            detail::check_swap_feasible(p0, p1, i1, n_samples, batch_size);
            std::vector<std::size_t> swaps = p0;
            swaps.push_back(i1);
            batches.reserve(swaps.size());
            for (std::size_t j : swaps) {
                auto batch = p1;
                batch.push_back(j);
                batches.push_back(std::move(batch));
            }
            break;
        }
        case Kind::random_batches: {
            detail::require(count >= 1, "random_batches: count must be positive");
            Rng rng(seed);
            auto scratch = iota_indices(n_samples);
            batches.reserve(count);
            for (std::size_t k = 0; k < count; ++k) {
                // Partial Fisher-Yates: the first B slots become a uniform
                // sample without replacement.
                for (std::size_t t = 0; t < batch_size; ++t) {
                    const std::size_t swap_at = t + rng.below(n_samples - t);
                    std::swap(scratch[t], scratch[swap_at]);
                }
                batches.emplace_back(scratch.begin(), scratch.begin() + batch_size);
            }
            break;
        }
    }
    return batches;
}

// --- Gradient census ------------------------------------------------------

struct GradientCensus {
    std::string family;
    std::vector<std::vector<std::size_t>> batches;
    std::vector<double> norms;        // Frobenius norm of the V gradient per batch
    double max_norm = 0.0;            // the empirical epsilon
    std::vector<double> bin_edges;    // bins + 1 edges spanning [0, max]
    std::vector<std::size_t> counts;  // one count per bin
};

/// Frobenius norm of the V component of the batch gradient, for every batch
/// in the family, plus an equal-width histogram over [0, max].
inline GradientCensus gradient_census(const TwoLayerNet& net, const Dataset& ds,
                                      std::size_t batch_size, const GSpec& gspec,
                                      const BatchFamily& family, std::size_t bins = 30) {
    detail::require(bins >= 1, "gradient_census: need at least one bin");
    GradientCensus census;
    census.family = family.describe();
    census.batches = family.materialize(ds.size(), batch_size);
    census.norms.reserve(census.batches.size());
    for (const auto& batch : census.batches) {
        const NetGradient grad = batch_gradient(net, ds, batch, gspec, 0.0, 0.0);
        const double norm = frobenius_norm(grad.dv);
        census.norms.push_back(norm);
        census.max_norm = std::max(census.max_norm, norm);
    }

    census.counts.assign(bins, 0);
    census.bin_edges.resize(bins + 1);
    const double width = census.max_norm > 0.0 ? census.max_norm / static_cast<double>(bins) : 0.0;
    for (std::size_t k = 0; k <= bins; ++k) census.bin_edges[k] = width * static_cast<double>(k);
    for (const double v : census.norms) {
        std::size_t bin = width > 0.0 ? static_cast<std::size_t>(v / width) : 0;
        bin = std::min(bin, bins - 1);
        ++census.counts[bin];
    }
    return census;
}

inline void write_census_csv(const GradientCensus& census, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_census_csv: cannot open " + path.string());
    out << "batch_id,norm\n";
    for (std::size_t i = 0; i < census.norms.size(); ++i) {
        out << i << ',' << format_double(census.norms[i]) << '\n';
    }
    if (!out) throw std::runtime_error("write_census_csv: write failed for " + path.string());
}

inline void write_histogram_csv(const GradientCensus& census, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_histogram_csv: cannot open " + path.string());
    out << "bin_lo,bin_hi,count\n";
    for (std::size_t k = 0; k < census.counts.size(); ++k) {
        out << format_double(census.bin_edges[k]) << ',' << format_double(census.bin_edges[k + 1])
            << ',' << census.counts[k] << '\n';
    }
    if (!out) throw std::runtime_error("write_histogram_csv: write failed for " + path.string());
}

// --- Rank certificates ----------------------------------------------------

enum class CertMode { constant_g, variable_g };

/// The constructive witness that V sits near a low-rank matrix. V_tilde is
/// built from one or two per-sample gradient terms T_i = residual_i * dV_i;
/// epsilon is the max batch-gradient V-norm over exactly the batches the
/// triangle-inequality chain touches, so holds_proof is an algebraic
/// consequence of the construction, for any network whatsoever.
struct RankCertificate {
    CertMode mode = CertMode::constant_g;
    Mat v_tilde{1, 1};
    int rank_bound = 1;
    double epsilon = 0.0;
    double constant_proof = 0.0;  // (2B+1)/mu_V, or 2B/|g1-g2|
    double constant_paper = 0.0;  // 2B/mu_V, or 2B/|g1-g2|
    double distance = 0.0;        // ||V - V_tilde||_F
    bool holds_proof = false;
    bool holds_paper = false;
    std::size_t i1 = 0;
    std::size_t i2 = 0;  // meaningful only in variable_g mode
    double g1 = 0.0;
    double g2 = 0.0;
    std::vector<std::size_t> p0;
    std::vector<std::size_t> p1;
    std::size_t batch_size = 0;
};

namespace detail {

/// T_i = residual_i * (gradient of the output w.r.t. V at sample i).
inline Mat sample_v_term(const TwoLayerNet& net, const Dataset& ds, std::size_t idx) {
    const auto x = ds.input(idx);
    const double residual = forward(net, x) - ds.target(idx);
    return grad_params(net, x, residual).dv;
}

inline double v_grad_norm(const TwoLayerNet& net, const Dataset& ds,
                          const std::vector<std::size_t>& batch, const GSpec& gspec) {
    return frobenius_norm(batch_gradient(net, ds, batch, gspec, 0.0, 0.0).dv);
}

}  // namespace detail

/// Constant-g certificate: V_tilde = -(1/mu_V) T_{i1}, rank at most one.
/// epsilon is the max over the swap family of P0, P1, i1 plus the batch
/// P0 ∪ {i1}; the proof chain then bounds the distance by (2B+1) eps / mu_V,
/// while the headline constant is 2B eps / mu_V.
inline RankCertificate build_certificate_constant(const TwoLayerNet& net, const Dataset& ds,
                                                  std::size_t batch_size, const GSpec& gspec,
                                                  std::vector<std::size_t> p0,
                                                  std::vector<std::size_t> p1, std::size_t i1) {
    detail::require(gspec.is_constant() && gspec.mu_v > 0.0,
                    "certificate: constant-g mode needs a positive constant decay");
    detail::check_swap_feasible(p0, p1, i1, ds.size(), batch_size);
    const double mu = gspec.mu_v;

    RankCertificate cert;
    cert.mode = CertMode::constant_g;
    cert.batch_size = batch_size;
    cert.i1 = cert.i2 = i1;
    cert.g1 = cert.g2 = mu;
    cert.p0 = std::move(p0);
    cert.p1 = std::move(p1);
    cert.rank_bound = 1;

    cert.v_tilde = detail::sample_v_term(net, ds, i1);
    cert.v_tilde *= -1.0 / mu;

    const auto family = BatchFamily::swap_family(cert.p0, cert.p1, i1);
    double eps = 0.0;
    for (const auto& batch : family.materialize(ds.size(), batch_size)) {
        eps = std::max(eps, detail::v_grad_norm(net, ds, batch, gspec));
    }
    auto closing = cert.p0;
    closing.push_back(i1);
    eps = std::max(eps, detail::v_grad_norm(net, ds, closing, gspec));
    cert.epsilon = eps;

    cert.constant_proof = static_cast<double>(2 * batch_size + 1) / mu;
    cert.constant_paper = static_cast<double>(2 * batch_size) / mu;
    cert.distance = frobenius_norm(net.v - cert.v_tilde);
    cert.holds_proof = cert.distance <= cert.constant_proof * cert.epsilon;
    cert.holds_paper = cert.distance <= cert.constant_paper * cert.epsilon;
    return cert;
}

/// Variable-g certificate: V_tilde = -(T_{i1} - T_{i2}) / (g1 - g2), rank at
/// most two. Subtracting the batch gradients of P0 ∪ {i1} and P0 ∪ {i2}
/// cancels everything except (T_{i1} - T_{i2} + (g1 - g2) V) / B, so the
/// distance is bounded by 2B eps / |g1 - g2| with eps the max over those two
/// batches.
inline RankCertificate build_certificate_variable(const TwoLayerNet& net, const Dataset& ds,
                                                  std::size_t batch_size, const GSpec& gspec,
                                                  std::vector<std::size_t> p0, std::size_t i1,
                                                  std::size_t i2) {
    detail::require(ds.size() >= 2 * batch_size, "certificate: need at least 2B samples");
    detail::require(p0.size() == batch_size - 1, "certificate: P0 must have B-1 elements");
    std::set<std::size_t> seen;
    for (std::size_t idx : p0) {
        detail::require(idx < ds.size(), "certificate: P0 index out of range");
        detail::require(seen.insert(idx).second, "certificate: P0 has duplicates");
    }
    detail::require(i1 < ds.size() && i2 < ds.size(), "certificate: swap index out of range");
    detail::require(i1 != i2 && !seen.count(i1) && !seen.count(i2),
                    "certificate: i1, i2 must be distinct and avoid P0");

    const double g1 = gspec(ds.input(i1), ds.target(i1));
    const double g2 = gspec(ds.input(i2), ds.target(i2));
    if (std::abs(g1 - g2) <= 1e-12) {
        throw std::invalid_argument("certificate: |g1 - g2| <= 1e-12, ill-conditioned pair");
    }

    RankCertificate cert;
    cert.mode = CertMode::variable_g;
    cert.batch_size = batch_size;
    cert.i1 = i1;
    cert.i2 = i2;
    cert.g1 = g1;
    cert.g2 = g2;
    cert.p0 = std::move(p0);
    cert.rank_bound = 2;

    cert.v_tilde = detail::sample_v_term(net, ds, i1) - detail::sample_v_term(net, ds, i2);
    cert.v_tilde *= -1.0 / (g1 - g2);

    auto batch1 = cert.p0;
    batch1.push_back(i1);
    auto batch2 = cert.p0;
    batch2.push_back(i2);
    cert.epsilon = std::max(detail::v_grad_norm(net, ds, batch1, gspec),
                            detail::v_grad_norm(net, ds, batch2, gspec));

    cert.constant_proof = static_cast<double>(2 * batch_size) / std::abs(g1 - g2);
    cert.constant_paper = cert.constant_proof;
    cert.distance = frobenius_norm(net.v - cert.v_tilde);
    cert.holds_proof = cert.distance <= cert.constant_proof * cert.epsilon;
    cert.holds_paper = cert.holds_proof;
    return cert;
}

struct CertVerdict {
    bool holds_proof = false;
    bool holds_paper = false;
    bool rank_ok = false;
    double distance = 0.0;
};

/// Recomputes the distance from scratch and re-evaluates both verdicts plus
/// the structural rank bound on V_tilde.
inline CertVerdict verify_certificate(const RankCertificate& cert, const TwoLayerNet& net) {
    CertVerdict v;
    v.distance = frobenius_norm(net.v - cert.v_tilde);
    v.holds_proof = v.distance <= cert.constant_proof * cert.epsilon;
    v.holds_paper = v.distance <= cert.constant_paper * cert.epsilon;
    const bool zero = frobenius_norm(cert.v_tilde) == 0.0;
    v.rank_ok = zero || matrix_rank(cert.v_tilde) <= static_cast<std::size_t>(cert.rank_bound);
    return v;
}

/// Picks the certificate index i1 minimizing the resulting distance
/// ||V + T_i / mu_V||_F, evaluated cheaply via inner products, then base sets
/// P0, P1 from a seeded shuffle of the remaining indices.
inline RankCertificate certify_constant_auto(const TwoLayerNet& net, const Dataset& ds,
                                             std::size_t batch_size, const GSpec& gspec,
                                             std::uint64_t seed, long pinned_i1 = -1) {
    detail::require(gspec.is_constant() && gspec.mu_v > 0.0,
                    "certificate: constant-g mode needs a positive constant decay");
    detail::require(ds.size() >= 2 * batch_size, "certificate: need at least 2B samples");
    const double mu = gspec.mu_v;
    const std::size_t m = net.width();

    std::size_t best = 0;
    if (pinned_i1 >= 0) {
        best = static_cast<std::size_t>(pinned_i1);
        detail::require(best < ds.size(), "certificate: pinned i1 out of range");
    } else {
        const double v_fro = frobenius_norm(net.v);
        double best_val = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const auto x = ds.input(i);
            double out = 0.0;
            double cross = 0.0;  // <V, T_i> accumulator
            double a_sq = 0.0;
            for (std::size_t r = 0; r < m; ++r) {
                const double z = dot(net.v.row(r), x) + net.b[r];
                if (z > 0.0) {
                    out += net.u(0, r) * z;
                    const double vx_r = z - net.b[r];
                    cross += net.u(0, r) * vx_r;
                    a_sq += net.u(0, r) * net.u(0, r);
                }
            }
            const double residual = out - ds.target(i);
            const double x_sq = dot(x, x);
            // ||V + T_i/mu||^2 = ||V||^2 + 2 residual <V, (D U^T) x^T>/mu
            //                    + residual^2 ||a||^2 ||x||^2 / mu^2
            const double dist_sq = v_fro * v_fro + 2.0 * residual * cross / mu +
                                   residual * residual * a_sq * x_sq / (mu * mu);
            if (dist_sq < best_val) {
                best_val = dist_sq;
                best = i;
            }
        }
    }

    auto order = iota_indices(ds.size());
    Rng rng(seed);
    shuffle_indices(order, rng);
    std::vector<std::size_t> p0, p1;
    for (std::size_t idx : order) {
        if (idx == best) continue;
        if (p0.size() < batch_size - 1) {
            p0.push_back(idx);
        } else if (p1.size() < batch_size - 1) {
            p1.push_back(idx);
        } else {
            break;
        }
    }
    return build_certificate_constant(net, ds, batch_size, gspec, std::move(p0), std::move(p1),
                                      best);
}

/// Variable-g default: the pair (i1, i2) maximizing |g1 - g2|, which makes
/// the certificate constant as small as possible.
inline RankCertificate certify_variable_auto(const TwoLayerNet& net, const Dataset& ds,
                                             std::size_t batch_size, const GSpec& gspec,
                                             std::uint64_t seed, long pinned_i1 = -1,
                                             long pinned_i2 = -1) {
    detail::require(ds.size() >= 2 * batch_size, "certificate: need at least 2B samples");
    std::size_t lo = 0, hi = 0;
    double g_lo = std::numeric_limits<double>::infinity();
    double g_hi = -g_lo;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double g = gspec(ds.input(i), ds.target(i));
        if (g < g_lo) {
            g_lo = g;
            lo = i;
        }
        if (g > g_hi) {
            g_hi = g;
            hi = i;
        }
    }
    std::size_t i1 = pinned_i1 >= 0 ? static_cast<std::size_t>(pinned_i1) : hi;
    std::size_t i2 = pinned_i2 >= 0 ? static_cast<std::size_t>(pinned_i2) : lo;

    auto order = iota_indices(ds.size());
    Rng rng(seed);
    shuffle_indices(order, rng);
    std::vector<std::size_t> p0;
    for (std::size_t idx : order) {
        if (idx == i1 || idx == i2) continue;
        if (p0.size() < batch_size - 1) p0.push_back(idx);
    }
    return build_certificate_variable(net, ds, batch_size, gspec, std::move(p0), i1, i2);
}

// --- Generalization gap and bounds ----------------------------------------

struct Gap {
    double value = 0.0;     // test MSE - train MSE
    double absolute = 0.0;  // |value|
};

inline Gap generalization_gap(const TwoLayerNet& net, const Dataset& train_set,
                              const Dataset& test_set) {
    const double gap = mean_squared_error(net, test_set) - mean_squared_error(net, train_set);
    return {gap, std::abs(gap)};
}

struct BoundResult {
    double full = 0.0;     // C L^2 (sqrt(ln(1/delta)/N) + sqrt(m n ln m ln N / N))
    double lowrank = 0.0;  // C L^2 (sqrt(ln(1/delta)/N) + sqrt((m+n) ln m ln N / N))
    double ratio = 0.0;    // ratio of the two complexity terms alone
    double pdim_full = 0.0;     // C m n ln m
    double pdim_lowrank = 0.0;  // C (m+n) k ln m
};

/// Evaluates the generalization bound formulas for the full parameter class
/// and the rank-k class. The caller supplies the absolute constant C and the
/// Lipschitz/scale factor L, which the theory leaves unspecified. The ratio
/// field compares only the complexity terms, where the confidence term
/// drops out.
inline BoundResult bound_value(std::size_t m, std::size_t n, std::size_t k, std::size_t n_samples,
                               double delta, double l_scale, double c_scale) {
    detail::require(m >= 2 && n >= 2 && n_samples >= 2,
                    "bound_value: need m, n, N >= 2 so the logarithms are positive");
    detail::require(delta > 0.0 && delta < 1.0, "bound_value: delta must lie in (0, 1)");
    detail::require(l_scale > 0.0 && c_scale > 0.0, "bound_value: C and L must be positive");
    detail::require(k >= 1 && k <= std::min(m, n), "bound_value: need 1 <= k <= min(m, n)");

    const double md = static_cast<double>(m);
    const double nd = static_cast<double>(n);
    const double nn = static_cast<double>(n_samples);
    const double cl2 = c_scale * l_scale * l_scale;
    const double conf = std::sqrt(std::log(1.0 / delta) / nn);
    const double log_factor = std::log(md) * std::log(nn) / nn;
    const double full_term = std::sqrt(md * nd * log_factor);
    const double lowrank_term = std::sqrt((md + nd) * log_factor);

    BoundResult r;
    r.full = cl2 * (conf + full_term);
    r.lowrank = cl2 * (conf + lowrank_term);
    r.ratio = full_term / lowrank_term;
    r.pdim_full = c_scale * md * nd * std::log(md);
    r.pdim_lowrank = c_scale * (md + nd) * static_cast<double>(k) * std::log(md);
    return r;
}

/// Classification accuracy when scalar outputs are read as digits:
/// prediction = clamp(round(output), 0, 9).
inline double accuracy_round(const TwoLayerNet& net, const Dataset& ds) {
    detail::require(ds.size() >= 1, "accuracy_round: empty dataset");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double y = ds.target(i);
        if (y != std::floor(y) || y < 0.0 || y > 9.0) {
            throw std::invalid_argument("accuracy_round: targets must be integers in [0, 9]");
        }
        double pred = std::round(forward(net, ds.input(i)));
        pred = std::clamp(pred, 0.0, 9.0);
        if (pred == y) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(ds.size());
}

}  // namespace ranklab
