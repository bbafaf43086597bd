#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
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

namespace ranklab {

/// Per-sample weight-decay function g(x, y) for the V regularizer. Either a
/// constant mu_v, or affine in y^2: g = a + c * y^2. The effective decay of a
/// batch is the batch mean of g.
struct GSpec {
    enum class Kind { constant, affine_y2 };

    Kind kind = Kind::constant;
    double mu_v = 0.0;  // constant variant
    double a = 0.0;     // affine variant: g = a + c * y^2
    double c = 0.0;

    static GSpec constant(double mu_v) {
        detail::require(mu_v >= 0.0 && std::isfinite(mu_v),
                        "GSpec: constant decay must be finite and nonnegative");
        GSpec g;
        g.kind = Kind::constant;
        g.mu_v = mu_v;
        return g;
    }

    static GSpec affine_y2(double a, double c) {
        detail::require(a > 0.0 && c >= 0.0, "GSpec: affine form needs a > 0, c >= 0");
        GSpec g;
        g.kind = Kind::affine_y2;
        g.a = a;
        g.c = c;
        return g;
    }

    bool is_constant() const { return kind == Kind::constant; }

    double operator()(std::span<const double> /*x*/, double y) const {
        return kind == Kind::constant ? mu_v : a + c * y * y;
    }
};

struct TrainConfig {
    std::size_t batch_size = 16;
    std::size_t epochs = 2000;
    double lr0 = 1e-4;
    double decay_factor = 0.95;
    std::size_t decay_period = 200;
    double mu_u = 1e-4;
    double mu_b = 1e-4;
    GSpec gspec = GSpec::constant(1e-4);
    std::uint64_t seed = 0;
    bool drop_last = true;

    void validate() const {
        detail::require(batch_size >= 2, "TrainConfig: batch_size must be at least 2");
        detail::require(lr0 > 0.0, "TrainConfig: lr0 must be positive");
        detail::require(decay_factor > 0.0 && decay_factor <= 1.0,
                        "TrainConfig: decay_factor must lie in (0, 1]");
        detail::require(decay_period >= 1, "TrainConfig: decay_period must be at least 1");
        detail::require(mu_u >= 0.0 && mu_b >= 0.0,
                        "TrainConfig: mu_u and mu_b must be nonnegative");
        if (gspec.is_constant()) {
            detail::require(gspec.mu_v > 0.0, "TrainConfig: constant decay must be positive");
        }
    }
};

struct EpochRecord {
    std::size_t epoch = 0;
    double lr = 0.0;
    double train_mse = 0.0;
    double test_mse = 0.0;
    double stable_rank = 0.0;
    double v_fro = 0.0;
    double grad_max = 0.0;   // max batch-gradient Frobenius norm (V part) this epoch
    double grad_mean = 0.0;  // mean of the same
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    std::string checkpoint_path;  // set by callers that persist the final net
};

/// Stepped exponential schedule: lr0 * decay_factor^floor(epoch / period).
inline double lr_at(std::size_t epoch, const TrainConfig& config) {
    const auto steps = static_cast<double>(epoch / config.decay_period);
    return config.lr0 * std::pow(config.decay_factor, steps);
}

namespace detail {

inline double g_value(const GSpec& gspec, const Dataset& ds, std::size_t idx) {
    const double g = gspec(ds.input(idx), ds.target(idx));
    if (!(g >= 0.0) || !std::isfinite(g)) {
        throw std::invalid_argument("batch gradient: g(x, y) must be finite and nonnegative, got " +
                                    format_double(g) + " at sample " + std::to_string(idx));
    }
    return g;
}

}  // namespace detail

/// Gradient of the batch loss
///   (1/2B) sum residual^2 + (mu_bar_V/2)||V||_F^2 + (mu_U/2)||U||_F^2 + (mu_b/2)||b||^2
/// where mu_bar_V is the batch mean of g. Accumulation runs in batch order;
/// the decay terms are added once at the end, so a constant g contributes
/// exactly mu_v * V.
inline NetGradient batch_gradient(const TwoLayerNet& net, const Dataset& ds,
                                  std::span<const std::size_t> batch, const GSpec& gspec,
                                  double mu_u, double mu_b) {
    detail::require(!batch.empty(), "batch_gradient: batch must be nonempty");
    detail::require(ds.input_dim() == net.input_dim(), "batch_gradient: input dimension mismatch");
    const std::size_t m = net.width();
    const std::size_t n = net.input_dim();
    const double inv_b = 1.0 / static_cast<double>(batch.size());

    NetGradient acc{Mat(1, m), Mat(m, n), ColVec(m)};
    double g_sum = 0.0;
    for (const std::size_t idx : batch) {
        detail::require(idx < ds.size(), "batch_gradient: sample index out of range");
        const auto x = ds.input(idx);
        g_sum += detail::g_value(gspec, ds, idx);

        // Fused forward + per-sample gradient accumulation; algebraically the
        // residual-scaled grad_params of this sample.
        double out = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double z = dot(net.v.row(i), x) + net.b[i];
            if (z > 0.0) out += net.u(0, i) * z;
        }
        const double residual = out - ds.target(idx);
        for (std::size_t i = 0; i < m; ++i) {
            const double z = dot(net.v.row(i), x) + net.b[i];
            if (z > 0.0) {
                acc.du(0, i) += residual * z;
                const double a = residual * net.u(0, i);
                acc.db[i] += a;
                auto dst = acc.dv.row(i);
                for (std::size_t j = 0; j < n; ++j) dst[j] += a * x[j];
            }
        }
    }
    acc.du *= inv_b;
    acc.dv *= inv_b;
    acc.db *= inv_b;

    const double mean_g = gspec.is_constant() ? gspec.mu_v : g_sum * inv_b;
    add_scaled(acc.dv, mean_g, net.v);
    add_scaled(acc.du, mu_u, net.u);
    add_scaled(acc.db, mu_b, net.b);
    return acc;
}

inline double batch_loss(const TwoLayerNet& net, const Dataset& ds,
                         std::span<const std::size_t> batch, const GSpec& gspec, double mu_u,
                         double mu_b) {
    detail::require(!batch.empty(), "batch_loss: batch must be nonempty");
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double sq = 0.0;
    double g_sum = 0.0;
    for (const std::size_t idx : batch) {
        detail::require(idx < ds.size(), "batch_loss: sample index out of range");
        const double r = forward(net, ds.input(idx)) - ds.target(idx);
        sq += r * r;
        g_sum += detail::g_value(gspec, ds, idx);
    }
    const double mean_g = gspec.is_constant() ? gspec.mu_v : g_sum * inv_b;
    const double u2 = frobenius_norm(net.u);
    const double v2 = frobenius_norm(net.v);
    const double b2 = euclidean_norm(net.b);
    return 0.5 * inv_b * sq + 0.5 * mu_u * u2 * u2 + 0.5 * mean_g * v2 * v2 + 0.5 * mu_b * b2 * b2;
}

/// Plain mean squared error, the quantity logged and used for the
/// generalization gap. No 1/2 factor and no regularizers.
inline double mean_squared_error(const TwoLayerNet& net, const Dataset& ds) {
    detail::require(ds.size() >= 1, "mean_squared_error: empty dataset");
    double sq = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double r = forward(net, ds.input(i)) - ds.target(i);
        sq += r * r;
    }
    return sq / static_cast<double>(ds.size());
}

struct EpochStats {
    double grad_max = 0.0;
    double grad_mean = 0.0;
    std::size_t batches = 0;
};

/// One pass of mini-batch SGD: shuffle indices with the supplied generator,
/// partition into batches, and step theta <- theta - lr * batch_gradient in
/// batch order. With drop_last (the default) every batch has exactly
/// batch_size samples and the remainder sits out this epoch.
inline EpochStats run_epoch(TwoLayerNet& net, const Dataset& ds, const TrainConfig& config,
                            std::size_t epoch, Rng& rng) {
    const std::size_t n_samples = ds.size();
    const std::size_t b = config.batch_size;
    detail::require(n_samples >= b, "run_epoch: dataset smaller than one batch");

    auto order = iota_indices(n_samples);
    shuffle_indices(order, rng);

    const double lr = lr_at(epoch, config);
    EpochStats stats;
    double norm_sum = 0.0;
    std::size_t start = 0;
    while (start + b <= n_samples || (!config.drop_last && start < n_samples)) {
        const std::size_t len = std::min(b, n_samples - start);
        const std::span<const std::size_t> batch(order.data() + start, len);
        const NetGradient grad =
            batch_gradient(net, ds, batch, config.gspec, config.mu_u, config.mu_b);

        add_scaled(net.u, -lr, grad.du);
        add_scaled(net.v, -lr, grad.dv);
        add_scaled(net.b, -lr, grad.db);

        const double vnorm = frobenius_norm(grad.dv);
        stats.grad_max = std::max(stats.grad_max, vnorm);
        norm_sum += vnorm;
        ++stats.batches;
        start += len;
    }
    stats.grad_mean = norm_sum / static_cast<double>(stats.batches);
    return stats;
}

struct TrainResult {
    TwoLayerNet net;
    TrainLog log;
};

/// Full training run with per-epoch instrumentation: train/test MSE, stable
/// rank and Frobenius norm of V, and the batch-gradient norm stats already
/// collected during the epoch.
inline TrainResult train(TwoLayerNet net, const Dataset& train_set, const Dataset& test_set,
                         const TrainConfig& config) {
    config.validate();
    net.validate();
    train_set.validate();
    test_set.validate();
    detail::require(config.batch_size < train_set.size(),
                    "train: batch_size must be smaller than the training set");

    TrainLog log;
    log.epochs.reserve(config.epochs);
    Rng rng(config.seed);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const EpochStats stats = run_epoch(net, train_set, config, epoch, rng);

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr_at(epoch, config);
        rec.train_mse = mean_squared_error(net, train_set);
        rec.test_mse = mean_squared_error(net, test_set);
        rec.v_fro = frobenius_norm(net.v);
        rec.stable_rank = rec.v_fro > 0.0 ? stable_rank(net.v) : 0.0;
        rec.grad_max = stats.grad_max;
        rec.grad_mean = stats.grad_mean;
        log.epochs.push_back(rec);
    }
    return {std::move(net), std::move(log)};
}

inline void write_train_log(const TrainLog& log, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_train_log: cannot open " + path.string());
    out << "epoch,lr,train_mse,test_mse,stable_rank,v_fro,grad_max,grad_mean\n";
    for (const auto& r : log.epochs) {
        out << r.epoch << ',' << format_double(r.lr) << ',' << format_double(r.train_mse) << ','
            << format_double(r.test_mse) << ',' << format_double(r.stable_rank) << ','
            << format_double(r.v_fro) << ',' << format_double(r.grad_max) << ','
            << format_double(r.grad_mean) << '\n';
    }
    if (!out) throw std::runtime_error("write_train_log: write failed for " + path.string());
}

}  // namespace ranklab
