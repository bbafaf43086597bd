#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ranklab/format.hpp"
#include "ranklab/matrix.hpp"
#include "ranklab/rng.hpp"

namespace ranklab {

/// Two-layer ReLU network x -> U relu(V x + b), with U 1 x m, V m x n, b m.
/// m is the hidden width, n the input dimension. Immutable in all
/// forward/gradient operations; only the training loop mutates parameters.
struct TwoLayerNet {
    Mat u;     // 1 x m
    Mat v;     // m x n
    ColVec b;  // m

    std::size_t width() const { return v.rows(); }
    std::size_t input_dim() const { return v.cols(); }

    void validate() const {
        detail::require(u.rows() == 1, "TwoLayerNet: U must have one row");
        detail::require(u.cols() == v.rows() && v.rows() == b.dim(),
                        "TwoLayerNet: U.cols, V.rows and b.dim must agree");
        require_finite(u, "TwoLayerNet U");
        require_finite(v, "TwoLayerNet V");
        require_finite(b, "TwoLayerNet b");
    }
};

/// Which hidden units fire for a given input. Unit i is active iff
/// v_i . x + b_i > 0; a pre-activation of exactly zero counts as inactive.
struct ActivationPattern {
    std::vector<std::uint8_t> bits;

    bool operator==(const ActivationPattern& other) const { return bits == other.bits; }
    std::size_t active_count() const {
        std::size_t c = 0;
        for (auto b : bits) c += b;
        return c;
    }
};

/// Parameter-space gradient of the scalar output, scaled by a residual.
/// dv is an outer product and therefore has rank at most one per sample.
struct NetGradient {
    Mat du;     // 1 x m
    Mat dv;     // m x n
    ColVec db;  // m
};

namespace detail {
inline void check_input_dim(const TwoLayerNet& net, std::size_t xdim, const char* op) {
    require(xdim == net.input_dim(), std::string(op) + ": input dimension mismatch");
}
}  // namespace detail

/// z = V x + b.
inline ColVec preactivations(const TwoLayerNet& net, std::span<const double> x) {
    detail::check_input_dim(net, x.size(), "preactivations");
    ColVec z(net.width());
    for (std::size_t i = 0; i < net.width(); ++i) z[i] = dot(net.v.row(i), x) + net.b[i];
    return z;
}

inline ColVec preactivations(const TwoLayerNet& net, const ColVec& x) {
    return preactivations(net, x.span());
}

inline double forward(const TwoLayerNet& net, std::span<const double> x) {
    detail::check_input_dim(net, x.size(), "forward");
    double out = 0.0;
    for (std::size_t i = 0; i < net.width(); ++i) {
        const double z = dot(net.v.row(i), x) + net.b[i];
        if (z > 0.0) out += net.u(0, i) * z;
    }
    return out;
}

inline double forward(const TwoLayerNet& net, const ColVec& x) { return forward(net, x.span()); }

inline ActivationPattern activation_pattern(const TwoLayerNet& net, std::span<const double> x) {
    detail::check_input_dim(net, x.size(), "activation_pattern");
    ActivationPattern pattern;
    pattern.bits.resize(net.width());
    for (std::size_t i = 0; i < net.width(); ++i) {
        pattern.bits[i] = (dot(net.v.row(i), x) + net.b[i] > 0.0) ? 1 : 0;
    }
    return pattern;
}

inline ActivationPattern activation_pattern(const TwoLayerNet& net, const ColVec& x) {
    return activation_pattern(net, x.span());
}

/// min_i |v_i . x + b_i|: how far the input sits from the nearest activation
/// boundary. The pattern is provably stable under any V-perturbation with
/// spectral norm below margin / ||x||.
inline double activation_margin(const TwoLayerNet& net, std::span<const double> x) {
    detail::check_input_dim(net, x.size(), "activation_margin");
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < net.width(); ++i) {
        margin = std::min(margin, std::abs(dot(net.v.row(i), x) + net.b[i]));
    }
    return margin;
}

inline double activation_margin(const TwoLayerNet& net, const ColVec& x) {
    return activation_margin(net, x.span());
}

/// Residual-scaled analytic gradients of the scalar output at (net, x):
///   dv = residual * (D U^T) x^T   (m x n, rank <= 1)
///   du = residual * relu(V x + b)^T
///   db = residual * (D U^T)
/// where D masks inactive units. Valid away from activation boundaries.
inline NetGradient grad_params(const TwoLayerNet& net, std::span<const double> x,
                               double residual) {
    detail::check_input_dim(net, x.size(), "grad_params");
    const std::size_t m = net.width();
    const std::size_t n = net.input_dim();

    NetGradient g{Mat(1, m), Mat(m, n), ColVec(m)};
    for (std::size_t i = 0; i < m; ++i) {
        const double z = dot(net.v.row(i), x) + net.b[i];
        if (z > 0.0) {
            g.du(0, i) = residual * z;
            const double a = residual * net.u(0, i);
            g.db[i] = a;
            auto dst = g.dv.row(i);
            for (std::size_t j = 0; j < n; ++j) dst[j] = a * x[j];
        }
    }
    return g;
}

inline NetGradient grad_params(const TwoLayerNet& net, const ColVec& x, double residual) {
    return grad_params(net, x.span(), residual);
}

/// Kaiming (fan-in, gain 2) normal initialization: V ~ N(0, 2/n),
/// U ~ N(0, 2/m), b = 0. Deterministic per seed; V is drawn first.
inline TwoLayerNet kaiming_init(std::size_t m, std::size_t n, std::uint64_t seed) {
    detail::require(m >= 1 && n >= 1, "kaiming_init: dimensions must be positive");
    Rng rng(seed);
    TwoLayerNet net{Mat(1, m), Mat(m, n), ColVec(m)};
    const double sd_v = std::sqrt(2.0 / static_cast<double>(n));
    double* pv = net.v.data();
    for (std::size_t k = 0; k < net.v.size(); ++k) pv[k] = sd_v * rng.gaussian();
    const double sd_u = std::sqrt(2.0 / static_cast<double>(m));
    for (std::size_t i = 0; i < m; ++i) net.u(0, i) = sd_u * rng.gaussian();
    return net;
}

// --- Checkpoint format ---------------------------------------------------
// Line 1:        "m n"
// Line 2:        U as one row of m values
// Lines 3..m+2:  V, one row of n values per line
// Last line:     b as one row of m values
// Values use shortest round-trip formatting, so save/load is bit-exact.

inline void save_checkpoint(const TwoLayerNet& net, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
    const std::size_t m = net.width();
    const std::size_t n = net.input_dim();
    out << m << ' ' << n << '\n';
    for (std::size_t i = 0; i < m; ++i) out << (i ? " " : "") << format_double(net.u(0, i));
    out << '\n';
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) out << (j ? " " : "") << format_double(net.v(i, j));
        out << '\n';
    }
    for (std::size_t i = 0; i < m; ++i) out << (i ? " " : "") << format_double(net.b[i]);
    out << '\n';
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

namespace detail {
inline std::vector<double> parse_row(const std::string& line, std::size_t expected,
                                     const std::string& context) {
    std::vector<double> values;
    values.reserve(expected);
    std::istringstream ss(line);
    std::string token;
    while (ss >> token) values.push_back(parse_double(token, context));
    if (values.size() != expected) {
        throw std::runtime_error(context + ": expected " + std::to_string(expected) +
                                 " values, got " + std::to_string(values.size()));
    }
    return values;
}
}  // namespace detail

inline TwoLayerNet load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_checkpoint: empty file");
    std::istringstream header(line);
    long long m = 0, n = 0;
    if (!(header >> m >> n) || m <= 0 || n <= 0) {
        throw std::runtime_error("load_checkpoint: bad header '" + line + "'");
    }

    TwoLayerNet net{Mat(1, static_cast<std::size_t>(m)),
                    Mat(static_cast<std::size_t>(m), static_cast<std::size_t>(n)),
                    ColVec(static_cast<std::size_t>(m))};

    if (!std::getline(in, line)) throw std::runtime_error("load_checkpoint: missing U row");
    auto u = detail::parse_row(line, static_cast<std::size_t>(m), "checkpoint U");
    for (std::size_t i = 0; i < u.size(); ++i) net.u(0, i) = u[i];

    for (long long i = 0; i < m; ++i) {
        if (!std::getline(in, line)) {
            throw std::runtime_error("load_checkpoint: missing V row " + std::to_string(i));
        }
        auto row = detail::parse_row(line, static_cast<std::size_t>(n),
                                     "checkpoint V row " + std::to_string(i));
        for (std::size_t j = 0; j < row.size(); ++j) net.v(static_cast<std::size_t>(i), j) = row[j];
    }

    if (!std::getline(in, line)) throw std::runtime_error("load_checkpoint: missing b row");
    auto b = detail::parse_row(line, static_cast<std::size_t>(m), "checkpoint b");
    for (std::size_t i = 0; i < b.size(); ++i) net.b[i] = b[i];

    net.validate();
    return net;
}

}  // namespace ranklab
