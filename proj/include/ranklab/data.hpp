#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "ranklab/format.hpp"
#include "ranklab/matrix.hpp"
#include "ranklab/network.hpp"
#include "ranklab/rng.hpp"

namespace ranklab {

/// Per-feature affine transform x' = scale * x + offset, kept so normalized
/// features can be mapped back to raw values.
struct FeatureAffine {
    double scale = 1.0;
    double offset = 0.0;

    double apply(double x) const { return scale * x + offset; }
    double invert(double x) const { return (x - offset) / scale; }
    bool is_identity() const { return scale == 1.0 && offset == 0.0; }
};

struct Dataset {
    Mat x;     // one sample per row
    ColVec y;  // targets, same length as x has rows
    std::vector<FeatureAffine> transforms;  // one per feature; empty means raw

    std::size_t size() const { return x.rows(); }
    std::size_t input_dim() const { return x.cols(); }
    std::span<const double> input(std::size_t i) const { return x.row(i); }
    double target(std::size_t i) const { return y[i]; }

    void validate() const {
        detail::require(x.rows() == y.dim(), "Dataset: sample/target count mismatch");
        detail::require(transforms.empty() || transforms.size() == x.cols(),
                        "Dataset: transform count must match feature count");
        require_finite(x, "Dataset inputs");
        require_finite(y, "Dataset targets");
    }
};

enum class Normalize { none, zscore, minmax };

namespace detail {

// Splits one CSV record, honoring double quotes ("" escapes a quote inside a
// quoted field). Line numbers in errors are 1-based.
inline std::vector<std::string> split_csv_record(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c == '\r' && i + 1 == line.size()) {
            // tolerate CRLF input
        } else {
            cur += c;
        }
    }
    if (quoted) {
        throw std::runtime_error("csv line " + std::to_string(line_no) + ": unterminated quote");
    }
    fields.push_back(cur);
    return fields;
}

inline double column_mean(const Mat& x, std::size_t j) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) s += x(i, j);
    return s / static_cast<double>(x.rows());
}

}  // namespace detail

/// Applies the chosen normalization in place and records the per-feature
/// affine maps. zscore uses the sample standard deviation; a constant column
/// is only centered (scale 1), keeping the transform invertible. minmax maps
/// the observed [lo, hi] onto [a, b] and rejects constant columns.
inline void normalize_features(Dataset& ds, Normalize mode, double a = -1.0, double b = 1.0) {
    const std::size_t n = ds.input_dim();
    ds.transforms.assign(n, FeatureAffine{});
    if (mode == Normalize::none) return;
    detail::require(!(mode == Normalize::minmax && a >= b), "normalize: need a < b for minmax");

    for (std::size_t j = 0; j < n; ++j) {
        FeatureAffine t;
        if (mode == Normalize::zscore) {
            const double mean = detail::column_mean(ds.x, j);
            double ss = 0.0;
            for (std::size_t i = 0; i < ds.size(); ++i) {
                const double d = ds.x(i, j) - mean;
                ss += d * d;
            }
            const double var = ds.size() > 1 ? ss / static_cast<double>(ds.size() - 1) : 0.0;
            const double sd = std::sqrt(var);
            t.scale = sd > 0.0 ? 1.0 / sd : 1.0;
            t.offset = -mean * t.scale;
        } else {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (std::size_t i = 0; i < ds.size(); ++i) {
                lo = std::min(lo, ds.x(i, j));
                hi = std::max(hi, ds.x(i, j));
            }
            if (!(hi > lo)) {
                throw std::runtime_error("normalize: feature " + std::to_string(j) +
                                         " is constant, minmax undefined");
            }
            t.scale = (b - a) / (hi - lo);
            t.offset = a - lo * t.scale;
        }
        for (std::size_t i = 0; i < ds.size(); ++i) ds.x(i, j) = t.apply(ds.x(i, j));
        ds.transforms[j] = t;
    }
}

/// Loads a regression dataset from CSV. The header row is required; the
/// named target column becomes y and every other column, in header order,
/// becomes a feature.
inline Dataset load_csv(const std::filesystem::path& path, const std::string& target_column,
                        Normalize mode = Normalize::none, double minmax_lo = -1.0,
                        double minmax_hi = 1.0) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_csv: empty file " + path.string());
    const auto header = detail::split_csv_record(line, 1);

    std::size_t target_idx = header.size();
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] == target_column) target_idx = j;
    }
    if (target_idx == header.size()) {
        throw std::runtime_error("load_csv: target column '" + target_column + "' not in header");
    }
    const std::size_t n = header.size() - 1;
    if (n == 0) throw std::runtime_error("load_csv: no feature columns besides the target");

    std::vector<double> xvals;
    std::vector<double> yvals;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        const auto fields = detail::split_csv_record(line, line_no);
        if (fields.size() != header.size()) {
            throw std::runtime_error("csv line " + std::to_string(line_no) + ": expected " +
                                     std::to_string(header.size()) + " fields, got " +
                                     std::to_string(fields.size()));
        }
        for (std::size_t j = 0; j < fields.size(); ++j) {
            const std::string where =
                "csv line " + std::to_string(line_no) + ", column '" + header[j] + "'";
            const double value = parse_double(fields[j], where);
            if (j == target_idx) {
                yvals.push_back(value);
            } else {
                xvals.push_back(value);
            }
        }
    }
    if (yvals.empty()) throw std::runtime_error("load_csv: no data rows in " + path.string());

    Dataset ds{Mat(yvals.size(), n), ColVec(yvals.size()), {}};
    std::copy(xvals.begin(), xvals.end(), ds.x.data());
    for (std::size_t i = 0; i < yvals.size(); ++i) ds.y[i] = yvals[i];
    ds.validate();
    normalize_features(ds, mode, minmax_lo, minmax_hi);
    return ds;
}

/// Writes a dataset as CSV with features named f0..f{n-1} and a final
/// `target` column. Values use shortest round-trip formatting.
inline void save_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_csv: cannot open " + path.string());
    for (std::size_t j = 0; j < ds.input_dim(); ++j) out << 'f' << j << ',';
    out << "target\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t j = 0; j < ds.input_dim(); ++j) out << format_double(ds.x(i, j)) << ',';
        out << format_double(ds.y[i]) << '\n';
    }
    if (!out) throw std::runtime_error("save_csv: write failed for " + path.string());
}

namespace detail {

inline std::uint32_t read_be_u32(std::istream& in, const std::string& what) {
    unsigned char buf[4];
    if (!in.read(reinterpret_cast<char*>(buf), 4)) {
        throw std::runtime_error("idx: truncated file while reading " + what);
    }
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

}  // namespace detail

/// Loads an image/label pair in IDX format. Pixels are mapped from [0, 255]
/// to [-1, 1] by p / 127.5 - 1; labels are kept as-is (reals in [0, 9] for
/// digit data).
inline Dataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("load_idx: cannot open " + images_path.string());
    const std::uint32_t img_magic = detail::read_be_u32(img, "image magic");
    if (img_magic != 0x00000803u) {
        throw std::runtime_error("load_idx: bad image magic in " + images_path.string() +
                                 " (got 0x" + std::to_string(img_magic) + ", want 0x803)");
    }
    const std::uint32_t count = detail::read_be_u32(img, "image count");
    const std::uint32_t rows = detail::read_be_u32(img, "image rows");
    const std::uint32_t cols = detail::read_be_u32(img, "image cols");
    if (count == 0 || rows == 0 || cols == 0) {
        throw std::runtime_error("load_idx: empty image file " + images_path.string());
    }

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("load_idx: cannot open " + labels_path.string());
    const std::uint32_t lab_magic = detail::read_be_u32(lab, "label magic");
    if (lab_magic != 0x00000801u) {
        throw std::runtime_error("load_idx: bad label magic in " + labels_path.string() +
                                 " (got 0x" + std::to_string(lab_magic) + ", want 0x801)");
    }
    const std::uint32_t lab_count = detail::read_be_u32(lab, "label count");
    if (lab_count != count) {
        throw std::runtime_error("load_idx: image/label count mismatch (" + std::to_string(count) +
                                 " vs " + std::to_string(lab_count) + ")");
    }

    const std::size_t dim = std::size_t(rows) * cols;
    Dataset ds{Mat(count, dim), ColVec(count), {}};
    std::vector<unsigned char> pixel_row(dim);
    for (std::uint32_t i = 0; i < count; ++i) {
        if (!img.read(reinterpret_cast<char*>(pixel_row.data()),
                      static_cast<std::streamsize>(dim))) {
            throw std::runtime_error("load_idx: truncated image data at image " +
                                     std::to_string(i));
        }
        double* dst = ds.x.data() + std::size_t(i) * dim;
        for (std::size_t j = 0; j < dim; ++j) dst[j] = pixel_row[j] / 127.5 - 1.0;
    }
    for (std::uint32_t i = 0; i < count; ++i) {
        char label = 0;
        if (!lab.read(&label, 1)) {
            throw std::runtime_error("load_idx: truncated label data at label " +
                                     std::to_string(i));
        }
        ds.y[i] = static_cast<unsigned char>(label);
    }
    ds.validate();
    return ds;
}

/// Builds a teacher network whose V has exact rank r: V = A B with Gaussian
/// factors A (m x r) and B (r x n), entry variances 1/r and 2/n so the
/// product matches Kaiming scale. U is Kaiming, b is zero.
inline TwoLayerNet make_teacher(std::size_t m, std::size_t n, std::size_t r, std::uint64_t seed) {
    detail::require(r >= 1 && r <= n && r <= m, "make_teacher: need 1 <= r <= min(m, n)");
    Rng rng(seed);
    Mat a(m, r);
    Mat factor_b(r, n);
    const double sd_a = std::sqrt(1.0 / static_cast<double>(r));
    const double sd_b = std::sqrt(2.0 / static_cast<double>(n));
    for (std::size_t k = 0; k < a.size(); ++k) a.data()[k] = sd_a * rng.gaussian();
    for (std::size_t k = 0; k < factor_b.size(); ++k) factor_b.data()[k] = sd_b * rng.gaussian();

    TwoLayerNet teacher{Mat(1, m), a * factor_b, ColVec(m)};
    const double sd_u = std::sqrt(2.0 / static_cast<double>(m));
    for (std::size_t i = 0; i < m; ++i) teacher.u(0, i) = sd_u * rng.gaussian();
    return teacher;
}

struct TeacherDataset {
    TwoLayerNet teacher;
    Dataset data;
};

/// Synthetic regression data from a planted low-rank teacher: x ~ N(0, I_n),
/// y = teacher(x) + N(0, noise_std^2). Fully determined by the seed.
inline TeacherDataset synthetic_teacher_full(std::size_t n, std::size_t num_samples,
                                             std::size_t teacher_rank, double noise_std,
                                             std::uint64_t seed, std::size_t teacher_width = 64) {
    detail::require(num_samples >= 1, "synthetic_teacher: need at least one sample");
    detail::require(noise_std >= 0.0, "synthetic_teacher: noise_std must be nonnegative");
    TwoLayerNet teacher = make_teacher(teacher_width, n, teacher_rank, seed);

    Rng rng(seed ^ 0x9e3779b97f4a7c15ull);  // separate stream from the teacher draw
    Dataset ds{Mat(num_samples, n), ColVec(num_samples), {}};
    for (std::size_t i = 0; i < num_samples; ++i) {
        double* row = ds.x.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) row[j] = rng.gaussian();
        ds.y[i] = forward(teacher, std::span<const double>(row, n));
    }
    if (noise_std > 0.0) {
        for (std::size_t i = 0; i < num_samples; ++i) ds.y[i] += noise_std * rng.gaussian();
    }
    ds.validate();
    return {std::move(teacher), std::move(ds)};
}

inline Dataset synthetic_teacher(std::size_t n, std::size_t num_samples, std::size_t teacher_rank,
                                 double noise_std, std::uint64_t seed,
                                 std::size_t teacher_width = 64) {
    return synthetic_teacher_full(n, num_samples, teacher_rank, noise_std, seed, teacher_width)
        .data;
}

/// Disjoint seeded subsamples without replacement. The shuffled index order
/// is determined by the seed alone, so the same call always returns the same
/// split.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, std::size_t n_train,
                                         std::size_t n_test, std::uint64_t seed) {
    detail::require(n_train >= 1 && n_test >= 1, "split: both parts must be nonempty");
    if (n_train + n_test > ds.size()) {
        throw std::runtime_error("split: requested " + std::to_string(n_train + n_test) +
                                 " samples from " + std::to_string(ds.size()));
    }
    auto order = iota_indices(ds.size());
    Rng rng(seed);
    shuffle_indices(order, rng);

    const std::size_t n = ds.input_dim();
    auto take = [&](std::size_t begin, std::size_t count) {
        Dataset part{Mat(count, n), ColVec(count), ds.transforms};
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t src = order[begin + i];
            std::copy_n(ds.x.data() + src * n, n, part.x.data() + i * n);
            part.y[i] = ds.y[src];
        }
        return part;
    };
    return {take(0, n_train), take(n_train, n_test)};
}

}  // namespace ranklab
