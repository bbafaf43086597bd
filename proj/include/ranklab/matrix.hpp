#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ranklab {

namespace detail {
inline void require(bool condition, const std::string& message) {
    if (!condition) throw std::invalid_argument(message);
}
}  // namespace detail

/// Dense row-major matrix of doubles with value semantics.
/// Dimension mismatches throw std::invalid_argument.
class Mat {
  public:
    Mat() = default;

    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), entries_(rows * cols, fill) {
        detail::require(rows > 0 && cols > 0, "Mat: dimensions must be positive");
    }

    static Mat from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        detail::require(rows.size() > 0, "Mat::from_rows: empty");
        Mat m(rows.size(), rows.begin()->size());
        std::size_t i = 0;
        for (const auto& row : rows) {
            detail::require(row.size() == m.cols_, "Mat::from_rows: ragged rows");
            std::size_t j = 0;
            for (double v : row) m(i, j++) = v;
            ++i;
        }
        return m;
    }

    static Mat identity(std::size_t k) {
        Mat m(k, k);
        for (std::size_t i = 0; i < k; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return entries_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return entries_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return entries_[i * cols_ + j]; }

    double* data() { return entries_.data(); }
    const double* data() const { return entries_.data(); }

    std::span<const double> row(std::size_t i) const {
        return {entries_.data() + i * cols_, cols_};
    }
    std::span<double> row(std::size_t i) {
        return {entries_.data() + i * cols_, cols_};
    }

    Mat transposed() const {
        Mat t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    bool all_finite() const {
        for (double v : entries_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool same_shape(const Mat& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    Mat& operator+=(const Mat& other) {
        detail::require(same_shape(other), "Mat::operator+=: shape mismatch");
        for (std::size_t k = 0; k < entries_.size(); ++k) entries_[k] += other.entries_[k];
        return *this;
    }

    Mat& operator-=(const Mat& other) {
        detail::require(same_shape(other), "Mat::operator-=: shape mismatch");
        for (std::size_t k = 0; k < entries_.size(); ++k) entries_[k] -= other.entries_[k];
        return *this;
    }

    Mat& operator*=(double s) {
        for (double& v : entries_) v *= s;
        return *this;
    }

    friend Mat operator+(Mat lhs, const Mat& rhs) { return lhs += rhs; }
    friend Mat operator-(Mat lhs, const Mat& rhs) { return lhs -= rhs; }
    friend Mat operator*(Mat lhs, double s) { return lhs *= s; }
    friend Mat operator*(double s, Mat rhs) { return rhs *= s; }

    /// Matrix product; defined only when inner dimensions agree.
    friend Mat operator*(const Mat& a, const Mat& b) {
        detail::require(a.cols_ == b.rows_, "Mat product: inner dimensions disagree");
        Mat c(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i) {
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const double aik = a(i, k);
                if (aik == 0.0) continue;
                const double* brow = b.entries_.data() + k * b.cols_;
                double* crow = c.entries_.data() + i * c.cols_;
                for (std::size_t j = 0; j < b.cols_; ++j) crow[j] += aik * brow[j];
            }
        }
        return c;
    }

    bool operator==(const Mat& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && entries_ == other.entries_;
    }

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> entries_;
};

/// Column vector of doubles.
class ColVec {
  public:
    ColVec() = default;

    explicit ColVec(std::size_t dim, double fill = 0.0) : entries_(dim, fill) {
        detail::require(dim > 0, "ColVec: dimension must be positive");
    }

    ColVec(std::initializer_list<double> values) : entries_(values) {
        detail::require(!entries_.empty(), "ColVec: dimension must be positive");
    }

    explicit ColVec(std::span<const double> values)
        : entries_(values.begin(), values.end()) {
        detail::require(!entries_.empty(), "ColVec: dimension must be positive");
    }

    std::size_t dim() const { return entries_.size(); }

    double& operator[](std::size_t i) { return entries_[i]; }
    double operator[](std::size_t i) const { return entries_[i]; }

    double* data() { return entries_.data(); }
    const double* data() const { return entries_.data(); }

    std::span<const double> span() const { return {entries_.data(), entries_.size()}; }

    bool all_finite() const {
        for (double v : entries_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    ColVec& operator+=(const ColVec& other) {
        detail::require(dim() == other.dim(), "ColVec::operator+=: dimension mismatch");
        for (std::size_t i = 0; i < entries_.size(); ++i) entries_[i] += other.entries_[i];
        return *this;
    }

    ColVec& operator-=(const ColVec& other) {
        detail::require(dim() == other.dim(), "ColVec::operator-=: dimension mismatch");
        for (std::size_t i = 0; i < entries_.size(); ++i) entries_[i] -= other.entries_[i];
        return *this;
    }

    ColVec& operator*=(double s) {
        for (double& v : entries_) v *= s;
        return *this;
    }

    bool operator==(const ColVec& other) const { return entries_ == other.entries_; }

  private:
    std::vector<double> entries_;
};

/// y = A x.
inline ColVec operator*(const Mat& a, const ColVec& x) {
    detail::require(a.cols() == x.dim(), "Mat*ColVec: dimension mismatch");
    ColVec y(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double acc = 0.0;
        auto r = a.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) acc += r[j] * x[j];
        y[i] = acc;
    }
    return y;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    detail::require(a.size() == b.size(), "dot: dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

/// sqrt of the sum of squared entries; 0 iff the matrix is all zero.
inline double frobenius_norm(const Mat& a) {
    double acc = 0.0;
    const double* p = a.data();
    for (std::size_t k = 0; k < a.size(); ++k) acc += p[k] * p[k];
    return std::sqrt(acc);
}

inline double euclidean_norm(const ColVec& v) {
    double acc = 0.0;
    for (std::size_t i = 0; i < v.dim(); ++i) acc += v[i] * v[i];
    return std::sqrt(acc);
}

inline double euclidean_norm(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

/// dst += s * src, without temporaries. Workhorse of the SGD update.
inline void add_scaled(Mat& dst, double s, const Mat& src) {
    detail::require(dst.same_shape(src), "add_scaled: shape mismatch");
    double* d = dst.data();
    const double* p = src.data();
    for (std::size_t k = 0; k < dst.size(); ++k) d[k] += s * p[k];
}

inline void add_scaled(ColVec& dst, double s, const ColVec& src) {
    detail::require(dst.dim() == src.dim(), "add_scaled: dimension mismatch");
    for (std::size_t i = 0; i < dst.dim(); ++i) dst[i] += s * src[i];
}

inline void require_finite(const Mat& a, const std::string& what) {
    if (!a.all_finite()) throw std::invalid_argument(what + ": non-finite entry");
}

inline void require_finite(const ColVec& v, const std::string& what) {
    if (!v.all_finite()) throw std::invalid_argument(what + ": non-finite entry");
}

}  // namespace ranklab
