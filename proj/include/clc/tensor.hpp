#pragma once

// Dense row-major vectors/matrices and the handful of kernels the heads and
// losses need. Reductions run strictly left to right so that results are
// bit-reproducible for a given input.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <ranges>
#include <type_traits>
#include <span>
#include <string>
#include <vector>

#include "clc/error.hpp"

namespace clc {

// verify = 64-bit everywhere, fast = 32-bit kernels.
enum class Precision { verify, fast };

namespace detail {

template <typename Real>
void require_finite(std::span<const Real> values, const char* what) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw Error(ErrorKind::NonFinite,
                        std::string(what) + " has a non-finite value at index " + std::to_string(i));
        }
    }
}

} // namespace detail

template <typename Real>
class BasicVector {
public:
    using value_type = Real;

    BasicVector() = default;
    explicit BasicVector(std::size_t dim) : data_(dim, Real(0)) {}
    explicit BasicVector(std::vector<Real> data) : data_(std::move(data)) {
        detail::require_finite<Real>(data_, "vector");
    }
    BasicVector(std::initializer_list<Real> init) : BasicVector(std::vector<Real>(init)) {}

    std::size_t dim() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    Real operator[](std::size_t i) const { return data_[i]; }
    Real& operator[](std::size_t i) { return data_[i]; }

    std::span<const Real> values() const noexcept { return data_; }
    std::span<Real> values() noexcept { return data_; }
    const std::vector<Real>& data() const noexcept { return data_; }

    bool operator==(const BasicVector&) const = default;

private:
    std::vector<Real> data_;
};

template <typename Real>
class BasicMatrix {
public:
    using value_type = Real;

    BasicMatrix() = default;
    BasicMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, Real(0)) {}
    BasicMatrix(std::size_t rows, std::size_t cols, std::vector<Real> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) {
            throw Error(ErrorKind::ShapeMismatch, "matrix " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                                                      " given " + std::to_string(data_.size()) + " values");
        }
        detail::require_finite<Real>(data_, "matrix");
    }
    BasicMatrix(std::initializer_list<std::initializer_list<Real>> init) {
        rows_ = init.size();
        cols_ = rows_ == 0 ? 0 : init.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& row : init) {
            if (row.size() != cols_) {
                throw Error(ErrorKind::ShapeMismatch, "ragged matrix initializer");
            }
            data_.insert(data_.end(), row.begin(), row.end());
        }
        detail::require_finite<Real>(data_, "matrix");
    }

    static BasicMatrix identity(std::size_t n) {
        BasicMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = Real(1);
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    Real operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    Real& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

    std::span<const Real> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::span<Real> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

    std::span<const Real> values() const noexcept { return data_; }
    std::span<Real> values() noexcept { return data_; }

    bool operator==(const BasicMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Real> data_;
};

using Vector = BasicVector<double>;
using Matrix = BasicMatrix<double>;

template <typename To, typename From>
BasicVector<To> cast(const BasicVector<From>& v) {
    return BasicVector<To>(std::vector<To>(v.data().begin(), v.data().end()));
}

template <typename To, typename From>
BasicMatrix<To> cast(const BasicMatrix<From>& m) {
    return BasicMatrix<To>(m.rows(), m.cols(), std::vector<To>(m.values().begin(), m.values().end()));
}

template <std::ranges::contiguous_range A, std::ranges::contiguous_range B>
std::ranges::range_value_t<A> dot(const A& a, const B& b) {
    using Real = std::ranges::range_value_t<A>;
    if (std::ranges::size(a) != std::ranges::size(b)) {
        throw Error(ErrorKind::ShapeMismatch,
                    "dot of length " + std::to_string(std::ranges::size(a)) + " and " +
                        std::to_string(std::ranges::size(b)));
    }
    Real acc = 0;
    for (std::size_t i = 0; i < std::ranges::size(a); ++i) acc += a[i] * b[i];
    return acc;
}

template <std::ranges::contiguous_range V>
std::ranges::range_value_t<V> norm(const V& v) {
    return std::sqrt(dot(v, v));
}

inline constexpr double kDefaultNormEpsilon = 1e-12;

template <typename Real>
BasicVector<Real> l2_normalize(const BasicVector<Real>& v, Real eps = Real(kDefaultNormEpsilon)) {
    const Real n = norm(v.values());
    if (!(n > eps)) {
        throw Error(ErrorKind::ZeroNorm, "cannot normalize a vector of norm " + std::to_string(n));
    }
    std::vector<Real> out(v.dim());
    for (std::size_t i = 0; i < v.dim(); ++i) out[i] = v[i] / n;
    return BasicVector<Real>(std::move(out));
}

// log(sum(exp(v))) with the max shifted out.
template <std::ranges::contiguous_range V>
std::ranges::range_value_t<V> log_sum_exp(const V& v) {
    using Real = std::ranges::range_value_t<V>;
    if (std::ranges::empty(v)) {
        throw Error(ErrorKind::EmptyInput, "log_sum_exp of an empty vector");
    }
    Real m = v[0];
    const std::size_t n = std::ranges::size(v);
    for (std::size_t i = 1; i < n; ++i) m = std::max(m, v[i]);
    Real s = 0;
    for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
    return m + std::log(s);
}

template <typename Real>
Real log_sum_exp(const BasicVector<Real>& v) {
    return log_sum_exp(v.values());
}

template <typename Real>
BasicMatrix<Real> matmul(const BasicMatrix<Real>& a, const BasicMatrix<Real>& b) {
    if (a.cols() != b.rows()) {
        throw Error(ErrorKind::ShapeMismatch, "matmul " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                                  " by " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
    BasicMatrix<Real> out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            Real acc = 0;
            for (std::size_t p = 0; p < a.cols(); ++p) acc += a(i, p) * b(p, j);
            out(i, j) = acc;
        }
    }
    return out;
}

// y = M x
template <typename Real>
BasicVector<Real> matvec(const BasicMatrix<Real>& m, std::type_identity_t<std::span<const Real>> x) {
    if (m.cols() != x.size()) {
        throw Error(ErrorKind::ShapeMismatch, "matvec " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                                  " by vector of length " + std::to_string(x.size()));
    }
    BasicVector<Real> out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) out[i] = dot(m.row(i), x);
    return out;
}

// y = M^T x
template <typename Real>
BasicVector<Real> matvec_transposed(const BasicMatrix<Real>& m, std::type_identity_t<std::span<const Real>> x) {
    if (m.rows() != x.size()) {
        throw Error(ErrorKind::ShapeMismatch, "transposed matvec " + std::to_string(m.rows()) + "x" +
                                                  std::to_string(m.cols()) + " by vector of length " +
                                                  std::to_string(x.size()));
    }
    BasicVector<Real> out(m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) out[j] += m(i, j) * x[i];
    }
    return out;
}

// Column-wise mean over the rows of m.
template <typename Real>
BasicVector<Real> mean_pool_rows(const BasicMatrix<Real>& m) {
    if (m.rows() == 0) {
        throw Error(ErrorKind::ShapeMismatch, "mean_pool_rows needs at least one row");
    }
    BasicVector<Real> out(m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) out[c] += m(r, c);
    }
    const Real inv = Real(1) / static_cast<Real>(m.rows());
    for (std::size_t c = 0; c < m.cols(); ++c) out[c] *= inv;
    return out;
}

// Stack matrices with equal column counts on top of each other.
template <typename Real>
BasicMatrix<Real> vstack(std::span<const BasicMatrix<Real>> parts) {
    if (parts.empty()) {
        throw Error(ErrorKind::EmptyInput, "vstack of no matrices");
    }
    const std::size_t cols = parts.front().cols();
    std::size_t rows = 0;
    for (const auto& p : parts) {
        if (p.cols() != cols) {
            throw Error(ErrorKind::ShapeMismatch, "vstack column counts differ: " + std::to_string(cols) + " vs " +
                                                      std::to_string(p.cols()));
        }
        rows += p.rows();
    }
    std::vector<Real> data;
    data.reserve(rows * cols);
    for (const auto& p : parts) data.insert(data.end(), p.values().begin(), p.values().end());
    return BasicMatrix<Real>(rows, cols, std::move(data));
}

} // namespace clc
