#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "epa/error.hpp"

namespace epa {

namespace detail {

inline void require_finite(std::span<const double> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorCode::NonFinite,
                  std::string(what) + " has a non-finite entry at flat index " + std::to_string(i));
    }
  }
}

}  // namespace detail

// Dense real vector. Entries are checked for finiteness on construction.
class DenseVector {
 public:
  DenseVector() = default;
  explicit DenseVector(std::size_t len, double fill = 0.0) : data_(len, fill) {
    detail::require_finite(data_, "DenseVector");
  }
  explicit DenseVector(std::vector<double> data) : data_(std::move(data)) {
    detail::require_finite(data_, "DenseVector");
  }
  DenseVector(std::initializer_list<double> values) : data_(values) {
    detail::require_finite(data_, "DenseVector");
  }

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  friend bool operator==(const DenseVector&, const DenseVector&) = default;

 private:
  std::vector<double> data_;
};

// Dense real matrix, row-major.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    detail::require_finite(data_, "DenseMatrix");
  }
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw Error(ErrorCode::ShapeMismatch,
                  "DenseMatrix expects " + std::to_string(rows_ * cols_) + " values, got " +
                      std::to_string(data_.size()));
    }
    detail::require_finite(data_, "DenseMatrix");
  }
  // Nested-list literal, e.g. DenseMatrix{{1, 2}, {3, 4}}.
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw Error(ErrorCode::ShapeMismatch, "ragged matrix literal");
      data_.insert(data_.end(), r.begin(), r.end());
    }
    detail::require_finite(data_, "DenseMatrix");
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }

  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }
  std::span<double> row(std::size_t r) { return std::span<double>(data_).subspan(r * cols_, cols_); }

  DenseVector row_vector(std::size_t r) const {
    auto v = row(r);
    return DenseVector(std::vector<double>(v.begin(), v.end()));
  }
  DenseVector col_vector(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return DenseVector(std::move(out));
  }

  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
  return t;
}

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "matmul " + std::to_string(a.rows()) + "x" +
                                              std::to_string(a.cols()) + " by " +
                                              std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

inline double dot(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::ShapeMismatch, "dot of unequal lengths");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline DenseVector matvec(const DenseMatrix& a, const DenseVector& x) {
  if (a.cols() != x.size()) {
    throw Error(ErrorCode::ShapeMismatch, "matvec " + std::to_string(a.rows()) + "x" +
                                              std::to_string(a.cols()) + " by vector of length " +
                                              std::to_string(x.size()));
  }
  DenseVector out(a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) out[r] = dot(a.row(r), x.values());
  return out;
}

// y = Aᵀx without materializing the transpose.
inline DenseVector matvec_transposed(const DenseMatrix& a, std::span<const double> x) {
  if (a.rows() != x.size()) {
    throw Error(ErrorCode::ShapeMismatch, "transposed matvec: matrix has " + std::to_string(a.rows()) +
                                              " rows, vector has length " + std::to_string(x.size()));
  }
  DenseVector out(a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double xr = x[r];
    auto row = a.row(r);
    for (std::size_t c = 0; c < a.cols(); ++c) out[c] += row[c] * xr;
  }
  return out;
}

inline double norm2(std::span<const double> x) {
  // Scaled accumulation so very large or tiny features do not overflow/underflow.
  double scale = 0.0;
  for (double v : x) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return 0.0;
  double s = 0.0;
  for (double v : x) {
    const double t = v / scale;
    s += t * t;
  }
  return scale * std::sqrt(s);
}

inline double norm2(const DenseVector& x) { return norm2(x.values()); }

inline double frobenius_norm(const DenseMatrix& a) { return norm2(a.values()); }

inline DenseVector subtract(const DenseVector& x, const DenseVector& y) {
  if (x.size() != y.size()) throw Error(ErrorCode::ShapeMismatch, "vector subtraction of unequal lengths");
  DenseVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return out;
}

}  // namespace epa
