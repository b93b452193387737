#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace typ3 {

/// Malformed user input: bad dimensions, non-finite values, unknown names.
class input_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation that could not be completed to the requested accuracy.
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rank-decision thresholds shared by every subspace operation.
struct Tolerance {
  double rel_rank_tol = 1e-10;
  double abs_floor = 1e-12;

  void validate() const {
    if (!(rel_rank_tol > 0.0) || !(abs_floor > 0.0)) {
      throw input_error("tolerances must be strictly positive");
    }
  }
};

/// Dense real matrix, column-major.
///
/// Zero columns are allowed so that an empty basis (the trivial subspace)
/// has a natural n x 0 representation.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  /// Row-major nested initializer, convenient for literals in tests.
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.assign(rows_ * cols_, 0.0);
    std::size_t i = 0;
    for (const auto& r : rows) {
      if (r.size() != cols_) throw input_error("ragged matrix literal");
      std::size_t j = 0;
      for (double v : r) (*this)(i, j++) = v;
      ++i;
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix column(std::span<const double> v) {
    Matrix m(v.size(), 1);
    std::copy(v.begin(), v.end(), m.data_.begin());
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0 || cols_ == 0; }

  double& operator()(std::size_t i, std::size_t j) noexcept {
    assert(i < rows_ && j < cols_);
    return data_[j * rows_ + i];
  }
  double operator()(std::size_t i, std::size_t j) const noexcept {
    assert(i < rows_ && j < cols_);
    return data_[j * rows_ + i];
  }

  std::span<double> col(std::size_t j) noexcept {
    return {data_.data() + j * rows_, rows_};
  }
  std::span<const double> col(std::size_t j) const noexcept {
    return {data_.data() + j * rows_, rows_};
  }

  std::vector<double> row(std::size_t i) const {
    std::vector<double> r(cols_);
    for (std::size_t j = 0; j < cols_; ++j) r[j] = (*this)(i, j);
    return r;
  }

  void append_column(std::span<const double> v) {
    if (cols_ == 0 && rows_ == 0) rows_ = v.size();
    if (v.size() != rows_) throw input_error("column length mismatch");
    data_.insert(data_.end(), v.begin(), v.end());
    ++cols_;
  }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  const std::vector<double>& storage() const noexcept { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t j = 0; j < a.cols(); ++j)
    for (std::size_t i = 0; i < a.rows(); ++i) t(j, i) = a(i, j);
  return t;
}

inline Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw input_error("multiply: dimension mismatch");
  Matrix c(a.rows(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    auto cj = c.col(j);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double bkj = b(k, j);
      if (bkj == 0.0) continue;
      auto ak = a.col(k);
      for (std::size_t i = 0; i < a.rows(); ++i) cj[i] += ak[i] * bkj;
    }
  }
  return c;
}

/// aᵀ·b without materializing the transpose.
inline Matrix multiply_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw input_error("multiply_tn: dimension mismatch");
  Matrix c(a.cols(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j)
    for (std::size_t i = 0; i < a.cols(); ++i) c(i, j) = dot(a.col(i), b.col(j));
  return c;
}

inline Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw input_error("add: dimension mismatch");
  Matrix c = a;
  for (std::size_t j = 0; j < a.cols(); ++j)
    for (std::size_t i = 0; i < a.rows(); ++i) c(i, j) += b(i, j);
  return c;
}

inline Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw input_error("subtract: dimension mismatch");
  Matrix c = a;
  for (std::size_t j = 0; j < a.cols(); ++j)
    for (std::size_t i = 0; i < a.rows(); ++i) c(i, j) -= b(i, j);
  return c;
}

inline Matrix operator*(double s, const Matrix& a) {
  Matrix c = a;
  for (std::size_t j = 0; j < a.cols(); ++j)
    for (auto& v : c.col(j)) v *= s;
  return c;
}

/// Column-wise concatenation (A, B). Row counts must agree unless one side is
/// default-constructed.
inline Matrix hconcat(const Matrix& a, const Matrix& b) {
  if (a.rows() == 0 && a.cols() == 0) return b;
  if (b.rows() == 0 && b.cols() == 0) return a;
  if (a.rows() != b.rows()) throw input_error("hconcat: row count mismatch");
  Matrix c(a.rows(), a.cols() + b.cols());
  for (std::size_t j = 0; j < a.cols(); ++j)
    std::copy(a.col(j).begin(), a.col(j).end(), c.col(j).begin());
  for (std::size_t j = 0; j < b.cols(); ++j)
    std::copy(b.col(j).begin(), b.col(j).end(), c.col(a.cols() + j).begin());
  return c;
}

inline Matrix select_columns(const Matrix& a, std::span<const std::size_t> idx) {
  Matrix c(a.rows(), idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j)
    std::copy(a.col(idx[j]).begin(), a.col(idx[j]).end(), c.col(j).begin());
  return c;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows() * b.rows(), a.cols() * b.cols());
  for (std::size_t ja = 0; ja < a.cols(); ++ja)
    for (std::size_t ia = 0; ia < a.rows(); ++ia) {
      const double s = a(ia, ja);
      if (s == 0.0) continue;
      for (std::size_t jb = 0; jb < b.cols(); ++jb)
        for (std::size_t ib = 0; ib < b.rows(); ++ib)
          c(ia * b.rows() + ib, ja * b.cols() + jb) = s * b(ib, jb);
    }
  return c;
}

inline double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.storage()) m = std::max(m, std::abs(v));
  return m;
}

inline double frobenius(const Matrix& a) {
  double s = 0.0;
  for (double v : a.storage()) s += v * v;
  return std::sqrt(s);
}

inline double max_column_norm(const Matrix& a) {
  double m = 0.0;
  for (std::size_t j = 0; j < a.cols(); ++j) m = std::max(m, norm2(a.col(j)));
  return m;
}

inline double trace(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < std::min(a.rows(), a.cols()); ++i) s += a(i, i);
  return s;
}

inline std::vector<double> matvec(const Matrix& a, std::span<const double> v) {
  if (a.cols() != v.size()) throw input_error("matvec: dimension mismatch");
  std::vector<double> r(a.rows(), 0.0);
  for (std::size_t j = 0; j < a.cols(); ++j) {
    if (v[j] == 0.0) continue;
    auto aj = a.col(j);
    for (std::size_t i = 0; i < a.rows(); ++i) r[i] += aj[i] * v[j];
  }
  return r;
}

}  // namespace typ3
