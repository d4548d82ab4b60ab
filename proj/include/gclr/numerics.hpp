#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "gclr/errors.hpp"

namespace gclr {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("Matrix: data length " + std::to_string(data_.size()) +
                       " != " + std::to_string(rows_) + "x" +
                       std::to_string(cols_));
    }
  }
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw ShapeError("Matrix: ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

// Pairwise summation with a fixed split order, so the result does not depend
// on how callers chunk their work.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " * " + std::to_string(b.rows()) +
                     "x" + std::to_string(b.cols()));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

// a * b^T; the similarity kernel for row-embedded matrices.
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: inner dimensions " + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.cols()));
  }
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a.row(i), b.row(j));
  }
  return out;
}

// a^T * b
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: row counts " + std::to_string(a.rows()) + " vs " +
                     std::to_string(b.rows()));
  }
  Matrix out(a.cols(), b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto arow = a.row(r);
    auto brow = b.row(r);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double ai = arow[i];
      auto orow = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += ai * brow[j];
    }
  }
  return out;
}

inline Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

inline constexpr double kMinRowNorm = 1e-12;

inline std::vector<double> row_norms(const Matrix& m) {
  std::vector<double> norms(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) norms[i] = std::sqrt(dot(m.row(i), m.row(i)));
  return norms;
}

inline Matrix row_l2_normalize(const Matrix& m) {
  Matrix out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double norm = std::sqrt(dot(m.row(i), m.row(i)));
    if (!(norm >= kMinRowNorm)) {
      throw DegenerateEmbeddingError("row_l2_normalize: row " + std::to_string(i) +
                                     " has norm " + std::to_string(norm));
    }
    for (double& x : out.row(i)) x /= norm;
  }
  return out;
}

inline double logsumexp(std::span<const double> v) {
  if (v.empty()) throw ShapeError("logsumexp: empty input");
  const double mx = *std::max_element(v.begin(), v.end());
  if (std::isinf(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

inline std::vector<double> logsumexp_rows(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) throw ShapeError("logsumexp_rows: empty matrix");
  std::vector<double> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) out[i] = logsumexp(m.row(i));
  return out;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("max_abs_diff: shape");
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    d = std::max(d, std::abs(a.data()[k] - b.data()[k]));
  return d;
}

// Select rows by index, in the given order.
inline Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices) {
  Matrix out(indices.size(), m.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= m.rows()) throw IndexError("gather_rows: index out of range");
    std::copy(m.row(indices[r]).begin(), m.row(indices[r]).end(), out.row(r).begin());
  }
  return out;
}

inline double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

// ||a - b|| / ||b||, with ||b|| == 0 treated as absolute error.
inline double relative_l2_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("relative_l2_error: length mismatch");
  double num = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) num += (a[k] - b[k]) * (a[k] - b[k]);
  const double den = l2_norm(b);
  return den > 0.0 ? std::sqrt(num) / den : std::sqrt(num);
}

// Shortest representation that round-trips exactly.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace gclr
