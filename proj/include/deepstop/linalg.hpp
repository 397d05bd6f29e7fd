#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "deepstop/errors.hpp"

namespace deepstop {

/// Dense row-major matrix of doubles. Doubles as the batch container
/// (rows = samples) throughout the library.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

  void resize(std::size_t r, std::size_t c) {
    rows = r;
    cols = c;
    data.assign(r * c, 0.0);
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix constant_correlation(std::size_t n, double rho) {
    Matrix m(n, n, rho);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  bool operator==(const Matrix& o) const { return rows == o.rows && cols == o.cols && data == o.data; }
};

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
/// Pivots at or below 1e-12 are rejected.
inline Matrix cholesky(const Matrix& a) {
  if (a.rows != a.cols) throw Error(ErrorCode::DimensionMismatch, "cholesky needs a square matrix");
  const std::size_t n = a.rows;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (std::abs(a(i, j) - a(j, i)) > 1e-10)
        throw Error(ErrorCode::DimensionMismatch, "cholesky input not symmetric");

  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (diag <= 1e-12) throw Error(ErrorCode::NotPositiveDefinite, "pivot <= 1e-12 at column " + std::to_string(j));
    const double root = std::sqrt(diag);
    l(j, j) = root;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / root;
    }
  }
  return l;
}

// y = m * x for small square matrices (d x d times d).
inline void matvec(const Matrix& m, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) s += m(i, j) * x[j];
    y[i] = s;
  }
}

/// Pairwise (cascade) sum: deterministic and accurate regardless of how the
/// caller partitions work.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample (n-1) standard deviation
  std::size_t count = 0;
};

inline MeanStd mean_std(std::span<const double> v) {
  MeanStd r;
  r.count = v.size();
  if (v.empty()) return r;
  r.mean = pairwise_sum(v) / static_cast<double>(v.size());
  if (v.size() < 2) return r;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = v[i] - r.mean;
    sq[i] = d * d;
  }
  r.stddev = std::sqrt(pairwise_sum(sq) / static_cast<double>(v.size() - 1));
  return r;
}

}  // namespace deepstop
