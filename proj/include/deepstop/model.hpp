#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "deepstop/errors.hpp"
#include "deepstop/linalg.hpp"

namespace deepstop {

enum class ModelKind { BlackScholes, Heston };

/// Forward diffusion parameters. Black-Scholes covers the multi-asset case
/// with either a scalar volatility plus a correlation matrix (correlated
/// driving increments) or a full volatility matrix against independent
/// increments. Heston is the two-dimensional (log-price, variance) model.
struct ModelSpec {
  ModelKind kind = ModelKind::BlackScholes;
  int dim = 1;
  double rate = 0.0;
  double dividend = 0.0;
  Matrix vol;          // d x d volatility matrix (scalar sigma stored as sigma*I)
  Matrix correlation;  // d x d SPD correlation of the driving increments
  std::vector<double> x0;

  // Heston parameters (dim == 2, state = (log price, variance)).
  double kappa = 0.0;
  double theta_mean = 0.0;
  double vol_of_vol = 0.0;
  double rho = 0.0;

  Matrix chol;  // cached Cholesky factor of `correlation`

  static ModelSpec black_scholes(int d, double rate, double dividend, double sigma, double pairwise_rho,
                                 double spot) {
    ModelSpec m;
    m.kind = ModelKind::BlackScholes;
    m.dim = d;
    m.rate = rate;
    m.dividend = dividend;
    m.vol = Matrix::identity(d);
    for (int i = 0; i < d; ++i) m.vol(i, i) = sigma;
    m.correlation = Matrix::constant_correlation(d, pairwise_rho);
    m.x0.assign(d, spot);
    m.finalize();
    return m;
  }

  static ModelSpec black_scholes_matrix(int d, double rate, double dividend, Matrix vol_matrix,
                                        std::vector<double> spot) {
    ModelSpec m;
    m.kind = ModelKind::BlackScholes;
    m.dim = d;
    m.rate = rate;
    m.dividend = dividend;
    m.vol = std::move(vol_matrix);
    m.correlation = Matrix::identity(d);
    m.x0 = std::move(spot);
    m.finalize();
    return m;
  }

  static ModelSpec heston(double rate, double kappa, double theta_mean, double vol_of_vol, double rho,
                          double v0) {
    ModelSpec m;
    m.kind = ModelKind::Heston;
    m.dim = 2;
    m.rate = rate;
    m.kappa = kappa;
    m.theta_mean = theta_mean;
    m.vol_of_vol = vol_of_vol;
    m.rho = rho;
    m.vol = Matrix::identity(2);
    m.correlation = Matrix::identity(2);
    m.x0 = {0.0, v0};
    m.finalize();
    return m;
  }

  /// Validates invariants and caches the correlation factor.
  void finalize() {
    if (dim < 1) throw Error(ErrorCode::ValidationError, "model dimension must be >= 1");
    if (kind == ModelKind::Heston && dim != 2)
      throw Error(ErrorCode::ValidationError, "Heston model is two-dimensional");
    if (static_cast<int>(x0.size()) != dim)
      throw Error(ErrorCode::DimensionMismatch, "x0 length does not match model dimension");
    if (correlation.rows != static_cast<std::size_t>(dim))
      throw Error(ErrorCode::DimensionMismatch, "correlation shape does not match model dimension");
    chol = cholesky(correlation);
  }

  bool has_correlation() const {
    for (std::size_t i = 0; i < correlation.rows; ++i)
      for (std::size_t j = 0; j < correlation.cols; ++j)
        if (correlation(i, j) != (i == j ? 1.0 : 0.0)) return true;
    return false;
  }
};

inline void drift_at(const ModelSpec& m, std::span<const double> x, std::span<double> out) {
  if (m.kind == ModelKind::BlackScholes) {
    const double mu = m.rate - m.dividend;
    for (int i = 0; i < m.dim; ++i) out[i] = mu * x[i];
  } else {
    const double v = std::max(x[1], 0.0);
    out[0] = m.rate - 0.5 * v;
    out[1] = m.kappa * (m.theta_mean - v);
  }
}

/// State-dependent diffusion matrix paired with the ensemble's stored driving
/// increments: X_{k+1} = X_k + mu dt + diffusion_at(X_k) * dW_k. For
/// Black-Scholes the stored increments carry the model correlation and the
/// matrix is diag(x) * vol; for Heston the increments are independent and the
/// matrix carries the rho mixing.
inline void diffusion_at(const ModelSpec& m, std::span<const double> x, Matrix& out) {
  out.resize(m.dim, m.dim);
  if (m.kind == ModelKind::BlackScholes) {
    for (int i = 0; i < m.dim; ++i)
      for (int j = 0; j < m.dim; ++j) out(i, j) = x[i] * m.vol(i, j);
  } else {
    const double sv = std::sqrt(std::max(x[1], 0.0));
    out(0, 0) = m.rho * sv;
    out(0, 1) = std::sqrt(1.0 - m.rho * m.rho) * sv;
    out(1, 0) = m.vol_of_vol * sv;
    out(1, 1) = 0.0;
  }
}

inline Matrix diffusion_at(const ModelSpec& m, std::span<const double> x) {
  Matrix out;
  diffusion_at(m, x, out);
  return out;
}

}  // namespace deepstop
