#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "deepstop/errors.hpp"

namespace deepstop {

/// Decaying rate base * 1e-4^(max((n - 50)/decay_scale, 0)). decay_scale is
/// 1000 for the terminal time step and 500 for the interior ones.
struct LearningRateSchedule {
  double base = 0.01;
  double decay_scale = 500.0;

  double rate(long n) const {
    const double e = std::max((static_cast<double>(n) - 50.0) / decay_scale, 0.0);
    return base * std::pow(1e-4, e);
  }
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<std::vector<double>> m, v;

  void init(const std::vector<std::span<double>>& params) {
    step = 0;
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.emplace_back(p.size(), 0.0);
      v.emplace_back(p.size(), 0.0);
    }
  }
};

/// Standard bias-corrected Adam update over parameter blocks.
inline void adam_step(std::vector<std::span<double>>& params,
                      const std::vector<std::span<const double>>& grads, AdamState& st, double lr) {
  if (params.size() != grads.size() || params.size() != st.m.size())
    throw Error(ErrorCode::DimensionMismatch, "adam state does not match parameter layout");
  st.step += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& p = params[b];
    const auto& g = grads[b];
    auto& m = st.m[b];
    auto& v = st.v[b];
    if (p.size() != g.size()) throw Error(ErrorCode::DimensionMismatch, "gradient block size mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g[i];
      v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + st.eps);
    }
  }
}

}  // namespace deepstop
