#pragma once

#include <span>
#include <vector>

#include "deepstop/linalg.hpp"
#include "deepstop/step_network.hpp"

namespace deepstop {

/// Gathered minibatch for one step's regression. `sigma_dw` rows hold
/// sigma(X_k) dW_k per sample; `target` is the realized reward at the current
/// stopping time; `cached` the frozen sum of later martingale increments.
struct LossBatch {
  Matrix states;                 // B x d
  Matrix augmented;              // B x (d + 1), state plus payoff feature
  Matrix sigma_dw;               // B x d
  std::vector<double> target;    // B
  std::vector<double> cached;    // B

  void resize(std::size_t b, int d) {
    states.resize(b, d);
    augmented.resize(b, d + 1);
    sigma_dw.resize(b, d);
    target.resize(b);
    cached.resize(b);
  }
};

/// Mean squared residual (value - target + grad-martingale terms). The cached
/// later-step increments enter as constants; gradients flow only through the
/// current step's value output and gradient output.
inline double bsde_residuals(std::span<const double> values, const Matrix& grad_out,
                             const Matrix& sigma_dw, std::span<const double> target,
                             std::span<const double> cached, std::span<double> residuals) {
  const std::size_t b = values.size();
  const std::size_t d = sigma_dw.cols;
  double loss = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    double mart = 0.0;
    const double* g = grad_out.data.data() + i * d;
    const double* y = sigma_dw.data.data() + i * d;
    for (std::size_t c = 0; c < d; ++c) mart += g[c] * y[c];
    const double r = values[i] - target[i] + mart + cached[i];
    residuals[i] = r;
    loss += r * r;
  }
  return loss / static_cast<double>(b);
}

/// Reusable buffers for one training step.
struct LossWorkspace {
  MlpTape tape_value, tape_grad;
  MlpGrads grads_value, grads_grad;
  Matrix value_out, grad_out, d_value, d_grad;
  std::vector<double> residuals;
};

/// Forward both subnetworks in training mode, form the martingale-augmented
/// residual, and backpropagate; returns the loss and fills the workspace
/// gradients (zeroed first).
inline double loss_bsde(StepNetwork& net, const LossBatch& batch, LossWorkspace& ws) {
  const std::size_t b = batch.states.rows;
  const std::size_t d = batch.states.cols;
  ws.value_out = net.value.forward(batch.augmented, Mode::Training, &ws.tape_value);
  ws.grad_out = net.gradient.forward(batch.states, Mode::Training, &ws.tape_grad);

  ws.residuals.resize(b);
  const double loss = bsde_residuals({ws.value_out.data.data(), b}, ws.grad_out, batch.sigma_dw,
                                     batch.target, batch.cached, ws.residuals);

  ws.d_value.rows = b;
  ws.d_value.cols = 1;
  ws.d_value.data.resize(b);
  ws.d_grad.rows = b;
  ws.d_grad.cols = d;
  ws.d_grad.data.resize(b * d);
  const double scale = 2.0 / static_cast<double>(b);
  for (std::size_t i = 0; i < b; ++i) {
    const double up = scale * ws.residuals[i];
    ws.d_value.data[i] = up;
    const double* y = batch.sigma_dw.data.data() + i * d;
    double* dg = ws.d_grad.data.data() + i * d;
    for (std::size_t c = 0; c < d; ++c) dg[c] = up * y[c];
  }

  if (ws.grads_value.gw.empty()) ws.grads_value = net.value.make_grads();
  if (ws.grads_grad.gw.empty()) ws.grads_grad = net.gradient.make_grads();
  ws.grads_value.zero();
  ws.grads_grad.zero();
  net.value.backward(ws.tape_value, ws.d_value, ws.grads_value);
  net.gradient.backward(ws.tape_grad, ws.d_grad, ws.grads_grad);
  return loss;
}

}  // namespace deepstop
