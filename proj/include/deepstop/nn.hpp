#pragma once

#include <cmath>
#include <cstring>
#include <vector>

#include "deepstop/errors.hpp"
#include "deepstop/linalg.hpp"
#include "deepstop/rng.hpp"

namespace deepstop {

enum class Mode { Training, Evaluation };

// ---------------------------------------------------------------------------
// Batched kernels. Weights are stored input-major (w[k*out + o]) with a
// transposed copy for the backward pass, so every inner loop runs over a
// contiguous range and vectorizes without reassociation.
// ---------------------------------------------------------------------------

struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<double> w;   // in * out
  std::vector<double> wt;  // out * in, kept in sync with w
  std::vector<double> b;   // out

  DenseLayer() = default;
  DenseLayer(int in_, int out_) : in(in_), out(out_), w(in_ * out_, 0.0), wt(in_ * out_, 0.0), b(out_, 0.0) {}

  void sync_transpose() {
    for (int k = 0; k < in; ++k)
      for (int o = 0; o < out; ++o) wt[o * in + k] = w[k * out + o];
  }
};

inline void affine_forward(const Matrix& x, const DenseLayer& l, Matrix& y) {
  y.rows = x.rows;
  y.cols = static_cast<std::size_t>(l.out);
  y.data.resize(y.rows * y.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double* yi = y.data.data() + i * l.out;
    std::memcpy(yi, l.b.data(), sizeof(double) * l.out);
    const double* xi = x.data.data() + i * l.in;
    for (int k = 0; k < l.in; ++k) {
      const double xv = xi[k];
      const double* wk = l.w.data() + static_cast<std::size_t>(k) * l.out;
      for (int o = 0; o < l.out; ++o) yi[o] += xv * wk[o];
    }
  }
}

// gw += x^T dy, gb += colsum(dy)
inline void affine_grad_params(const Matrix& x, const Matrix& dy, int in, int out,
                               std::vector<double>& gw, std::vector<double>& gb) {
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double* xi = x.data.data() + i * in;
    const double* dyi = dy.data.data() + i * out;
    for (int k = 0; k < in; ++k) {
      const double xv = xi[k];
      double* gk = gw.data() + static_cast<std::size_t>(k) * out;
      for (int o = 0; o < out; ++o) gk[o] += xv * dyi[o];
    }
    for (int o = 0; o < out; ++o) gb[o] += dyi[o];
  }
}

// dx = dy * w^T
inline void affine_grad_input(const Matrix& dy, const DenseLayer& l, Matrix& dx) {
  dx.rows = dy.rows;
  dx.cols = static_cast<std::size_t>(l.in);
  dx.data.assign(dx.rows * dx.cols, 0.0);
  for (std::size_t i = 0; i < dy.rows; ++i) {
    double* dxi = dx.data.data() + i * l.in;
    const double* dyi = dy.data.data() + i * l.out;
    for (int o = 0; o < l.out; ++o) {
      const double dv = dyi[o];
      const double* wo = l.wt.data() + static_cast<std::size_t>(o) * l.in;
      for (int k = 0; k < l.in; ++k) dxi[k] += dv * wo[k];
    }
  }
}

// ---------------------------------------------------------------------------

struct BatchNormLayer {
  int width = 0;
  std::vector<double> gamma, beta, run_mean, run_var;
  double momentum = 0.9;  // retention of the previous running statistic
  double eps = 1e-5;

  BatchNormLayer() = default;
  explicit BatchNormLayer(int w)
      : width(w), gamma(w, 1.0), beta(w, 0.0), run_mean(w, 0.0), run_var(w, 1.0) {}
};

/// Per-layer intermediates recorded by a training-mode forward pass.
struct MlpTape {
  Matrix input;
  std::vector<Matrix> activations;  // post-ReLU output of each hidden layer
  std::vector<Matrix> bn_xhat;      // normalized pre-scale activations
  std::vector<std::vector<double>> bn_inv_std;
  bool recorded = false;
};

struct MlpGrads {
  std::vector<std::vector<double>> gw, gb, ggamma, gbeta;

  void zero() {
    auto clear = [](std::vector<std::vector<double>>& v) {
      for (auto& b : v) std::fill(b.begin(), b.end(), 0.0);
    };
    clear(gw);
    clear(gb);
    clear(ggamma);
    clear(gbeta);
  }
};

/// Feedforward net: dense -> batch-norm -> ReLU per hidden layer, plain dense
/// output head. Inputs enter unnormalized.
struct Mlp {
  int input_dim = 0;
  int output_dim = 0;
  std::vector<int> hidden;
  std::vector<DenseLayer> dense;
  std::vector<BatchNormLayer> norms;

  Mlp() = default;
  Mlp(int in, std::vector<int> hidden_widths, int out)
      : input_dim(in), output_dim(out), hidden(std::move(hidden_widths)) {
    int prev = in;
    for (int h : hidden) {
      dense.emplace_back(prev, h);
      norms.emplace_back(h);
      prev = h;
    }
    dense.emplace_back(prev, out);
  }

  std::size_t affine_parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : dense) n += static_cast<std::size_t>(l.in) * l.out + l.out;
    return n;
  }

  std::size_t parameter_count() const {
    std::size_t n = affine_parameter_count();
    for (const auto& bn : norms) n += 2 * static_cast<std::size_t>(bn.width);
    return n;
  }

  /// Training mode uses batch statistics (and updates the running ones);
  /// evaluation mode uses running statistics and is a pure function.
  Matrix forward(const Matrix& x, Mode mode, MlpTape* tape = nullptr) {
    if (x.cols != static_cast<std::size_t>(input_dim))
      throw Error(ErrorCode::DimensionMismatch, "network input width mismatch");
    if (mode == Mode::Training && x.rows < 2)
      throw Error(ErrorCode::BatchTooSmall, "training-mode forward needs a batch of at least 2");
    if (tape) {
      tape->input = x;
      tape->activations.assign(hidden.size(), Matrix{});
      tape->bn_xhat.assign(hidden.size(), Matrix{});
      tape->bn_inv_std.assign(hidden.size(), {});
      tape->recorded = true;
    }

    Matrix h = x;
    Matrix a;
    for (std::size_t l = 0; l < hidden.size(); ++l) {
      affine_forward(h, dense[l], a);
      BatchNormLayer& bn = norms[l];
      const std::size_t batch = a.rows;
      const int w = bn.width;
      if (mode == Mode::Training) {
        std::vector<double> mean(w, 0.0), var(w, 0.0), inv_std(w);
        for (std::size_t i = 0; i < batch; ++i) {
          const double* ai = a.data.data() + i * w;
          for (int j = 0; j < w; ++j) mean[j] += ai[j];
        }
        for (int j = 0; j < w; ++j) mean[j] /= static_cast<double>(batch);
        for (std::size_t i = 0; i < batch; ++i) {
          const double* ai = a.data.data() + i * w;
          for (int j = 0; j < w; ++j) {
            const double d = ai[j] - mean[j];
            var[j] += d * d;
          }
        }
        for (int j = 0; j < w; ++j) {
          var[j] /= static_cast<double>(batch);
          inv_std[j] = 1.0 / std::sqrt(var[j] + bn.eps);
        }
        const double unbias = static_cast<double>(batch) / std::max<double>(1.0, static_cast<double>(batch) - 1.0);
        for (int j = 0; j < w; ++j) {
          bn.run_mean[j] = bn.momentum * bn.run_mean[j] + (1.0 - bn.momentum) * mean[j];
          bn.run_var[j] = bn.momentum * bn.run_var[j] + (1.0 - bn.momentum) * var[j] * unbias;
        }
        Matrix* xhat = tape ? &tape->bn_xhat[l] : nullptr;
        if (xhat) {
          xhat->rows = batch;
          xhat->cols = w;
          xhat->data.resize(batch * w);
        }
        for (std::size_t i = 0; i < batch; ++i) {
          double* ai = a.data.data() + i * w;
          for (int j = 0; j < w; ++j) {
            const double xh = (ai[j] - mean[j]) * inv_std[j];
            if (xhat) xhat->data[i * w + j] = xh;
            ai[j] = bn.gamma[j] * xh + bn.beta[j];
          }
        }
        if (tape) tape->bn_inv_std[l] = inv_std;
      } else {
        std::vector<double> scale(w), shift(w);
        for (int j = 0; j < w; ++j) {
          const double inv = 1.0 / std::sqrt(bn.run_var[j] + bn.eps);
          scale[j] = bn.gamma[j] * inv;
          shift[j] = bn.beta[j] - bn.run_mean[j] * scale[j];
        }
        for (std::size_t i = 0; i < batch; ++i) {
          double* ai = a.data.data() + i * w;
          for (int j = 0; j < w; ++j) ai[j] = scale[j] * ai[j] + shift[j];
        }
      }
      // ReLU
      for (double& v : a.data) v = v > 0.0 ? v : 0.0;
      if (tape) tape->activations[l] = a;
      h = std::move(a);
      a = Matrix{};
    }
    Matrix out;
    affine_forward(h, dense.back(), out);
    return out;
  }

  Matrix forward_eval(const Matrix& x) const {
    // Evaluation is side-effect free; reuse the main path via a const_cast
    // that never mutates because mode == Evaluation.
    return const_cast<Mlp*>(this)->forward(x, Mode::Evaluation, nullptr);
  }

  MlpGrads make_grads() const {
    MlpGrads g;
    for (const auto& l : dense) {
      g.gw.emplace_back(static_cast<std::size_t>(l.in) * l.out, 0.0);
      g.gb.emplace_back(l.out, 0.0);
    }
    for (const auto& bn : norms) {
      g.ggamma.emplace_back(bn.width, 0.0);
      g.gbeta.emplace_back(bn.width, 0.0);
    }
    return g;
  }

  /// Exact reverse-mode gradients of the recorded training-mode forward,
  /// accumulated into `g` (caller zeroes when desired).
  void backward(const MlpTape& tape, const Matrix& dout, MlpGrads& g) const {
    if (!tape.recorded) throw Error(ErrorCode::NoForwardRecorded, "backward without a recorded forward");
    Matrix dy = dout;
    Matrix dh;
    for (int l = static_cast<int>(dense.size()) - 1; l >= 0; --l) {
      const Matrix& layer_in = (l == 0) ? tape.input : tape.activations[l - 1];
      affine_grad_params(layer_in, dy, dense[l].in, dense[l].out, g.gw[l], g.gb[l]);
      if (l == 0) break;
      affine_grad_input(dy, dense[l], dh);

      // ReLU mask from the recorded post-activation values.
      const Matrix& act = tape.activations[l - 1];
      for (std::size_t idx = 0; idx < dh.data.size(); ++idx)
        if (act.data[idx] <= 0.0) dh.data[idx] = 0.0;

      // Batch-norm backward through the batch statistics.
      const BatchNormLayer& bn = norms[l - 1];
      const Matrix& xhat = tape.bn_xhat[l - 1];
      const std::vector<double>& inv_std = tape.bn_inv_std[l - 1];
      const std::size_t batch = dh.rows;
      const int w = bn.width;
      std::vector<double> sum_dxhat(w, 0.0), sum_dxhat_xhat(w, 0.0);
      for (std::size_t i = 0; i < batch; ++i) {
        const double* di = dh.data.data() + i * w;
        const double* xi = xhat.data.data() + i * w;
        for (int j = 0; j < w; ++j) {
          g.gbeta[l - 1][j] += di[j];
          g.ggamma[l - 1][j] += di[j] * xi[j];
          const double dxh = di[j] * bn.gamma[j];
          sum_dxhat[j] += dxh;
          sum_dxhat_xhat[j] += dxh * xi[j];
        }
      }
      const double inv_b = 1.0 / static_cast<double>(batch);
      dy.rows = batch;
      dy.cols = w;
      dy.data.resize(batch * w);
      for (std::size_t i = 0; i < batch; ++i) {
        const double* di = dh.data.data() + i * w;
        const double* xi = xhat.data.data() + i * w;
        double* oi = dy.data.data() + i * w;
        for (int j = 0; j < w; ++j) {
          const double dxh = di[j] * bn.gamma[j];
          oi[j] = inv_std[j] * (dxh - inv_b * sum_dxhat[j] - xi[j] * inv_b * sum_dxhat_xhat[j]);
        }
      }
    }
  }
};

/// Uniform(-sqrt(6/(fan_in+fan_out))) weights, zero biases, identity norm.
inline void xavier_init(Mlp& net, const NormalField& rng, std::uint64_t net_tag) {
  for (std::size_t l = 0; l < net.dense.size(); ++l) {
    DenseLayer& d = net.dense[l];
    const double bound = std::sqrt(6.0 / (d.in + d.out));
    for (std::size_t idx = 0; idx < d.w.size(); ++idx)
      d.w[idx] = bound * (2.0 * rng.uniform(net_tag, l, idx, 0) - 1.0);
    std::fill(d.b.begin(), d.b.end(), 0.0);
    d.sync_transpose();
  }
  for (auto& bn : net.norms) {
    std::fill(bn.gamma.begin(), bn.gamma.end(), 1.0);
    std::fill(bn.beta.begin(), bn.beta.end(), 0.0);
    std::fill(bn.run_mean.begin(), bn.run_mean.end(), 0.0);
    std::fill(bn.run_var.begin(), bn.run_var.end(), 1.0);
  }
}

}  // namespace deepstop
