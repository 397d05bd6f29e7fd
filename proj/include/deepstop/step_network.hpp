#pragma once

#include <span>
#include <vector>

#include "deepstop/adam.hpp"
#include "deepstop/nn.hpp"

namespace deepstop {

/// Hidden widths shared by both subnetworks of a time step.
struct NetworkConfig {
  int state_dim = 1;
  std::vector<int> hidden = {32, 32};
};

/// One time step's pair of subnetworks: the value head consumes the state
/// augmented with the payoff feature and emits a scalar continuation value;
/// the gradient head consumes the state alone and emits its spatial gradient.
struct StepNetwork {
  Mlp value;     // (d + 1) -> 1
  Mlp gradient;  // d -> d
  AdamState adam;

  StepNetwork() = default;
  explicit StepNetwork(const NetworkConfig& cfg)
      : value(cfg.state_dim + 1, cfg.hidden, 1), gradient(cfg.state_dim, cfg.hidden, cfg.state_dim) {
    reset_adam();
  }

  int state_dim() const { return gradient.input_dim; }

  std::vector<std::span<double>> parameter_blocks() {
    std::vector<std::span<double>> blocks;
    auto add = [&blocks](Mlp& net) {
      for (auto& l : net.dense) {
        blocks.emplace_back(l.w);
        blocks.emplace_back(l.b);
      }
      for (auto& bn : net.norms) {
        blocks.emplace_back(bn.gamma);
        blocks.emplace_back(bn.beta);
      }
    };
    add(value);
    add(gradient);
    return blocks;
  }

  void reset_adam() {
    auto blocks = parameter_blocks();
    adam.init(blocks);
  }

  void apply_adam(const std::vector<std::span<const double>>& grads, double lr) {
    auto blocks = parameter_blocks();
    adam_step(blocks, grads, adam, lr);
    for (auto& l : value.dense) l.sync_transpose();
    for (auto& l : gradient.dense) l.sync_transpose();
  }
};

inline std::vector<std::span<const double>> gradient_blocks(const MlpGrads& gv, const MlpGrads& gg) {
  std::vector<std::span<const double>> blocks;
  auto add = [&blocks](const MlpGrads& g) {
    for (std::size_t l = 0; l < g.gw.size(); ++l) {
      blocks.emplace_back(g.gw[l]);
      blocks.emplace_back(g.gb[l]);
    }
    for (std::size_t l = 0; l < g.ggamma.size(); ++l) {
      blocks.emplace_back(g.ggamma[l]);
      blocks.emplace_back(g.gbeta[l]);
    }
  };
  add(gv);
  add(gg);
  return blocks;
}

inline void xavier_init(StepNetwork& net, std::uint64_t seed, std::uint64_t step_tag) {
  const NormalField rng(seed, "init");
  xavier_init(net.value, rng, step_tag * 2);
  xavier_init(net.gradient, rng, step_tag * 2 + 1);
  net.reset_adam();
}

/// Deep copy of weights and running statistics with a fresh optimizer.
inline StepNetwork clone_parameters(const StepNetwork& src) {
  StepNetwork c;
  c.value = src.value;
  c.gradient = src.gradient;
  c.reset_adam();
  return c;
}

/// Evaluates both heads: values from (state, feature), gradients from state.
inline void forward_both_eval(const StepNetwork& net, const Matrix& states,
                              std::span<const double> features, std::vector<double>& values,
                              Matrix& gradients) {
  Matrix augmented(states.rows, states.cols + 1);
  for (std::size_t i = 0; i < states.rows; ++i) {
    double* dst = augmented.data.data() + i * augmented.cols;
    const double* src = states.data.data() + i * states.cols;
    std::copy(src, src + states.cols, dst);
    dst[states.cols] = features[i];
  }
  Matrix v = net.value.forward_eval(augmented);
  values.assign(v.data.begin(), v.data.end());
  gradients = net.gradient.forward_eval(states);
}

}  // namespace deepstop
