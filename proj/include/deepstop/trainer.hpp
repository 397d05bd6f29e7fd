#pragma once

#include <chrono>
#include <numeric>
#include <string>
#include <vector>

#include "deepstop/checkpoint.hpp"
#include "deepstop/config.hpp"
#include "deepstop/loss.hpp"
#include "deepstop/parallel.hpp"
#include "deepstop/simulate.hpp"
#include "deepstop/stopping.hpp"

namespace deepstop {

struct TrainReportRow {
  int k = 0;
  int epoch = 0;
  int step = 0;
  double loss = 0.0;
  double learning_rate = 0.0;
  double wall_ms = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<TrainReportRow> report;
  std::vector<double> final_losses;  // per trained step, k descending from N-1
  double train_seconds = 0.0;
  std::string note;
};

namespace detail {

// sigma(X_k[i]) * dW_k[i] for every path; shared by the loss and the
// stopping update at step k.
inline void sigma_dw_at_step(const ModelSpec& model, const PathEnsemble& paths, int k,
                             Matrix& out, int threads = 1) {
  const int d = model.dim;
  out.rows = paths.count;
  out.cols = d;
  out.data.resize(paths.count * static_cast<std::size_t>(d));
  parallel_chunks(paths.count, threads, kDefaultChunk, [&](std::size_t, std::size_t b, std::size_t e) {
    Matrix sigma;
    for (std::size_t i = b; i < e; ++i) {
      diffusion_at(model, paths.state(k, i), sigma);
      matvec(sigma, paths.increment(k, i), {out.data.data() + i * d, static_cast<std::size_t>(d)});
    }
  });
}

inline std::vector<std::uint32_t> shuffled_indices(std::size_t n, std::uint64_t seed, int k, int epoch) {
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  const NormalField rng(seed, "shuffle");
  for (std::size_t i = n - 1; i > 0; --i) {
    auto j = static_cast<std::size_t>(
        rng.uniform(static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(epoch), i, 0) *
        static_cast<double>(i + 1));
    if (j > i) j = i;
    std::swap(idx[i], idx[j]);
  }
  return idx;
}

/// Evaluation-mode values and gradient outputs for every path at step k.
inline void evaluate_step_all(const StepNetwork& net, const PathEnsemble& paths,
                              const PayoffSpec& payoff, const TimeGrid& grid, int k,
                              std::vector<double>& values, Matrix& grad_out, int threads = 1) {
  const int d = paths.dim;
  const double t = grid.time(k);
  values.resize(paths.count);
  grad_out.rows = paths.count;
  grad_out.cols = d;
  grad_out.data.resize(paths.count * static_cast<std::size_t>(d));
  parallel_chunks(paths.count, threads, kDefaultChunk, [&](std::size_t, std::size_t b, std::size_t e) {
    const std::size_t n = e - b;
    Matrix states(n, d), aug(n, d + 1);
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = paths.state(k, b + i);
      std::copy(x.begin(), x.end(), states.row(i).begin());
      std::copy(x.begin(), x.end(), aug.row(i).begin());
      aug(i, d) = feature(payoff, t, x);
    }
    const Matrix v = net.value.forward_eval(aug);
    const Matrix g = net.gradient.forward_eval(states);
    std::copy(v.data.begin(), v.data.end(), values.begin() + b);
    std::copy(g.data.begin(), g.data.end(), grad_out.data.begin() + b * d);
  });
}

}  // namespace detail

/// Trains the step-k subnetworks against the current regression targets.
/// `init` supplies the starting parameters (Xavier-fresh at the terminal
/// interior step, the trained step k+1 networks otherwise); the optimizer is
/// always fresh. Epochs double at the terminal interior step and each epoch
/// is one shuffled pass over the training set.
inline StepNetwork train_step_k(int k, const PathEnsemble& paths, const StoppingState& stopping,
                                const ModelSpec& model, const PayoffSpec& payoff, const TimeGrid& grid,
                                const TrainPlanConfig& plan, std::uint64_t seed,
                                const StepNetwork& init, std::vector<TrainReportRow>* report) {
  const int d = model.dim;
  const int last_k = grid.steps - 1;
  StepNetwork net = clone_parameters(init);

  const int epochs = (k == last_k) ? 2 * plan.epochs : plan.epochs;
  const LearningRateSchedule schedule = (k == last_k)
                                            ? LearningRateSchedule{plan.lr_base_last, 1000.0}
                                            : LearningRateSchedule{plan.lr_base, 500.0};

  Matrix sigma_dw;
  detail::sigma_dw_at_step(model, paths, k, sigma_dw);
  const double t_k = grid.time(k);
  std::vector<double> features(paths.count);
  for (std::size_t i = 0; i < paths.count; ++i) features[i] = feature(payoff, t_k, paths.state(k, i));

  LossBatch batch;
  LossWorkspace ws;
  const std::size_t b = static_cast<std::size_t>(plan.batch);
  batch.resize(b, d);

  using clock = std::chrono::steady_clock;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto idx = detail::shuffled_indices(paths.count, seed, k, epoch);
    for (int step = 0; step < plan.steps_per_epoch; ++step) {
      const auto t0 = clock::now();
      const std::size_t off = static_cast<std::size_t>(step) * b;
      for (std::size_t i = 0; i < b; ++i) {
        const std::uint32_t p = idx[(off + i) % idx.size()];
        const auto x = paths.state(k, p);
        std::copy(x.begin(), x.end(), batch.states.row(i).begin());
        std::copy(x.begin(), x.end(), batch.augmented.row(i).begin());
        batch.augmented(i, d) = features[p];
        std::copy(sigma_dw.row(p).begin(), sigma_dw.row(p).end(), batch.sigma_dw.row(i).begin());
        batch.target[i] = stopping.reward_at_tau[p];
        batch.cached[i] = stopping.cached_sum[p];
      }
      const double lr = schedule.rate(net.adam.step);
      const double loss = loss_bsde(net, batch, ws);
      net.apply_adam(gradient_blocks(ws.grads_value, ws.grads_grad), lr);
      if (report) {
        const double ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
        report->push_back({k, epoch, step, loss, lr, ms});
      }
    }
  }
  return net;
}

/// Applies the stopping rule at step k with the trained (frozen) networks:
/// stop where the immediate reward dominates the estimated continuation
/// value, otherwise freeze this step's martingale increment into the cache.
inline void update_stopping(int k, const StepNetwork& net, const PathEnsemble& paths,
                            const ModelSpec& model, const PayoffSpec& payoff, const TimeGrid& grid,
                            StoppingState& stopping, int threads = 1) {
  std::vector<double> values;
  Matrix grad_out;
  detail::evaluate_step_all(net, paths, payoff, grid, k, values, grad_out, threads);
  Matrix sigma_dw;
  detail::sigma_dw_at_step(model, paths, k, sigma_dw, threads);

  const int d = paths.dim;
  const double t_k = grid.time(k);
  parallel_chunks(paths.count, threads, kDefaultChunk, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const double g_now = reward(payoff, t_k, paths.state(k, i));
      if (g_now >= values[i]) {
        stopping.tau[i] = k;
        stopping.reward_at_tau[i] = g_now;
        stopping.cached_sum[i] = 0.0;
        if (stopping.track_increments)
          for (int j = k; j < stopping.steps; ++j) stopping.increments(i, j) = 0.0;
      } else {
        double dm = 0.0;
        const double* gr = grad_out.data.data() + i * d;
        const double* y = sigma_dw.data.data() + i * d;
        for (int c = 0; c < d; ++c) dm += gr[c] * y[c];
        stopping.cached_sum[i] += dm;
        if (stopping.track_increments) stopping.increments(i, k) = dm;
      }
    }
  });
}

namespace detail {

inline CheckpointMeta make_meta(const ExperimentConfig& cfg) {
  CheckpointMeta meta;
  meta.config_hash = config_hash(cfg);
  meta.seed = cfg.seed;
  meta.grid = cfg.grid;
  meta.state_dim = cfg.model.dim;
  meta.hidden = cfg.hidden;
  meta.model_kind = cfg.model.kind == ModelKind::Heston ? "heston" : "black-scholes";
  meta.payoff_kind = to_string(cfg.payoff.kind);
  return meta;
}

}  // namespace detail

/// Full backward induction: simulate the training set once, walk k from N-1
/// down to 1 training and updating the stopping state, and collect the
/// trained networks plus a per-update training report.
inline TrainResult train_all(const ExperimentConfig& cfg, bool track_increments = false) {
  const auto t_start = std::chrono::steady_clock::now();
  TrainResult result;
  result.checkpoint.meta = detail::make_meta(cfg);
  if (cfg.grid.steps < 2) {
    result.note = "no trainable steps";
    return result;
  }

  const std::size_t train_paths =
      static_cast<std::size_t>(cfg.train.batch) * static_cast<std::size_t>(cfg.train.steps_per_epoch);
  const PathEnsemble paths =
      simulate(cfg.model, cfg.grid, train_paths, {cfg.seed, "train"}, false, 0, cfg.threads);
  StoppingState stopping = StoppingState::terminal(paths, cfg.payoff, cfg.grid, track_increments);

  NetworkConfig net_cfg{cfg.model.dim, cfg.hidden};
  StepNetwork prev(net_cfg);
  xavier_init(prev, cfg.seed, static_cast<std::uint64_t>(cfg.grid.steps - 1));
  for (int k = cfg.grid.steps - 1; k >= 1; --k) {
    StepNetwork trained = train_step_k(k, paths, stopping, cfg.model, cfg.payoff, cfg.grid, cfg.train,
                                       cfg.seed, prev, &result.report);
    update_stopping(k, trained, paths, cfg.model, cfg.payoff, cfg.grid, stopping, cfg.threads);
    result.final_losses.push_back(result.report.back().loss);
    prev = trained;
    result.checkpoint.nets.emplace(k, std::move(trained));
  }
  result.train_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

/// Value-iteration baseline: identical machinery, but step k regresses on the
/// one-step value max(g(t_{k+1}, x), C_{k+1}(x)) instead of the realized
/// reward along the stopping time. Checkpoint schema matches train_all's.
inline TrainResult train_value_iteration_baseline(const ExperimentConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();
  TrainResult result;
  result.checkpoint.meta = detail::make_meta(cfg);
  if (cfg.grid.steps < 2) {
    result.note = "no trainable steps";
    return result;
  }

  const std::size_t train_paths =
      static_cast<std::size_t>(cfg.train.batch) * static_cast<std::size_t>(cfg.train.steps_per_epoch);
  const PathEnsemble paths =
      simulate(cfg.model, cfg.grid, train_paths, {cfg.seed, "train"}, false, 0, cfg.threads);
  // Regression targets ride in a StoppingState with zero cached increments;
  // at the terminal interior step they coincide with the primal targets.
  StoppingState targets = StoppingState::terminal(paths, cfg.payoff, cfg.grid, false);

  NetworkConfig net_cfg{cfg.model.dim, cfg.hidden};
  StepNetwork prev(net_cfg);
  xavier_init(prev, cfg.seed, static_cast<std::uint64_t>(cfg.grid.steps - 1));
  for (int k = cfg.grid.steps - 1; k >= 1; --k) {
    if (k < cfg.grid.steps - 1) {
      std::vector<double> values;
      Matrix grad_out;
      detail::evaluate_step_all(prev, paths, cfg.payoff, cfg.grid, k + 1, values, grad_out, cfg.threads);
      const double t_next = cfg.grid.time(k + 1);
      for (std::size_t i = 0; i < paths.count; ++i) {
        const double g_next = reward(cfg.payoff, t_next, paths.state(k + 1, i));
        targets.reward_at_tau[i] = std::max(g_next, values[i]);
      }
    }
    StepNetwork trained = train_step_k(k, paths, targets, cfg.model, cfg.payoff, cfg.grid, cfg.train,
                                       cfg.seed, prev, &result.report);
    result.final_losses.push_back(result.report.back().loss);
    prev = trained;
    result.checkpoint.nets.emplace(k, std::move(trained));
  }
  result.train_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

}  // namespace deepstop
