#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "deepstop/checkpoint.hpp"
#include "deepstop/config.hpp"
#include "deepstop/simulate.hpp"
#include "deepstop/trainer.hpp"

namespace deepstop {

enum class BoundKind { Lower, Upper };

inline const char* to_string(BoundKind k) { return k == BoundKind::Lower ? "lower" : "upper"; }

struct BoundEstimate {
  double value = 0.0;
  double stddev = 0.0;
  double halfwidth = 0.0;  // 1.96 * stddev / sqrt(count)
  std::size_t count = 0;
  BoundKind kind = BoundKind::Lower;
};

inline BoundEstimate make_estimate(std::span<const double> per_path, BoundKind kind) {
  const MeanStd ms = mean_std(per_path);
  BoundEstimate e;
  e.value = ms.mean;
  e.stddev = ms.stddev;
  e.count = ms.count;
  e.halfwidth = ms.count ? 1.96 * ms.stddev / std::sqrt(static_cast<double>(ms.count)) : 0.0;
  e.kind = kind;
  return e;
}

/// Cumulative martingale values along one path, M[0] = 0.
struct MartingalePath {
  std::vector<double> values;  // N + 1 entries

  static MartingalePath from_increments(double first, std::span<const double> later) {
    MartingalePath m;
    m.values.resize(later.size() + 2);
    m.values[0] = 0.0;
    m.values[1] = first;
    for (std::size_t j = 0; j < later.size(); ++j) m.values[j + 2] = m.values[j + 1] + later[j];
    return m;
  }
};

namespace detail {

inline void check_compatible(const Checkpoint& ckpt, const ExperimentConfig& cfg) {
  const auto& g = ckpt.meta.grid;
  if (g.steps != cfg.grid.steps || g.horizon != cfg.grid.horizon)
    throw Error(ErrorCode::CheckpointGridMismatch, "checkpoint grid differs from the config grid");
  if (ckpt.meta.state_dim != cfg.model.dim)
    throw Error(ErrorCode::CheckpointGridMismatch, "checkpoint state dimension differs from the model");
  if (ckpt.meta.payoff_kind != to_string(cfg.payoff.kind))
    throw Error(ErrorCode::CheckpointGridMismatch, "checkpoint payoff differs from the config payoff");
  if (cfg.grid.steps > 1 && ckpt.nets.empty())
    throw Error(ErrorCode::CheckpointGridMismatch, "checkpoint holds no trained networks");
}

// Value-head evaluation for a gathered subset of block paths at step k.
inline void eval_values_subset(const StepNetwork& net, const PathEnsemble& block,
                               const PayoffSpec& payoff, const TimeGrid& grid, int k,
                               std::span<const std::uint32_t> subset, std::vector<double>& out) {
  const int d = block.dim;
  const double t = grid.time(k);
  Matrix aug(subset.size(), d + 1);
  for (std::size_t i = 0; i < subset.size(); ++i) {
    const auto x = block.state(k, subset[i]);
    std::copy(x.begin(), x.end(), aug.row(i).begin());
    aug(i, d) = feature(payoff, t, x);
  }
  const Matrix v = net.value.forward_eval(aug);
  out.assign(v.data.begin(), v.data.end());
}

}  // namespace detail

struct LowerBoundResult {
  BoundEstimate estimate;
  std::vector<double> rewards;  // realized reward per evaluation path
  double mean_stop_index = 0.0;
  double early_stop_fraction = 0.0;  // stopped before the terminal date
  double immediate_reward = 0.0;     // g(0, x0)
};

/// Suboptimal-rule Monte Carlo on fresh paths (stream "lower"): each path
/// stops at the earliest interior step where the immediate reward reaches the
/// estimated continuation value, else at maturity. The reported estimate is
/// max(g(0, x0), sample mean); g(0, x0) never binds on the shipped presets.
inline LowerBoundResult lower_bound(const Checkpoint& ckpt, const ExperimentConfig& cfg,
                                    std::size_t n_paths, std::uint64_t seed_override = 0) {
  detail::check_compatible(ckpt, cfg);
  const std::uint64_t seed = seed_override ? seed_override : cfg.seed;
  const TimeGrid& grid = cfg.grid;
  const int n = grid.steps;

  LowerBoundResult res;
  res.rewards.resize(n_paths);
  std::vector<double> stop_index(n_paths);

  const std::size_t block_size = std::min<std::size_t>(n_paths, 16384);
  for (std::size_t base = 0; base < n_paths; base += block_size) {
    const std::size_t m = std::min(block_size, n_paths - base);
    TimeGrid coarse_grid = grid;
    coarse_grid.substeps = 1;
    const PathEnsemble block =
        simulate(cfg.model, coarse_grid, m, {seed, "lower"}, false, base, cfg.threads);

    std::vector<std::uint32_t> alive(m);
    std::iota(alive.begin(), alive.end(), 0u);
    std::vector<double> values;
    for (int k = 1; k < n && !alive.empty(); ++k) {
      const StepNetwork& net = ckpt.at(k);
      detail::eval_values_subset(net, block, cfg.payoff, grid, k, alive, values);
      const double t_k = grid.time(k);
      std::vector<std::uint32_t> still;
      still.reserve(alive.size());
      for (std::size_t i = 0; i < alive.size(); ++i) {
        const std::uint32_t p = alive[i];
        const double g_now = reward(cfg.payoff, t_k, block.state(k, p));
        if (g_now >= values[i]) {
          res.rewards[base + p] = g_now;
          stop_index[base + p] = k;
        } else {
          still.push_back(p);
        }
      }
      alive.swap(still);
    }
    const double t_end = grid.time(n);
    for (std::uint32_t p : alive) {
      res.rewards[base + p] = reward(cfg.payoff, t_end, block.state(n, p));
      stop_index[base + p] = n;
    }
  }

  res.estimate = make_estimate(res.rewards, BoundKind::Lower);
  res.immediate_reward = reward(cfg.payoff, 0.0, cfg.model.x0);
  res.estimate.value = std::max(res.estimate.value, res.immediate_reward);
  res.mean_stop_index = pairwise_sum(stop_index) / static_cast<double>(n_paths);
  std::size_t early = 0;
  for (double s : stop_index)
    if (s < n) ++early;
  res.early_stop_fraction = static_cast<double>(early) / static_cast<double>(n_paths);
  return res;
}

/// Martingale increment M_{k+1} - M_k per path: the step-k gradient network
/// integrated against the Brownian increments over the fine subgrid.
inline std::vector<double> doob_increments_fine(const Checkpoint& ckpt, const ModelSpec& model,
                                                const TimeGrid& grid, const PathEnsemble& paths,
                                                int k) {
  if (!paths.has_fine) throw Error(ErrorCode::MissingFineGrid, "ensemble carries no fine subgrid");
  if (k < 1 || k >= grid.steps)
    throw Error(ErrorCode::CheckpointGridMismatch, "doob increment index outside 1..N-1");
  const StepNetwork& net = ckpt.at(k);
  const int d = paths.dim;
  const int j_max = paths.substeps;
  std::vector<double> inc(paths.count, 0.0);
  Matrix states(paths.count, d);
  Matrix sigma;
  std::vector<double> y(d);
  for (int j = 0; j < j_max; ++j) {
    for (std::size_t i = 0; i < paths.count; ++i) {
      const auto x = paths.fine_state(k, j, i);
      std::copy(x.begin(), x.end(), states.row(i).begin());
    }
    const Matrix g = net.gradient.forward_eval(states);
    for (std::size_t i = 0; i < paths.count; ++i) {
      diffusion_at(model, paths.fine_state(k, j, i), sigma);
      matvec(sigma, paths.fine_increment(k, j, i), y);
      double s = 0.0;
      const double* gi = g.data.data() + i * d;
      for (int c = 0; c < d; ++c) s += gi[c] * y[c];
      inc[i] += s;
    }
  }
  return inc;
}

/// First martingale increment M_1 - M_0: the one-step value estimate at t_1,
/// centered to exact zero sample mean.
inline std::vector<double> first_increment(const Checkpoint& ckpt, const ExperimentConfig& cfg,
                                           const PathEnsemble& paths) {
  if (paths.count < 2) throw Error(ErrorCode::ValidationError, "first increment needs >= 2 samples");
  const int n = cfg.grid.steps;
  const double t1 = cfg.grid.time(1);
  std::vector<double> v(paths.count);
  if (n == 1) {
    // Terminal date: the one-step value is the reward itself.
    for (std::size_t i = 0; i < paths.count; ++i) v[i] = reward(cfg.payoff, t1, paths.state(1, i));
  } else {
    std::vector<std::uint32_t> all(paths.count);
    std::iota(all.begin(), all.end(), 0u);
    std::vector<double> cont;
    detail::eval_values_subset(ckpt.at(1), paths, cfg.payoff, cfg.grid, 1, all, cont);
    for (std::size_t i = 0; i < paths.count; ++i) {
      const double g1 = reward(cfg.payoff, t1, paths.state(1, i));
      v[i] = std::max(g1, cont[i]);
    }
  }
  const double mean = pairwise_sum(v) / static_cast<double>(v.size());
  for (double& x : v) x -= mean;
  return v;
}

struct UpperBoundResult {
  BoundEstimate estimate;
  std::vector<double> maxima;  // per-path pathwise dual value
};

/// Dual upper bound (stream "upper"): fresh fine-grid paths, per-path Doob
/// martingale assembled from the first increment and the gradient-network
/// increments, estimate = mean of max_k (g(t_k, X_k) - M_k).
inline UpperBoundResult upper_bound_full(const Checkpoint& ckpt, const ExperimentConfig& cfg,
                                         std::size_t n_paths, int fine_level,
                                         std::uint64_t seed_override = 0) {
  detail::check_compatible(ckpt, cfg);
  if (fine_level < 1) throw Error(ErrorCode::MissingFineGrid, "fine level must be >= 1");
  const std::uint64_t seed = seed_override ? seed_override : cfg.seed;
  TimeGrid grid = cfg.grid;
  grid.substeps = fine_level;
  const int n = grid.steps;

  std::vector<double> maxima(n_paths);
  std::vector<double> m1_raw(n_paths);
  // n_paths x (N-1) later increments and n_paths x (N+1) rewards.
  Matrix later(n_paths, static_cast<std::size_t>(std::max(0, n - 1)));
  Matrix payoffs(n_paths, static_cast<std::size_t>(n) + 1);

  const std::size_t block_size = std::min<std::size_t>(n_paths, 8192);
  for (std::size_t base = 0; base < n_paths; base += block_size) {
    const std::size_t m = std::min(block_size, n_paths - base);
    const PathEnsemble block = simulate(cfg.model, grid, m, {seed, "upper"}, true, base, cfg.threads);
    for (int k = 0; k <= n; ++k) {
      const double t_k = grid.time(k);
      for (std::size_t i = 0; i < m; ++i)
        payoffs(base + i, k) = reward(cfg.payoff, t_k, block.state(k, i));
    }
    for (int k = 1; k < n; ++k) {
      const auto inc = doob_increments_fine(ckpt, cfg.model, grid, block, k);
      for (std::size_t i = 0; i < m; ++i) later(base + i, k - 1) = inc[i];
    }
    const double t1 = grid.time(1);
    if (n == 1) {
      for (std::size_t i = 0; i < m; ++i) m1_raw[base + i] = reward(cfg.payoff, t1, block.state(1, i));
    } else {
      std::vector<std::uint32_t> all(m);
      std::iota(all.begin(), all.end(), 0u);
      std::vector<double> cont;
      detail::eval_values_subset(ckpt.at(1), block, cfg.payoff, grid, 1, all, cont);
      for (std::size_t i = 0; i < m; ++i) {
        const double g1 = reward(cfg.payoff, t1, block.state(1, i));
        m1_raw[base + i] = std::max(g1, cont[i]);
      }
    }
  }

  const double mean_m1 = pairwise_sum(m1_raw) / static_cast<double>(n_paths);
  for (std::size_t i = 0; i < n_paths; ++i) {
    const double first = m1_raw[i] - mean_m1;
    double mk = first;
    double best = payoffs(i, 0);  // k = 0, M_0 = 0
    best = std::max(best, payoffs(i, 1) - mk);
    for (int k = 2; k <= n; ++k) {
      mk += later(i, k - 2);
      best = std::max(best, payoffs(i, k) - mk);
    }
    maxima[i] = best;
  }
  UpperBoundResult res;
  res.estimate = make_estimate(maxima, BoundKind::Upper);
  res.maxima = std::move(maxima);
  return res;
}

inline BoundEstimate upper_bound(const Checkpoint& ckpt, const ExperimentConfig& cfg,
                                 std::size_t n_paths, int fine_level,
                                 std::uint64_t seed_override = 0) {
  return upper_bound_full(ckpt, cfg, n_paths, fine_level, seed_override).estimate;
}

/// Refinement study: one fine path set at the coarsest common refinement,
/// re-quadratured at each requested level (common random numbers across
/// levels). Levels must divide max(levels).
inline std::vector<BoundEstimate> upper_bound_levels(const Checkpoint& ckpt, const ExperimentConfig& cfg,
                                                     std::size_t n_paths, std::vector<int> levels,
                                                     std::uint64_t seed_override = 0) {
  detail::check_compatible(ckpt, cfg);
  const int j_hi = *std::max_element(levels.begin(), levels.end());
  for (int l : levels)
    if (l < 1 || j_hi % l != 0)
      throw Error(ErrorCode::MissingFineGrid, "levels must divide the finest level");
  const std::uint64_t seed = seed_override ? seed_override : cfg.seed;
  TimeGrid grid = cfg.grid;
  grid.substeps = j_hi;
  const int n = grid.steps;

  std::vector<std::vector<double>> maxima(levels.size(), std::vector<double>(n_paths));
  std::vector<double> m1_raw(n_paths);
  std::vector<Matrix> later(levels.size());
  for (auto& m : later) m.resize(n_paths, static_cast<std::size_t>(std::max(0, n - 1)));
  Matrix payoffs(n_paths, static_cast<std::size_t>(n) + 1);

  const std::size_t block_size = std::min<std::size_t>(n_paths, 4096);
  const int d = cfg.model.dim;
  for (std::size_t base = 0; base < n_paths; base += block_size) {
    const std::size_t m = std::min(block_size, n_paths - base);
    const PathEnsemble block = simulate(cfg.model, grid, m, {seed, "upper"}, true, base, cfg.threads);
    for (int k = 0; k <= n; ++k) {
      const double t_k = grid.time(k);
      for (std::size_t i = 0; i < m; ++i)
        payoffs(base + i, k) = reward(cfg.payoff, t_k, block.state(k, i));
    }
    Matrix states(m, d), sigma;
    std::vector<double> y(d), group_dw(d);
    for (int k = 1; k < n; ++k) {
      const StepNetwork& net = ckpt.at(k);
      // Gradient head at every fine node once; levels reuse the subset they need.
      std::vector<Matrix> g_at(j_hi);
      for (int j = 0; j < j_hi; ++j) {
        for (std::size_t i = 0; i < m; ++i) {
          const auto x = block.fine_state(k, j, i);
          std::copy(x.begin(), x.end(), states.row(i).begin());
        }
        g_at[j] = net.gradient.forward_eval(states);
      }
      for (std::size_t lv = 0; lv < levels.size(); ++lv) {
        const int step = j_hi / levels[lv];
        for (std::size_t i = 0; i < m; ++i) {
          double sum = 0.0;
          for (int j0 = 0; j0 < j_hi; j0 += step) {
            std::fill(group_dw.begin(), group_dw.end(), 0.0);
            for (int j = j0; j < j0 + step; ++j) {
              const auto dw = block.fine_increment(k, j, i);
              for (int c = 0; c < d; ++c) group_dw[c] += dw[c];
            }
            diffusion_at(cfg.model, block.fine_state(k, j0, i), sigma);
            matvec(sigma, group_dw, y);
            const double* gi = g_at[j0].data.data() + i * d;
            for (int c = 0; c < d; ++c) sum += gi[c] * y[c];
          }
          later[lv](base + i, k - 1) = sum;
        }
      }
    }
    const double t1 = grid.time(1);
    if (n == 1) {
      for (std::size_t i = 0; i < m; ++i) m1_raw[base + i] = reward(cfg.payoff, t1, block.state(1, i));
    } else {
      std::vector<std::uint32_t> all(m);
      std::iota(all.begin(), all.end(), 0u);
      std::vector<double> cont;
      detail::eval_values_subset(ckpt.at(1), block, cfg.payoff, grid, 1, all, cont);
      for (std::size_t i = 0; i < m; ++i) {
        const double g1 = reward(cfg.payoff, t1, block.state(1, i));
        m1_raw[base + i] = std::max(g1, cont[i]);
      }
    }
  }

  const double mean_m1 = pairwise_sum(m1_raw) / static_cast<double>(n_paths);
  std::vector<BoundEstimate> out;
  for (std::size_t lv = 0; lv < levels.size(); ++lv) {
    for (std::size_t i = 0; i < n_paths; ++i) {
      double mk = m1_raw[i] - mean_m1;
      double best = std::max(payoffs(i, 0), payoffs(i, 1) - mk);
      for (int k = 2; k <= n; ++k) {
        mk += later[lv](i, k - 2);
        best = std::max(best, payoffs(i, k) - mk);
      }
      maxima[lv][i] = best;
    }
    out.push_back(make_estimate(maxima[lv], BoundKind::Upper));
  }
  return out;
}

struct DeltaResult {
  std::vector<double> basket_level;  // geometric mean per sample
  std::vector<double> delta;         // projected hedging ratio per sample
  std::vector<bool> stopped;         // stopping region flag per sample
};

/// Projected delta for the geometric-basket payoff: gradient network
/// projected onto the basket level in the continuation region, the payoff
/// slope in the stopping region.
inline DeltaResult project_delta(const Checkpoint& ckpt, const ExperimentConfig& cfg, int k,
                                 const Matrix& states) {
  if (cfg.payoff.kind != PayoffKind::GeometricBasketCall)
    throw Error(ErrorCode::WrongPayoffKind, "delta projection is defined for the geometric basket");
  const StepNetwork& net = ckpt.at(k);
  const int d = cfg.model.dim;
  const double t_k = cfg.grid.time(k);
  const double disc = std::exp(-cfg.payoff.rate * t_k);

  Matrix aug(states.rows, d + 1);
  for (std::size_t i = 0; i < states.rows; ++i) {
    const auto x = states.row(i);
    std::copy(x.begin(), x.end(), aug.row(i).begin());
    aug(i, d) = feature(cfg.payoff, t_k, x);
  }
  const Matrix values = net.value.forward_eval(aug);
  const Matrix grads = net.gradient.forward_eval(states);

  DeltaResult res;
  res.basket_level.resize(states.rows);
  res.delta.resize(states.rows);
  res.stopped.resize(states.rows);
  for (std::size_t i = 0; i < states.rows; ++i) {
    const auto x = states.row(i);
    double log_sum = 0.0;
    for (double v : x) log_sum += std::log(v);
    const double level = std::exp(log_sum / d);
    res.basket_level[i] = level;
    const double g_now = reward(cfg.payoff, t_k, x);
    const bool stop = g_now >= values(i, 0);
    res.stopped[i] = stop;
    if (stop) {
      res.delta[i] = level > cfg.payoff.strike ? disc : 0.0;
    } else {
      double proj = 0.0;
      for (int c = 0; c < d; ++c) proj += grads(i, c) * x[c];
      res.delta[i] = proj / level;
    }
  }
  return res;
}

}  // namespace deepstop
