#include <catch2/catch.hpp>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "deepstop/bounds.hpp"
#include "deepstop/loss.hpp"
#include "deepstop/trainer.hpp"

using namespace deepstop;

namespace {

ExperimentConfig tiny_call_config() {
  ExperimentConfig c;
  c.model = ModelSpec::black_scholes(1, 0.0, 0.02, 0.25, 0.0, 100.0);
  c.payoff = PayoffSpec(PayoffKind::GeometricBasketCall, 100.0, 0.0);
  c.grid = TimeGrid(1.0, 5, 1);
  c.hidden = {8, 8};
  c.train.batch = 64;
  c.train.steps_per_epoch = 8;
  c.train.epochs = 1;
  c.seed = 42;
  return c;
}

// Constant-output step network: zero weights with chosen output biases.
StepNetwork constant_net(int dim, const std::vector<int>& hidden, double value_out,
                         const std::vector<double>& grad_out) {
  NetworkConfig cfg{dim, hidden};
  StepNetwork net(cfg);
  net.value.dense.back().b[0] = value_out;
  for (int c = 0; c < dim; ++c) net.gradient.dense.back().b[c] = grad_out[c];
  for (auto& l : net.value.dense) l.sync_transpose();
  for (auto& l : net.gradient.dense) l.sync_transpose();
  return net;
}

}  // namespace

TEST_CASE("terminal step trains twice the epochs under its own schedule") {
  const ExperimentConfig cfg = tiny_call_config();
  const TrainResult tr = train_all(cfg);
  const int n = cfg.grid.steps;
  REQUIRE(static_cast<int>(tr.checkpoint.nets.size()) == n - 1);
  REQUIRE(static_cast<int>(tr.final_losses.size()) == n - 1);

  long rows_last = 0, rows_inner = 0;
  for (const auto& r : tr.report) {
    if (r.k == n - 1) {
      ++rows_last;
      const LearningRateSchedule a{cfg.train.lr_base_last, 1000.0};
      REQUIRE(r.learning_rate == a.rate(r.epoch * cfg.train.steps_per_epoch + r.step));
    } else {
      ++rows_inner;
      const LearningRateSchedule b{cfg.train.lr_base, 500.0};
      REQUIRE(r.learning_rate == b.rate(r.epoch * cfg.train.steps_per_epoch + r.step));
    }
    REQUIRE(std::isfinite(r.loss));
  }
  REQUIRE(rows_last == 2L * cfg.train.epochs * cfg.train.steps_per_epoch);
  REQUIRE(rows_inner == static_cast<long>(n - 2) * cfg.train.epochs * cfg.train.steps_per_epoch);
}

TEST_CASE("training is deterministic") {
  const ExperimentConfig cfg = tiny_call_config();
  const TrainResult a = train_all(cfg);
  const TrainResult b = train_all(cfg);
  namespace fs = std::filesystem;
  fs::create_directories(DEEPSTOP_TEST_TMP);
  const std::string pa = std::string(DEEPSTOP_TEST_TMP) + "/ckpt_a.bin";
  const std::string pb = std::string(DEEPSTOP_TEST_TMP) + "/ckpt_b.bin";
  save_checkpoint(a.checkpoint, pa);
  save_checkpoint(b.checkpoint, pb);
  std::ifstream fa(pa, std::ios::binary), fb(pb, std::ios::binary);
  const std::string ba((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  const std::string bb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  REQUIRE(ba == bb);
  REQUIRE(a.final_losses == b.final_losses);
}

TEST_CASE("single-step grid has nothing to train") {
  ExperimentConfig cfg = tiny_call_config();
  cfg.grid = TimeGrid(1.0, 1, 1);
  const TrainResult tr = train_all(cfg);
  REQUIRE(tr.checkpoint.nets.empty());
  REQUIRE(tr.note == "no trainable steps");
}

TEST_CASE("stopping update follows the comparison rule") {
  const ExperimentConfig cfg = tiny_call_config();
  const PathEnsemble paths = simulate(cfg.model, cfg.grid, 512, {cfg.seed, "train"});
  const int k = 3;
  const double t_k = cfg.grid.time(k);

  SECTION("zero continuation estimate stops everything, ties included") {
    StoppingState st = StoppingState::terminal(paths, cfg.payoff, cfg.grid, true);
    const StepNetwork net = constant_net(1, cfg.hidden, 0.0, {0.5});
    update_stopping(k, net, paths, cfg.model, cfg.payoff, cfg.grid, st);
    for (std::size_t i = 0; i < paths.count; ++i) {
      REQUIRE(st.tau[i] == k);  // g >= 0 == C everywhere
      REQUIRE(st.reward_at_tau[i] == reward(cfg.payoff, t_k, paths.state(k, i)));
      REQUIRE(st.cached_sum[i] == 0.0);
      for (int j = k; j < st.steps; ++j) REQUIRE(st.increments(i, j) == 0.0);
    }
  }

  SECTION("huge continuation leaves stopping untouched and caches increments") {
    StoppingState st = StoppingState::terminal(paths, cfg.payoff, cfg.grid, true);
    const std::vector<int> tau_before = st.tau;
    const StepNetwork net = constant_net(1, cfg.hidden, 1e9, {0.5});
    update_stopping(k, net, paths, cfg.model, cfg.payoff, cfg.grid, st);
    for (std::size_t i = 0; i < paths.count; ++i) {
      REQUIRE(st.tau[i] == tau_before[i]);
      const double sigma_dw = 0.25 * paths.state(k, i)[0] * paths.increment(k, i)[0];
      REQUIRE(st.increments(i, k) == Approx(0.5 * sigma_dw).margin(1e-15));
      REQUIRE(st.cached_sum[i] == st.increments(i, k));
    }
  }
}

TEST_CASE("stopping indices never increase over the backward sweep") {
  ExperimentConfig cfg = tiny_call_config();
  cfg.grid = TimeGrid(1.0, 8, 1);
  const PathEnsemble paths = simulate(cfg.model, cfg.grid, 256, {7, "train"});
  StoppingState st = StoppingState::terminal(paths, cfg.payoff, cfg.grid);
  std::vector<int> prev_tau = st.tau;
  for (int k = cfg.grid.steps - 1; k >= 1; --k) {
    NetworkConfig ncfg{1, cfg.hidden};
    StepNetwork net(ncfg);
    xavier_init(net, 10 + k, k);
    update_stopping(k, net, paths, cfg.model, cfg.payoff, cfg.grid, st);
    for (std::size_t i = 0; i < paths.count; ++i) {
      REQUIRE(st.tau[i] <= prev_tau[i]);
      REQUIRE(st.tau[i] >= k);
      REQUIRE(st.reward_at_tau[i] ==
              reward(cfg.payoff, cfg.grid.time(st.tau[i]), paths.state(st.tau[i], i)));
    }
    prev_tau = st.tau;
  }
}

TEST_CASE("frozen increments have zero mean under a frozen gradient net") {
  ExperimentConfig cfg = tiny_call_config();
  cfg.grid = TimeGrid(1.0, 4, 1);
  const std::size_t n = 1u << 15;
  const PathEnsemble paths = simulate(cfg.model, cfg.grid, n, {13, "train"});
  StoppingState st = StoppingState::terminal(paths, cfg.payoff, cfg.grid, true);
  NetworkConfig ncfg{1, cfg.hidden};
  StepNetwork net(ncfg);
  xavier_init(net, 5, 2);
  net.value.dense.back().b[0] = 1e9;  // keep every path alive
  for (auto& l : net.value.dense) l.sync_transpose();
  const int k = 2;
  update_stopping(k, net, paths, cfg.model, cfg.payoff, cfg.grid, st);
  std::vector<double> inc(n);
  for (std::size_t i = 0; i < n; ++i) inc[i] = st.increments(i, k);
  const MeanStd ms = mean_std(inc);
  REQUIRE(ms.stddev > 0.0);
  REQUIRE(std::abs(ms.mean) < 4.0 * ms.stddev / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("loss reduces to the plain regression when the gradient head is silent") {
  const ExperimentConfig cfg = tiny_call_config();
  const PathEnsemble paths = simulate(cfg.model, cfg.grid, 128, {3, "train"});
  const StoppingState st = StoppingState::terminal(paths, cfg.payoff, cfg.grid);
  const int k = cfg.grid.steps - 1;

  StepNetwork net = constant_net(1, cfg.hidden, 0.0, {0.0});
  LossBatch batch;
  batch.resize(paths.count, 1);
  Matrix sigma_dw;
  detail::sigma_dw_at_step(cfg.model, paths, k, sigma_dw);
  for (std::size_t i = 0; i < paths.count; ++i) {
    batch.states(i, 0) = paths.state(k, i)[0];
    batch.augmented(i, 0) = batch.states(i, 0);
    batch.augmented(i, 1) = feature(cfg.payoff, cfg.grid.time(k), paths.state(k, i));
    batch.sigma_dw(i, 0) = sigma_dw(i, 0);
    batch.target[i] = st.reward_at_tau[i];
    batch.cached[i] = st.cached_sum[i];
  }
  LossWorkspace ws;
  const double loss = loss_bsde(net, batch, ws);
  double expected = 0.0;
  for (std::size_t i = 0; i < paths.count; ++i) expected += st.reward_at_tau[i] * st.reward_at_tau[i];
  expected /= static_cast<double>(paths.count);
  REQUIRE(loss == Approx(expected).epsilon(1e-12));
}

TEST_CASE("exact continuation value on a deterministic model zeroes the loss") {
  std::vector<double> values{7.5, 7.5};
  Matrix grad_out(2, 1);
  grad_out(0, 0) = 3.0;
  grad_out(1, 0) = -2.0;
  Matrix sigma_dw(2, 1);  // zero volatility
  std::vector<double> target{7.5, 7.5}, cached{0.0, 0.0}, resid(2);
  const double loss = bsde_residuals(values, grad_out, sigma_dw, target, cached, resid);
  REQUIRE(loss == 0.0);
}

TEST_CASE("loss gradients ignore perturbations of frozen later networks") {
  const ExperimentConfig cfg = tiny_call_config();
  const PathEnsemble paths = simulate(cfg.model, cfg.grid, 64, {9, "train"});
  StoppingState st = StoppingState::terminal(paths, cfg.payoff, cfg.grid);
  const int n = cfg.grid.steps;

  NetworkConfig ncfg{1, cfg.hidden};
  StepNetwork later(ncfg);
  xavier_init(later, 3, n - 1);
  later.value.dense.back().b[0] = 1e9;
  for (auto& l : later.value.dense) l.sync_transpose();
  update_stopping(n - 1, later, paths, cfg.model, cfg.payoff, cfg.grid, st);

  StepNetwork net(ncfg);
  xavier_init(net, 4, n - 2);
  auto gather = [&](LossBatch& batch) {
    batch.resize(paths.count, 1);
    Matrix sigma_dw;
    detail::sigma_dw_at_step(cfg.model, paths, n - 2, sigma_dw);
    for (std::size_t i = 0; i < paths.count; ++i) {
      batch.states(i, 0) = paths.state(n - 2, i)[0];
      batch.augmented(i, 0) = batch.states(i, 0);
      batch.augmented(i, 1) = feature(cfg.payoff, cfg.grid.time(n - 2), paths.state(n - 2, i));
      batch.sigma_dw(i, 0) = sigma_dw(i, 0);
      batch.target[i] = st.reward_at_tau[i];
      batch.cached[i] = st.cached_sum[i];
    }
  };
  LossBatch batch;
  gather(batch);
  LossWorkspace ws1, ws2;
  StepNetwork net_copy = clone_parameters(net);
  const double loss1 = loss_bsde(net, batch, ws1);

  // Wreck the later network; the cached increments must not move.
  later.gradient.dense.back().b[0] += 123.0;
  LossBatch batch2;
  gather(batch2);
  const double loss2 = loss_bsde(net_copy, batch2, ws2);
  REQUIRE(loss1 == loss2);
  for (std::size_t l = 0; l < ws1.grads_value.gw.size(); ++l)
    REQUIRE(ws1.grads_value.gw[l] == ws2.grads_value.gw[l]);
  for (std::size_t l = 0; l < ws1.grads_grad.gw.size(); ++l)
    REQUIRE(ws1.grads_grad.gw[l] == ws2.grads_grad.gw[l]);
}

TEST_CASE("value-iteration baseline shares targets at the terminal step and schema") {
  ExperimentConfig cfg = tiny_call_config();
  cfg.grid = TimeGrid(1.0, 3, 1);
  const TrainResult primal = train_all(cfg);
  const TrainResult baseline = train_value_iteration_baseline(cfg);
  const auto& pa = primal.checkpoint.at(cfg.grid.steps - 1);
  const auto& ba = baseline.checkpoint.at(cfg.grid.steps - 1);
  REQUIRE(pa.value.dense[0].w == ba.value.dense[0].w);
  REQUIRE(pa.gradient.dense[0].w == ba.gradient.dense[0].w);
  REQUIRE(primal.checkpoint.nets.size() == baseline.checkpoint.nets.size());
  REQUIRE(primal.checkpoint.meta.hidden == baseline.checkpoint.meta.hidden);
}

TEST_CASE("value-iteration baseline learns the deterministic recursion") {
  ExperimentConfig cfg;
  cfg.model = ModelSpec::black_scholes(1, 0.02, 0.0, 0.0, 0.0, 100.0);
  cfg.payoff = PayoffSpec(PayoffKind::Put, 105.0, 0.02);
  cfg.grid = TimeGrid(1.0, 4, 1);
  cfg.hidden = {8, 8};
  cfg.train.batch = 16;
  cfg.train.steps_per_epoch = 40;
  cfg.train.epochs = 4;
  cfg.train.lr_base = 0.05;
  cfg.train.lr_base_last = 0.05;
  cfg.seed = 6;

  // Deterministic path and the exact one-step backward recursion along it.
  std::vector<double> x(cfg.grid.steps + 1);
  x[0] = 100.0;
  const double dt = cfg.grid.dt();
  for (int k = 0; k < cfg.grid.steps; ++k) x[k + 1] = x[k] * (1.0 + 0.02 * dt);
  std::vector<double> exact(cfg.grid.steps + 1);
  exact[cfg.grid.steps] = reward(cfg.payoff, cfg.grid.time(cfg.grid.steps), {&x[cfg.grid.steps], 1});
  for (int k = cfg.grid.steps - 1; k >= 1; --k)
    exact[k] = std::max(reward(cfg.payoff, cfg.grid.time(k), {&x[k], 1}), exact[k + 1]);

  const TrainResult tr = train_value_iteration_baseline(cfg);
  for (int k = 1; k < cfg.grid.steps; ++k) {
    Matrix aug(2, 2);
    for (int row = 0; row < 2; ++row) {
      aug(row, 0) = x[k];
      aug(row, 1) = feature(cfg.payoff, cfg.grid.time(k), {&x[k], 1});
    }
    const Matrix out = tr.checkpoint.at(k).value.forward_eval(aug);
    REQUIRE(out(0, 0) == Approx(exact[k + 1]).margin(0.08));
  }
}

TEST_CASE("trained terminal-step loss beats the conditional-variance floor") {
  // One-dimensional put: the plain regression loss cannot go below the mean
  // conditional variance of the terminal reward; the martingale term lets the
  // trained loss drop under that floor.
  ExperimentConfig cfg = make_preset("put-1d");
  cfg.train.batch = 512;
  cfg.train.steps_per_epoch = 150;
  cfg.train.epochs = 1;
  cfg.seed = 4;
  const std::size_t m = static_cast<std::size_t>(cfg.train.batch) * cfg.train.steps_per_epoch;
  const PathEnsemble paths = simulate(cfg.model, cfg.grid, m, {cfg.seed, "train"});
  const StoppingState st = StoppingState::terminal(paths, cfg.payoff, cfg.grid);
  const int k = cfg.grid.steps - 1;

  NetworkConfig ncfg{1, cfg.hidden};
  StepNetwork init(ncfg);
  xavier_init(init, cfg.seed, static_cast<std::uint64_t>(k));
  std::vector<TrainReportRow> report;
  train_step_k(k, paths, st, cfg.model, cfg.payoff, cfg.grid, cfg.train, cfg.seed, init, &report);
  double tail_loss = 0.0;
  const int tail = 20;
  for (int i = 0; i < tail; ++i) tail_loss += report[report.size() - 1 - i].loss;
  tail_loss /= tail;

  // Closed-form conditional moments of the one-step Euler transition.
  auto norm_pdf = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); };
  auto norm_cdf = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
  const double dt = cfg.grid.dt();
  const double t_end = cfg.grid.time(cfg.grid.steps);
  const double disc = std::exp(-cfg.payoff.rate * t_end);
  double floor_sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double x = paths.state(k, i)[0];
    const double mean = x * (1.0 + cfg.model.rate * dt);
    const double sd = 0.25 * x * std::sqrt(dt);
    const double z = (cfg.payoff.strike - mean) / sd;
    const double m1 = (cfg.payoff.strike - mean) * norm_cdf(z) + sd * norm_pdf(z);
    const double m2 = (std::pow(cfg.payoff.strike - mean, 2) + sd * sd) * norm_cdf(z) +
                      (cfg.payoff.strike - mean) * sd * norm_pdf(z);
    floor_sum += disc * disc * (m2 - m1 * m1);
  }
  const double floor = floor_sum / static_cast<double>(m);
  REQUIRE(tail_loss > 0.0);
  REQUIRE(tail_loss < floor);
}

TEST_CASE("small training run keeps losses finite and trending down") {
  ExperimentConfig cfg;
  cfg.model = ModelSpec::black_scholes(1, 0.05, 0.0, 0.25, 0.0, 100.0);
  cfg.payoff = PayoffSpec(PayoffKind::Put, 100.0, 0.05);
  cfg.grid = TimeGrid(0.5, 10, 1);
  cfg.hidden = {16, 16};
  cfg.train.batch = 256;
  cfg.train.steps_per_epoch = 30;
  cfg.train.epochs = 2;
  cfg.seed = 15;
  const TrainResult tr = train_all(cfg);
  for (double l : tr.final_losses) REQUIRE(std::isfinite(l));
  // Per step, the mean loss of the last epoch should not exceed the mean of
  // the first epoch by more than noise (training makes progress on average).
  for (int k = 1; k < cfg.grid.steps; ++k) {
    double first = 0.0, last = 0.0;
    int epochs_here = (k == cfg.grid.steps - 1) ? 2 * cfg.train.epochs : cfg.train.epochs;
    int n_first = 0, n_last = 0;
    for (const auto& r : tr.report) {
      if (r.k != k) continue;
      if (r.epoch == 0) {
        first += r.loss;
        ++n_first;
      }
      if (r.epoch == epochs_here - 1) {
        last += r.loss;
        ++n_last;
      }
    }
    REQUIRE(n_first > 0);
    REQUIRE(n_last > 0);
    REQUIRE(last / n_last <= 1.5 * first / n_first);
  }
}
