#include <catch2/catch.hpp>

#include "deepstop/bounds.hpp"
#include "deepstop/trainer.hpp"

using namespace deepstop;

namespace {

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double bs_call(double s, double k, double r, double q, double sigma, double t) {
  const double sv = sigma * std::sqrt(t);
  const double d1 = (std::log(s / k) + (r - q + 0.5 * sigma * sigma) * t) / sv;
  return s * std::exp(-q * t) * norm_cdf(d1) - k * std::exp(-r * t) * norm_cdf(d1 - sv);
}

ExperimentConfig call_1d_config(int steps) {
  ExperimentConfig c;
  c.model = ModelSpec::black_scholes(1, 0.0, 0.0, 0.25, 0.0, 100.0);
  c.payoff = PayoffSpec(PayoffKind::GeometricBasketCall, 100.0, 0.0);
  c.grid = TimeGrid(2.0, steps, 1);
  c.hidden = {4, 4};
  c.seed = 31;
  return c;
}

// Checkpoint of constant-output networks for every interior step.
Checkpoint constant_checkpoint(const ExperimentConfig& cfg, double value_out,
                               const std::vector<double>& grad_out) {
  Checkpoint ckpt;
  ckpt.meta.grid = cfg.grid;
  ckpt.meta.state_dim = cfg.model.dim;
  ckpt.meta.hidden = cfg.hidden;
  ckpt.meta.model_kind = cfg.model.kind == ModelKind::Heston ? "heston" : "black-scholes";
  ckpt.meta.payoff_kind = to_string(cfg.payoff.kind);
  for (int k = 1; k < cfg.grid.steps; ++k) {
    NetworkConfig ncfg{cfg.model.dim, cfg.hidden};
    StepNetwork net(ncfg);
    net.value.dense.back().b[0] = value_out;
    for (int c = 0; c < cfg.model.dim; ++c) net.gradient.dense.back().b[c] = grad_out[c];
    for (auto& l : net.value.dense) l.sync_transpose();
    for (auto& l : net.gradient.dense) l.sync_transpose();
    ckpt.nets.emplace(k, std::move(net));
  }
  return ckpt;
}

}  // namespace

TEST_CASE("never-stopping rule prices the european limit") {
  const ExperimentConfig cfg = call_1d_config(50);
  const Checkpoint ckpt = constant_checkpoint(cfg, 1e12, {0.0});
  const std::size_t n = 1u << 20;
  const LowerBoundResult lb = lower_bound(ckpt, cfg, n);
  REQUIRE(lb.early_stop_fraction == 0.0);
  const double exact = bs_call(100.0, 100.0, 0.0, 0.0, 0.25, 2.0);
  const double se = lb.estimate.stddev / std::sqrt(static_cast<double>(n));
  REQUIRE(std::abs(lb.estimate.value - exact) < 4.0 * se);
  // CI construction.
  REQUIRE(lb.estimate.halfwidth == Approx(1.96 * se));
}

TEST_CASE("worthless payoff gives a zero lower bound exactly") {
  ExperimentConfig cfg = call_1d_config(5);
  cfg.payoff = PayoffSpec(PayoffKind::GeometricBasketCall, 1e9, 0.0);
  const Checkpoint ckpt = constant_checkpoint(cfg, 1e12, {0.0});
  const LowerBoundResult lb = lower_bound(ckpt, cfg, 4096);
  REQUIRE(lb.estimate.value == 0.0);
}

TEST_CASE("lower bound rejects a mismatched checkpoint") {
  const ExperimentConfig cfg = call_1d_config(5);
  ExperimentConfig other = cfg;
  other.grid = TimeGrid(2.0, 6, 1);
  const Checkpoint ckpt = constant_checkpoint(other, 1.0, {0.0});
  REQUIRE_THROWS_MATCHES(lower_bound(ckpt, cfg, 128), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == ErrorCode::CheckpointGridMismatch;
                         }));
}

TEST_CASE("first increment centers to machine precision") {
  const ExperimentConfig cfg = call_1d_config(6);
  const Checkpoint ckpt = constant_checkpoint(cfg, 0.0, {0.0});
  const PathEnsemble paths = simulate(cfg.model, cfg.grid, 4096, {5, "upper"}, true);
  const auto inc = first_increment(ckpt, cfg, paths);
  double mean = 0.0, scale = 0.0;
  for (double v : inc) {
    mean += v;
    scale += std::abs(v);
  }
  REQUIRE(std::abs(mean) <= 1e-12 * std::max(1.0, scale));

  // A constant one-step value makes every centered increment vanish.
  const Checkpoint flat = constant_checkpoint(cfg, 1e12, {0.0});
  const auto zero_inc = first_increment(flat, cfg, paths);
  for (double v : zero_inc) REQUIRE(v == 0.0);
}

TEST_CASE("two-sample first increment is the signed half-gap") {
  ExperimentConfig cfg = call_1d_config(1);  // single-step grid, no networks
  const Checkpoint ckpt = constant_checkpoint(cfg, 0.0, {0.0});
  const PathEnsemble paths = simulate(cfg.model, cfg.grid, 2, {9, "upper"}, true);
  const double a = reward(cfg.payoff, cfg.grid.time(1), paths.state(1, 0));
  const double b = reward(cfg.payoff, cfg.grid.time(1), paths.state(1, 1));
  const auto inc = first_increment(ckpt, cfg, paths);
  REQUIRE(inc[0] == Approx((a - b) / 2.0).margin(1e-14));
  REQUIRE(inc[1] == Approx((b - a) / 2.0).margin(1e-14));
}

TEST_CASE("doob increments vanish for a silent gradient head") {
  const ExperimentConfig cfg = call_1d_config(6);
  const Checkpoint ckpt = constant_checkpoint(cfg, 1.0, {0.0});
  const PathEnsemble paths = simulate(cfg.model, cfg.grid, 64, {3, "upper"}, true);
  for (int k = 1; k < cfg.grid.steps; ++k)
    for (double v : doob_increments_fine(ckpt, cfg.model, cfg.grid, paths, k)) REQUIRE(v == 0.0);
}

TEST_CASE("doob increments need a fine grid and a valid index") {
  const ExperimentConfig cfg = call_1d_config(6);
  const Checkpoint ckpt = constant_checkpoint(cfg, 1.0, {0.5});
  const PathEnsemble coarse = simulate(cfg.model, cfg.grid, 16, {3, "upper"}, false);
  REQUIRE_THROWS_MATCHES(doob_increments_fine(ckpt, cfg.model, cfg.grid, coarse, 2), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == ErrorCode::MissingFineGrid;
                         }));
}

TEST_CASE("a single substep reduces to the coarse-increment formula") {
  ExperimentConfig cfg = call_1d_config(5);
  cfg.grid.substeps = 1;
  const Checkpoint ckpt = constant_checkpoint(cfg, 1.0, {0.7});
  const PathEnsemble paths = simulate(cfg.model, cfg.grid, 128, {21, "upper"}, true);
  for (int k = 1; k < cfg.grid.steps; ++k) {
    const auto inc = doob_increments_fine(ckpt, cfg.model, cfg.grid, paths, k);
    for (std::size_t i = 0; i < paths.count; ++i) {
      const double expected = 0.7 * (0.25 * paths.state(k, i)[0]) * paths.increment(k, i)[0];
      REQUIRE(inc[i] == Approx(expected).margin(1e-15));
    }
  }
}

TEST_CASE("constant gradient and diffusion telescope exactly across substeps") {
  // Heston with zero vol-of-vol and rho = 1 freezes the diffusion matrix at
  // [[1,0],[0,0]]; a constant gradient head (2, 0) then makes the fine-grid
  // increment collapse to 2 * dW1 bitwise for any substep count.
  ExperimentConfig cfg;
  cfg.model = ModelSpec::heston(0.0, 5.0, 1.0, 0.0, 1.0, 1.0);
  cfg.payoff = PayoffSpec(PayoffKind::HestonPut, 10.0, 0.0, 10.0);
  cfg.grid = TimeGrid(1.0, 4, 8);
  cfg.hidden = {4, 4};
  const Checkpoint ckpt = constant_checkpoint(cfg, 1.0, {2.0, 0.0});
  const PathEnsemble paths = simulate(cfg.model, cfg.grid, 64, {2, "upper"}, true);
  for (int k = 1; k < cfg.grid.steps; ++k) {
    const auto inc = doob_increments_fine(ckpt, cfg.model, cfg.grid, paths, k);
    for (std::size_t i = 0; i < paths.count; ++i)
      REQUIRE(inc[i] == 2.0 * paths.increment(k, i)[0]);
  }
}

TEST_CASE("martingale path telescopes exactly") {
  const std::vector<double> later{0.3, -0.2, 0.9};
  const MartingalePath m = MartingalePath::from_increments(0.5, later);
  REQUIRE(m.values[0] == 0.0);
  REQUIRE(m.values[1] - m.values[0] == 0.5);
  // Bitwise telescoping: each stored value is exactly the previous plus the
  // returned increment, so the cumulative sum carries no drift of its own.
  for (std::size_t j = 0; j < later.size(); ++j)
    REQUIRE(m.values[j + 2] == m.values[j + 1] + later[j]);
}

TEST_CASE("zero martingale upper bound dominates the lower bound") {
  const ExperimentConfig cfg = call_1d_config(5);
  const Checkpoint ckpt = constant_checkpoint(cfg, 1e12, {0.0});
  const std::size_t n = 1u << 14;
  const LowerBoundResult lb = lower_bound(ckpt, cfg, n);
  const BoundEstimate ub = upper_bound(ckpt, cfg, n, 2);
  // With M == 0 the upper bound is E[max_k g] >= E[g at any stopping rule].
  REQUIRE(ub.value + ub.halfwidth >= lb.estimate.value - lb.estimate.halfwidth);
  REQUIRE(ub.value > lb.estimate.value);
}

TEST_CASE("single-period upper bound matches a hand computation") {
  const ExperimentConfig cfg = call_1d_config(1);
  const Checkpoint ckpt = constant_checkpoint(cfg, 0.0, {0.0});
  const std::size_t n = 512;
  const UpperBoundResult full = upper_bound_full(ckpt, cfg, n, 4);
  const BoundEstimate& ub = full.estimate;

  // The estimate is recomputable from the stored per-path values.
  const BoundEstimate recomputed = make_estimate(full.maxima, BoundKind::Upper);
  REQUIRE(recomputed.value == ub.value);
  REQUIRE(recomputed.halfwidth == ub.halfwidth);
  REQUIRE(ub.halfwidth >= 0.0);

  // Recreate the same evaluation paths (same stream and seed).
  TimeGrid fine = cfg.grid;
  fine.substeps = 4;
  const PathEnsemble paths = simulate(cfg.model, fine, n, {cfg.seed, "upper"}, true);
  std::vector<double> terminal(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    terminal[i] = reward(cfg.payoff, fine.time(1), paths.state(1, i));
    mean += terminal[i];
  }
  mean /= static_cast<double>(n);
  std::vector<double> expected(n);
  const double g0 = reward(cfg.payoff, 0.0, cfg.model.x0);
  for (std::size_t i = 0; i < n; ++i)
    expected[i] = std::max(g0, terminal[i] - (terminal[i] - mean));
  const BoundEstimate manual = make_estimate(expected, BoundKind::Upper);
  REQUIRE(ub.value == Approx(manual.value).margin(1e-12));
  REQUIRE(ub.halfwidth == Approx(manual.halfwidth).margin(1e-12));
}

TEST_CASE("level re-quadrature shares paths and reduces toward finer levels") {
  ExperimentConfig cfg = call_1d_config(6);
  const Checkpoint ckpt = constant_checkpoint(cfg, 10.0, {0.4});
  const auto estimates = upper_bound_levels(ckpt, cfg, 2048, {1, 4, 8});
  REQUIRE(estimates.size() == 3);
  // Same payoff paths: estimates differ only through the quadrature.
  for (const auto& e : estimates) {
    REQUIRE(e.count == 2048);
    REQUIRE(std::isfinite(e.value));
  }
  const double joint_se =
      std::sqrt(std::pow(estimates.front().halfwidth, 2) + std::pow(estimates.back().halfwidth, 2));
  REQUIRE(estimates.back().value <= estimates.front().value + 2.0 * joint_se / 1.96);
}

TEST_CASE("projected delta") {
  ExperimentConfig cfg = call_1d_config(4);

  SECTION("one-dimensional projection is the gradient itself") {
    const Checkpoint ckpt = constant_checkpoint(cfg, 1e12, {0.37});
    Matrix states(3, 1);
    states(0, 0) = 80.0;
    states(1, 0) = 100.0;
    states(2, 0) = 125.0;
    const DeltaResult dr = project_delta(ckpt, cfg, 2, states);
    for (int i = 0; i < 3; ++i) {
      REQUIRE_FALSE(dr.stopped[i]);
      REQUIRE(dr.delta[i] == Approx(0.37).margin(1e-12));
    }
  }

  SECTION("stopping region has the discounted payoff slope") {
    const Checkpoint ckpt = constant_checkpoint(cfg, -1e12, {0.37});
    Matrix states(2, 1);
    states(0, 0) = 130.0;  // in the money
    states(1, 0) = 70.0;   // out of the money
    const DeltaResult dr = project_delta(ckpt, cfg, 2, states);
    REQUIRE(dr.stopped[0]);
    REQUIRE(dr.delta[0] == 1.0);  // r = 0
    REQUIRE(dr.stopped[1]);
    REQUIRE(dr.delta[1] == 0.0);
  }

  SECTION("equal components sum the gradient head") {
    ExperimentConfig cfg3 = cfg;
    cfg3.model = ModelSpec::black_scholes(3, 0.0, 0.02, 0.25, 0.75, 100.0);
    const Checkpoint ckpt = constant_checkpoint(cfg3, 1e12, {0.1, 0.2, 0.3});
    Matrix states(1, 3, 90.0);
    const DeltaResult dr = project_delta(ckpt, cfg3, 2, states);
    REQUIRE(dr.basket_level[0] == Approx(90.0));
    REQUIRE(dr.delta[0] == Approx(0.6).margin(1e-12));
  }

  SECTION("wrong payoff kind is rejected") {
    ExperimentConfig bad = cfg;
    bad.payoff = PayoffSpec(PayoffKind::MaxCall, 100.0, 0.0);
    const Checkpoint ckpt = constant_checkpoint(bad, 1.0, {0.0});
    Matrix states(1, 1, 100.0);
    REQUIRE_THROWS_MATCHES(project_delta(ckpt, bad, 2, states), Error,
                           Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == ErrorCode::WrongPayoffKind;
                           }));
  }
}
