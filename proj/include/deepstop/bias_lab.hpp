#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "deepstop/lattice.hpp"
#include "deepstop/linalg.hpp"
#include "deepstop/rng.hpp"

namespace deepstop {

/// Unbiased conditional-expectation estimator: the exact tree expectation
/// plus independent centered Gaussian noise of scale eta per query.
struct NoisyExpectationOracle {
  double eta = 0.5;
  std::uint64_t seed = 1;

  double query(double exact, std::uint64_t rep, std::uint64_t node, std::uint64_t tag) const {
    const NormalField rng(seed, "bias-oracle");
    return exact + eta * rng.normal(rep, node, tag, 0);
  }
};

/// Three consecutive exercise dates on a binomial tree, with every
/// conditional expectation availabe in closed form (binomial mixtures).
struct ThreeDateInstance {
  LatticeModel model;  // dates = 2 intervals: root date, middle date, final date
  Payoff1D payoff;

  std::vector<double> mid_spots;       // states at the middle date
  std::vector<double> mid_weights;     // transition weights from the root
  std::vector<double> mid_cont;        // exact continuation at the middle date
  std::vector<double> mid_reward;      // immediate reward at the middle date
  double exact_continuation = 0.0;     // exact C_k at the root
  double t_mid = 0.0;

  static ThreeDateInstance bermudan_put(double s0 = 100.0, double strike = 100.0, double sigma = 0.3,
                                        double rate = 0.05, double spacing = 0.25,
                                        int steps_per_date = 16) {
    ThreeDateInstance inst;
    inst.model = LatticeModel{s0, sigma, rate, 0.0, 2.0 * spacing, 2, steps_per_date};
    inst.model.validate();
    inst.payoff = Payoff1D{false, strike, rate};
    inst.build();
    return inst;
  }

  void build() {
    const int m = model.steps_per_date;
    const double u = model.up();
    const double p = model.prob();
    const double t_final = model.horizon;
    t_mid = model.horizon / 2.0;

    std::vector<double> binom(m + 1);
    binom[0] = std::pow(1.0 - p, m);
    for (int j = 1; j <= m; ++j)
      binom[j] = binom[j - 1] * (p / (1.0 - p)) * (static_cast<double>(m - j + 1) / j);

    mid_spots.resize(m + 1);
    mid_weights = binom;
    mid_cont.resize(m + 1);
    mid_reward.resize(m + 1);
    for (int j = 0; j <= m; ++j) {
      const double s_mid = model.s0 * std::pow(u, 2.0 * j - m);
      mid_spots[j] = s_mid;
      mid_reward[j] = payoff(t_mid, s_mid);
      double c = 0.0;
      for (int l = 0; l <= m; ++l) c += binom[l] * payoff(t_final, s_mid * std::pow(u, 2.0 * l - m));
      mid_cont[j] = c;
    }
    exact_continuation = 0.0;
    for (int j = 0; j <= m; ++j)
      exact_continuation += mid_weights[j] * std::max(mid_reward[j], mid_cont[j]);
  }
};

struct BiasResult {
  double mean_bias = 0.0;
  double halfwidth = 0.0;  // 1.96 * se
  double sign_test_p = 1.0;
  std::size_t replications = 0;
  double eta = 0.0;
};

namespace detail {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline BiasResult summarize_bias(const std::vector<double>& samples, double eta) {
  BiasResult r;
  r.eta = eta;
  r.replications = samples.size();
  const MeanStd ms = mean_std(samples);
  r.mean_bias = ms.mean;
  r.halfwidth = ms.count > 1 ? 1.96 * ms.stddev / std::sqrt(static_cast<double>(ms.count)) : 0.0;
  std::size_t pos = 0, nonzero = 0;
  for (double s : samples) {
    if (s == 0.0) continue;
    ++nonzero;
    if (s > 0.0) ++pos;
  }
  if (nonzero > 0) {
    const double z = (static_cast<double>(pos) - 0.5 * nonzero) / std::sqrt(0.25 * nonzero);
    r.sign_test_p = 2.0 * (1.0 - normal_cdf(std::abs(z)));
  }
  return r;
}

}  // namespace detail

/// Two-stage value-iteration estimate with unbiased noisy expectations; the
/// max over a noisy inner estimate picks up a Jensen gap, so the measured
/// bias should be positive for eta > 0.
inline BiasResult bias_experiment_value_iteration(const ThreeDateInstance& inst,
                                                  const NoisyExpectationOracle& oracle,
                                                  std::size_t replications) {
  std::vector<double> samples(replications);
  const std::size_t nodes = inst.mid_spots.size();
  for (std::size_t rep = 0; rep < replications; ++rep) {
    double acc = 0.0;
    for (std::size_t j = 0; j < nodes; ++j) {
      const double c_hat = oracle.query(inst.mid_cont[j], rep, j, 0);
      acc += inst.mid_weights[j] * std::max(inst.mid_reward[j], c_hat);
    }
    const double c_root = oracle.query(acc, rep, nodes, 1);
    samples[rep] = c_root - inst.exact_continuation;
  }
  return detail::summarize_bias(samples, oracle.eta);
}

/// Two-stage stopping-time estimate: noise can only flip stop/continue
/// decisions, each flip forfeits value, so the measured bias should be
/// negative for eta > 0.
inline BiasResult bias_experiment_stopping_time(const ThreeDateInstance& inst,
                                                const NoisyExpectationOracle& oracle,
                                                std::size_t replications) {
  std::vector<double> samples(replications);
  const std::size_t nodes = inst.mid_spots.size();
  for (std::size_t rep = 0; rep < replications; ++rep) {
    double acc = 0.0;
    for (std::size_t j = 0; j < nodes; ++j) {
      const double c_hat = oracle.query(inst.mid_cont[j], rep, j, 2);
      const bool stop = inst.mid_reward[j] >= c_hat;
      acc += inst.mid_weights[j] * (stop ? inst.mid_reward[j] : inst.mid_cont[j]);
    }
    const double c_root = oracle.query(acc, rep, nodes, 3);
    samples[rep] = c_root - inst.exact_continuation;
  }
  return detail::summarize_bias(samples, oracle.eta);
}

/// Continuation value and spatial gradient supplied by an exact reference.
struct ContinuationOracle {
  std::function<double(int, double)> value;  // (date k, spot) -> discounted continuation
  std::function<double(int, double)> grad;
};

inline ContinuationOracle make_lattice_oracle(std::shared_ptr<LatticeOracle> lat) {
  ContinuationOracle o;
  o.value = [lat](int k, double s) { return lat->continuation(k, s); };
  o.grad = [lat](int k, double s) { return lat->continuation_grad(k, s); };
  return o;
}

struct GradientVarianceResult {
  double moment_ls = 0.0;    // E[(G_ls)^2]
  double moment_bsde = 0.0;  // E[(G_bsde)^2]
  double ratio = 0.0;
  std::size_t samples = 0;
  double dt = 0.0;
};

/// Per-sample stochastic-gradient second moments of the plain regression
/// residual versus the martingale-augmented residual, with the exact
/// continuation value and gradient installed (output-bias direction, so the
/// common factor 2*dC/dtheta is 1). Measured at step k_measure on a
/// one-dimensional Black-Scholes dynamic simulated by Euler.
inline GradientVarianceResult gradient_variance_experiment(double s0, double sigma, double rate,
                                                           double dividend, const Payoff1D& payoff,
                                                           int steps, double horizon,
                                                           const ContinuationOracle& oracle,
                                                           int k_measure, std::size_t samples,
                                                           std::uint64_t seed) {
  const double dt = horizon / steps;
  const double sqdt = std::sqrt(dt);
  const NormalField rng(seed, "gradvar");

  std::vector<double> ls2(samples), bsde2(samples);
  std::vector<double> x(steps + 1), dw(steps);
  for (std::size_t i = 0; i < samples; ++i) {
    x[0] = s0;
    for (int k = 0; k < steps; ++k) {
      dw[k] = sqdt * rng.normal(i, k, 0, 0);
      x[k + 1] = x[k] + (rate - dividend) * x[k] * dt + sigma * x[k] * dw[k];
    }
    // Stopping time from k_measure + 1 under the exact rule.
    int tau = steps;
    for (int k = k_measure + 1; k < steps; ++k) {
      const double t_k = dt * k;
      if (payoff(t_k, x[k]) >= oracle.value(k, x[k])) {
        tau = k;
        break;
      }
    }
    const double realized = payoff(dt * tau, x[tau]);
    const double c_here = oracle.value(k_measure, x[k_measure]);
    const double resid_ls = c_here - realized;
    double mart = 0.0;
    for (int j = k_measure; j < tau; ++j) mart += oracle.grad(j, x[j]) * sigma * x[j] * dw[j];
    const double resid_bsde = resid_ls + mart;
    ls2[i] = 4.0 * resid_ls * resid_ls;
    bsde2[i] = 4.0 * resid_bsde * resid_bsde;
  }

  GradientVarianceResult r;
  r.samples = samples;
  r.dt = dt;
  r.moment_ls = pairwise_sum(ls2) / static_cast<double>(samples);
  r.moment_bsde = pairwise_sum(bsde2) / static_cast<double>(samples);
  r.ratio = r.moment_bsde > 0.0 ? r.moment_ls / r.moment_bsde
                                : std::numeric_limits<double>::infinity();
  if (r.moment_ls == 0.0 && r.moment_bsde == 0.0) r.ratio = 1.0;
  return r;
}

}  // namespace deepstop
