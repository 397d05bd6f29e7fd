#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "deepstop/errors.hpp"
#include "deepstop/model.hpp"
#include "deepstop/payoff.hpp"

namespace deepstop {

/// Recombining binomial tree for a one-dimensional Black-Scholes dynamic,
/// with `steps_per_date` tree steps between consecutive exercise dates.
struct LatticeModel {
  double s0 = 100.0;
  double sigma = 0.2;
  double rate = 0.0;
  double dividend = 0.0;
  double horizon = 1.0;
  int dates = 1;
  int steps_per_date = 100;

  double step_dt() const { return horizon / (static_cast<double>(dates) * steps_per_date); }
  double up() const { return std::exp(sigma * std::sqrt(step_dt())); }
  double prob() const {
    const double u = up();
    return (std::exp((rate - dividend) * step_dt()) - 1.0 / u) / (u - 1.0 / u);
  }

  void validate() const {
    if (dates < 1 || steps_per_date < 1)
      throw Error(ErrorCode::IncompatibleGrid, "lattice needs at least one date and one step per date");
    const double p = prob();
    if (!(p > 0.0 && p < 1.0))
      throw Error(ErrorCode::ValidationError, "risk-neutral probability outside (0,1); refine the tree");
  }
};

/// One-dimensional vanilla payoff in discounted (time-0) units.
struct Payoff1D {
  bool is_call = true;
  double strike = 100.0;
  double rate = 0.0;

  double operator()(double t, double s) const {
    const double inner = is_call ? s - strike : strike - s;
    return std::exp(-rate * t) * std::max(inner, 0.0);
  }
};

enum class ExerciseStyle { European, Bermudan };

struct LatticeResult {
  double price = 0.0;
  // Arrays indexed by exercise date k = 0..dates; spots ascending. Entry 0 is
  // the root. Continuation values are in discounted units, matching the
  // payoff convention.
  std::vector<std::vector<double>> spots;
  std::vector<std::vector<double>> continuation;
  // Critical spot per date (lowest exercising node for calls, highest for
  // puts); NaN when no node exercises.
  std::vector<double> boundary;
};

/// Exact dynamic programming on the tree, in discounted units (values are
/// martingales between exercise dates, so no per-step discount factor).
inline LatticeResult lattice_price(const LatticeModel& model, const Payoff1D& payoff,
                                   ExerciseStyle style) {
  model.validate();
  const int m = model.steps_per_date;
  const int total = model.dates * m;
  const double u = model.up();
  const double p = model.prob();
  const double log_u = std::log(u);
  const double log_s0 = std::log(model.s0);

  auto spot_at = [&](int level, int i) { return std::exp(log_s0 + (level - 2.0 * i) * log_u); };
  auto date_time = [&](int k) { return model.horizon * static_cast<double>(k) / model.dates; };

  LatticeResult res;
  res.spots.assign(model.dates + 1, {});
  res.continuation.assign(model.dates + 1, {});
  res.boundary.assign(model.dates + 1, std::numeric_limits<double>::quiet_NaN());

  std::vector<double> values(total + 1);
  for (int i = 0; i <= total; ++i) values[i] = payoff(model.horizon, spot_at(total, i));
  {
    auto& sp = res.spots[model.dates];
    sp.resize(total + 1);
    for (int i = 0; i <= total; ++i) sp[total - i] = spot_at(total, i);
    res.continuation[model.dates].assign(total + 1, 0.0);
  }

  for (int level = total - 1; level >= 0; --level) {
    for (int i = 0; i <= level; ++i) values[i] = p * values[i] + (1.0 - p) * values[i + 1];
    values.resize(level + 1);
    if (level % m == 0) {
      const int k = level / m;
      const double t_k = date_time(k);
      auto& sp = res.spots[k];
      auto& cont = res.continuation[k];
      sp.resize(level + 1);
      cont.resize(level + 1);
      for (int i = 0; i <= level; ++i) {
        sp[level - i] = spot_at(level, i);
        cont[level - i] = values[i];
      }
      const bool exercise_date = style == ExerciseStyle::Bermudan && k >= 1;
      double bound = std::numeric_limits<double>::quiet_NaN();
      for (int i = 0; i <= level; ++i) {
        const double s = spot_at(level, i);
        const double g = payoff(t_k, s);
        if (exercise_date && g >= values[i]) {
          if (g > 0.0) {
            if (std::isnan(bound))
              bound = s;
            else
              bound = payoff.is_call ? std::min(bound, s) : std::max(bound, s);
          }
          values[i] = g;
        }
      }
      if (exercise_date) res.boundary[k] = bound;
    }
  }
  res.price = std::max(payoff(0.0, model.s0), values[0]);
  return res;
}

/// Geometric-average reduction of a multi-asset Black-Scholes basket: the
/// basket level follows a one-dimensional Black-Scholes dynamic whose
/// volatility and effective dividend come from the basket covariance.
inline LatticeModel reduce_basket(const ModelSpec& model, double horizon, int dates,
                                  int steps_per_date) {
  if (model.kind != ModelKind::BlackScholes)
    throw Error(ErrorCode::WrongPayoffKind, "basket reduction needs a Black-Scholes model");
  const int d = model.dim;
  // Effective rows against independent increments: A = vol * chol(corr).
  Matrix a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int c = 0; c < d; ++c) s += model.vol(i, c) * model.chol(c, j);
      a(i, j) = s;
    }
  double trace_avg = 0.0;
  std::vector<double> mean_row(d, 0.0);
  for (int i = 0; i < d; ++i) {
    double rr = 0.0;
    for (int j = 0; j < d; ++j) {
      rr += a(i, j) * a(i, j);
      mean_row[j] += a(i, j) / d;
    }
    trace_avg += rr / d;
  }
  double bar_var = 0.0;
  for (int j = 0; j < d; ++j) bar_var += mean_row[j] * mean_row[j];

  double log_s0 = 0.0;
  for (double v : model.x0) log_s0 += std::log(v) / d;

  LatticeModel lm;
  lm.s0 = std::exp(log_s0);
  lm.sigma = std::sqrt(bar_var);
  lm.rate = model.rate;
  lm.dividend = model.dividend + 0.5 * (trace_avg - bar_var);
  lm.horizon = horizon;
  lm.dates = dates;
  lm.steps_per_date = steps_per_date;
  return lm;
}

/// Interpolating view over per-date continuation values: piecewise-linear in
/// log-spot, with central-difference spatial gradients. Out-of-range queries
/// clamp to the edge nodes.
class LatticeOracle {
 public:
  LatticeOracle() = default;
  LatticeOracle(const LatticeModel& model, const Payoff1D& payoff, ExerciseStyle style)
      : result_(lattice_price(model, payoff, style)) {
    grads_.resize(result_.continuation.size());
    for (std::size_t k = 0; k < result_.continuation.size(); ++k) {
      const auto& sp = result_.spots[k];
      const auto& c = result_.continuation[k];
      auto& g = grads_[k];
      g.assign(sp.size(), 0.0);
      if (sp.size() < 2) continue;
      for (std::size_t i = 0; i < sp.size(); ++i) {
        const std::size_t lo = i == 0 ? 0 : i - 1;
        const std::size_t hi = i + 1 == sp.size() ? i : i + 1;
        g[i] = (c[hi] - c[lo]) / (sp[hi] - sp[lo]);
      }
    }
  }

  const LatticeResult& result() const { return result_; }
  double price() const { return result_.price; }

  double continuation(int k, double s) const { return interp(result_.continuation[k], k, s); }
  double continuation_grad(int k, double s) const { return interp(grads_[k], k, s); }

 private:
  double interp(const std::vector<double>& values, int k, double s) const {
    const auto& sp = result_.spots[k];
    if (sp.size() == 1) return values[0];
    if (s <= sp.front()) return values.front();
    if (s >= sp.back()) return values.back();
    // Uniform grid in log-spot.
    const double lo = std::log(sp.front());
    const double step = (std::log(sp.back()) - lo) / static_cast<double>(sp.size() - 1);
    const double pos = (std::log(s) - lo) / step;
    std::size_t i = static_cast<std::size_t>(pos);
    if (i + 1 >= sp.size()) i = sp.size() - 2;
    const double w = pos - static_cast<double>(i);
    return (1.0 - w) * values[i] + w * values[i + 1];
  }

  LatticeResult result_;
  std::vector<std::vector<double>> grads_;
};

}  // namespace deepstop
