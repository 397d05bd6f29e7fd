#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "deepstop/errors.hpp"

namespace deepstop {

enum class PayoffKind { GeometricBasketCall, StrangleSpread, HestonPut, MaxCall, Put };

inline const char* to_string(PayoffKind k) {
  switch (k) {
    case PayoffKind::GeometricBasketCall: return "geometric-basket-call";
    case PayoffKind::StrangleSpread: return "strangle-spread";
    case PayoffKind::HestonPut: return "heston-put";
    case PayoffKind::MaxCall: return "max-call";
    case PayoffKind::Put: return "put";
  }
  return "unknown";
}

/// Discounted reward g(t, x) = exp(-r t) * max(phi(t, x), 0), where phi is the
/// signed inner value that also feeds the value network as an input feature.
struct PayoffSpec {
  PayoffKind kind = PayoffKind::GeometricBasketCall;
  double strike = 100.0;
  double rate = 0.0;        // discount rate
  double spot_scale = 1.0;  // s0 multiplier for log-price payoffs

  PayoffSpec() = default;
  PayoffSpec(PayoffKind k, double strike_, double rate_, double spot_scale_ = 1.0)
      : kind(k), strike(strike_), rate(rate_), spot_scale(spot_scale_) {
    if (strike <= 0.0) throw Error(ErrorCode::ValidationError, "strike must be positive");
  }
};

/// Signed discounted moneyness phi(t, x); reward(t, x) == max(feature, 0).
inline double feature(const PayoffSpec& p, double t, std::span<const double> x) {
  const double disc = std::exp(-p.rate * t);
  switch (p.kind) {
    case PayoffKind::GeometricBasketCall: {
      if (x.empty()) throw Error(ErrorCode::DimensionMismatch, "basket payoff needs at least one asset");
      // Geometric mean through logs; a non-positive component makes the
      // product collapse, treated as geometric mean zero.
      double log_sum = 0.0;
      bool degenerate = false;
      for (double v : x) {
        if (v <= 0.0) {
          degenerate = true;
          break;
        }
        log_sum += std::log(v);
      }
      const double gmean = degenerate ? 0.0 : std::exp(log_sum / static_cast<double>(x.size()));
      return disc * (gmean - p.strike);
    }
    case PayoffKind::StrangleSpread: {
      if (x.empty()) throw Error(ErrorCode::DimensionMismatch, "basket payoff needs at least one asset");
      double mean = 0.0;
      for (double v : x) mean += v;
      mean /= static_cast<double>(x.size());
      return disc * (15.0 - std::max(25.0 - std::abs(mean - 100.0), 0.0));
    }
    case PayoffKind::HestonPut: {
      if (x.size() < 1) throw Error(ErrorCode::DimensionMismatch, "heston-put needs a log-price state");
      return disc * (p.strike - p.spot_scale * std::exp(x[0]));
    }
    case PayoffKind::MaxCall: {
      if (x.empty()) throw Error(ErrorCode::DimensionMismatch, "max-call needs at least one asset");
      double best = x[0];
      for (double v : x.subspan(1)) best = std::max(best, v);
      return disc * (best - p.strike);
    }
    case PayoffKind::Put: {
      if (x.size() != 1) throw Error(ErrorCode::DimensionMismatch, "vanilla put is one-dimensional");
      return disc * (p.strike - x[0]);
    }
  }
  throw Error(ErrorCode::WrongPayoffKind, "unknown payoff kind");
}

inline double reward(const PayoffSpec& p, double t, std::span<const double> x) {
  return std::max(feature(p, t, x), 0.0);
}

}  // namespace deepstop
