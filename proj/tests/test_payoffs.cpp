#include <catch2/catch.hpp>

#include "deepstop/payoff.hpp"
#include "deepstop/rng.hpp"

using namespace deepstop;

TEST_CASE("geometric basket call on equal components") {
  const PayoffSpec p(PayoffKind::GeometricBasketCall, 100.0, 0.0);
  for (int d : {1, 3, 20}) {
    const std::vector<double> x(d, 110.0);
    REQUIRE(reward(p, 0.7, x) == Approx(10.0));
    const std::vector<double> lo(d, 90.0);
    REQUIRE(feature(p, 0.7, lo) == Approx(-10.0));
  }
}

TEST_CASE("strangle spread at the basket center") {
  const PayoffSpec p(PayoffKind::StrangleSpread, 100.0, 0.0);
  const std::vector<double> x(5, 100.0);
  REQUIRE(reward(p, 0.0, x) == 0.0);
  REQUIRE(feature(p, 0.0, x) == Approx(-10.0));
  // Far from the center the spread pays out.
  const std::vector<double> far(5, 140.0);
  REQUIRE(reward(p, 0.0, far) == Approx(15.0));
}

TEST_CASE("max call picks the best component") {
  const PayoffSpec p(PayoffKind::MaxCall, 100.0, 0.05);
  const std::vector<double> x{90.0, 120.0};
  REQUIRE(reward(p, 0.0, x) == Approx(20.0));
  REQUIRE(feature(p, 0.0, x) == Approx(20.0));
}

TEST_CASE("heston put at the money") {
  const PayoffSpec p(PayoffKind::HestonPut, 10.0, 0.1, 10.0);
  const std::vector<double> x{0.0, 0.0625};
  REQUIRE(reward(p, 0.3, x) == 0.0);
  const std::vector<double> itm{-0.2, 0.04};
  REQUIRE(reward(p, 0.0, itm) == Approx(10.0 - 10.0 * std::exp(-0.2)));
}

TEST_CASE("reward is the positive part of the feature") {
  const NormalField rng(31, "payoff-prop");
  const PayoffSpec specs[] = {PayoffSpec(PayoffKind::GeometricBasketCall, 100.0, 0.05),
                              PayoffSpec(PayoffKind::StrangleSpread, 100.0, 0.05),
                              PayoffSpec(PayoffKind::MaxCall, 100.0, 0.05),
                              PayoffSpec(PayoffKind::HestonPut, 10.0, 0.1, 10.0)};
  for (std::size_t s = 0; s < 4; ++s) {
    const int d = specs[s].kind == PayoffKind::HestonPut ? 2 : 5;
    for (int i = 0; i < 25000; ++i) {
      std::vector<double> x(d);
      for (int c = 0; c < d; ++c) {
        const double z = rng.normal(i, s, c, 0);
        x[c] = specs[s].kind == PayoffKind::HestonPut ? 0.3 * z : 100.0 * std::exp(0.3 * z);
      }
      const double t = 0.5 * rng.uniform(i, s, d, 1);
      const double f = feature(specs[s], t, x);
      const double g = reward(specs[s], t, x);
      REQUIRE(g == std::max(f, 0.0));
      REQUIRE(g >= 0.0);
    }
  }
}

TEST_CASE("discounting factorizes") {
  const PayoffSpec with_rate(PayoffKind::GeometricBasketCall, 100.0, 0.07);
  const PayoffSpec no_rate(PayoffKind::GeometricBasketCall, 100.0, 0.0);
  const std::vector<double> x{120.0, 95.0, 104.0};
  for (double t : {0.0, 0.25, 1.7})
    REQUIRE(reward(with_rate, t, x) == Approx(std::exp(-0.07 * t) * reward(no_rate, 0.0, x)));
}

TEST_CASE("degenerate basket components collapse the geometric mean") {
  const PayoffSpec p(PayoffKind::GeometricBasketCall, 100.0, 0.0);
  const std::vector<double> x{110.0, -1.0, 120.0};
  REQUIRE(feature(p, 0.0, x) == Approx(-100.0));
  REQUIRE(reward(p, 0.0, x) == 0.0);
}

TEST_CASE("empty state is rejected") {
  const PayoffSpec p(PayoffKind::MaxCall, 100.0, 0.0);
  const std::vector<double> empty;
  REQUIRE_THROWS_AS(reward(p, 0.0, empty), Error);
}
