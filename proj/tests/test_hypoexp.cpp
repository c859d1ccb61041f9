#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "hazard/errors.hpp"
#include "hazard/hypoexp.hpp"
#include "hazard/rng.hpp"
#include "oracles.hpp"

using hazard::hypoexp_cdf;
using hazard::hypoexp_cdf_grad;

TEST(HypoexpCdf, SingleRateIsExponential) {
  EXPECT_NEAR(hypoexp_cdf(1.0, std::vector<double>{2.0}), 1.0 - std::exp(-2.0), 1e-15);
  EXPECT_DOUBLE_EQ(hypoexp_cdf(0.0, std::vector<double>{2.0}), 0.0);
}

TEST(HypoexpCdf, MatchesFrozenTwoRateValue) {
  // rates {1, 2} at y = 1: (1 - e^-1)^2
  EXPECT_NEAR(hypoexp_cdf(1.0, std::vector<double>{1.0, 2.0}), 0.39957640089372804870,
              1e-14);
}

TEST(HypoexpCdf, MatchesFrozenThreeRateValue) {
  // rates {1, 2, 3} at y = 0.7: 1 - 3e^-0.7 + 3e^-1.4 - e^-2.1
  EXPECT_NEAR(hypoexp_cdf(0.7, std::vector<double>{1.0, 2.0, 3.0}), 0.12757855219760897649,
              1e-14);
}

TEST(HypoexpCdf, MatchesPartialFractionOracleOnRandomRates) {
  hazard::RngState rng(101);
  for (int trial = 0; trial < 50; ++trial) {
    int r = 2 + static_cast<int>(rng.next_below(4));
    std::vector<double> rates;
    for (int i = 0; i < r; ++i) rates.push_back(rng.next_uniform(0.2, 5.0));
    double y = rng.next_uniform(0.05, 4.0);
    EXPECT_NEAR(hypoexp_cdf(y, rates), oracles::ref_hypoexp_cdf(y, rates), 1e-9);
  }
}

TEST(HypoexpCdf, OrderInvariant) {
  std::vector<double> a{0.7, 2.1, 1.3};
  std::vector<double> b{2.1, 1.3, 0.7};
  EXPECT_DOUBLE_EQ(hypoexp_cdf(1.7, a), hypoexp_cdf(1.7, b));
}

TEST(HypoexpCdf, NearEqualRatesApproachErlang) {
  // rate 1 twice at y = 1: Erlang(2, 1) = 1 - 2e^-1
  const double erlang = 0.26424111765711535681;
  EXPECT_NEAR(hypoexp_cdf(1.0, std::vector<double>{1.0, 1.0 + 1e-9}), erlang, 1e-6);
  EXPECT_NEAR(hypoexp_cdf(1.0, std::vector<double>{1.0, 1.0}), erlang, 1e-6);
  // rate 2 three times at y = 0.9: Erlang(3, 2)
  EXPECT_NEAR(hypoexp_cdf(0.9, std::vector<double>{2.0, 2.0, 2.0}), 0.26937891406058750073,
              1e-6);
  EXPECT_NEAR(hypoexp_cdf(0.9, std::vector<double>{2.0, 2.0 + 1e-10, 2.0 - 1e-10}),
              oracles::ref_erlang_cdf(0.9, 2.0, 3), 1e-6);
}

TEST(HypoexpCdf, MonotoneAndBounded) {
  std::vector<double> rates{0.5, 1.5, 3.0};
  double prev = 0.0;
  for (double y = 0.0; y <= 10.0; y += 0.25) {
    double f = hypoexp_cdf(y, rates);
    EXPECT_GE(f, prev - 1e-12);
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 1.0 + 1e-12);
    prev = f;
  }
}

TEST(HypoexpCdf, RejectsBadRates) {
  EXPECT_THROW(hypoexp_cdf(1.0, std::vector<double>{}), hazard::DataError);
  EXPECT_THROW(hypoexp_cdf(1.0, std::vector<double>{1.0, -2.0}), hazard::DataError);
  EXPECT_THROW(hypoexp_cdf(1.0, std::vector<double>{0.0}), hazard::DataError);
}

TEST(HypoexpGrad, MatchesFiniteDifferences) {
  hazard::RngState rng(202);
  for (int trial = 0; trial < 30; ++trial) {
    int r = 1 + static_cast<int>(rng.next_below(4));
    std::vector<double> rates;
    for (int i = 0; i < r; ++i) rates.push_back(rng.next_uniform(0.3, 4.0));
    double y = rng.next_uniform(0.1, 3.0);
    std::vector<double> grad = hypoexp_cdf_grad(y, rates);
    ASSERT_EQ(grad.size(), rates.size());
    const double h = 1e-6;
    for (std::size_t m = 0; m < rates.size(); ++m) {
      std::vector<double> up = rates;
      std::vector<double> down = rates;
      up[m] += h;
      down[m] -= h;
      double fd = (hypoexp_cdf(y, up) - hypoexp_cdf(y, down)) / (2.0 * h);
      EXPECT_NEAR(grad[m], fd, 1e-6 * std::max(1.0, std::abs(fd)))
          << "trial " << trial << " component " << m;
    }
  }
}

TEST(HypoexpGrad, GradSignsMakeSense) {
  // Raising any rate makes the sum of stage times stochastically smaller, so
  // the CDF at fixed y can only increase.
  std::vector<double> rates{1.0, 2.5};
  std::vector<double> grad = hypoexp_cdf_grad(1.3, rates);
  for (double g : grad) EXPECT_GT(g, 0.0);
}
