#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "hazard/errors.hpp"

// Hypoexponential distribution: the sum of independent exponentials with
// arbitrary positive rates. The CDF is evaluated by uniformization of the
// underlying pure-birth chain: with clock rate L = max rate and the
// substochastic one-step matrix P at that clock (stage j keeps its mass with
// probability 1 - rate_j/L, passing the rest onward), the absorbed mass after
// m uniformized steps is A_m and
//
//   F(y) = sum_m Poisson(m; L y) A_m.
//
// Every quantity in the sum is nonnegative, so the evaluation is free of
// cancellation for any rate pattern -- including repeated or nearly repeated
// rates, where the classical partial-fraction form loses all precision. The
// truncation error is controlled through the Poisson tail.

namespace hazard {
namespace detail {

inline void check_rates(std::span<const double> rates) {
  if (rates.empty()) throw DataError{"hypoexponential requires at least one rate"};
  for (double r : rates) {
    if (!(r > 0.0) || !std::isfinite(r)) {
      throw DataError{"hypoexponential rates must be positive and finite"};
    }
  }
}

// Core uniformized evaluation; expects validated rates and finite y > 0.
inline double uniformized_hypoexp_cdf(double y, std::span<const double> rates) {
  const std::size_t k = rates.size();
  const double max_rate = *std::max_element(rates.begin(), rates.end());
  const double a = max_rate * y;  // mean number of uniformized steps
  if (!(a < 5e7)) {
    throw NumericalError{"hypoexponential evaluation out of range: rate * y = " +
                         std::to_string(a)};
  }

  // Enough terms that the Poisson(a) tail is far below double precision, and
  // never fewer than the k steps needed to reach absorption at all.
  std::size_t terms = static_cast<std::size_t>(a + 12.0 * std::sqrt(a + 1.0) + 30.0);
  terms = std::max(terms, k + 10);

  std::vector<double> u(k, 0.0);  // transient stage occupancy after m steps
  u[0] = 1.0;
  double absorbed = 0.0;
  double cdf = 0.0;
  const double log_a = std::log(a);
  for (std::size_t m = 0; m <= terms; ++m) {
    double log_weight = -a;
    if (m > 0) {
      double dm = static_cast<double>(m);
      log_weight += dm * log_a - std::lgamma(dm + 1.0);
    }
    cdf += std::exp(log_weight) * absorbed;

    absorbed += u[k - 1] * (rates[k - 1] / max_rate);
    for (std::size_t j = k - 1; j > 0; --j) {
      u[j] = u[j] * (1.0 - rates[j] / max_rate) + u[j - 1] * (rates[j - 1] / max_rate);
    }
    u[0] *= 1.0 - rates[0] / max_rate;
  }
  return std::min(cdf, 1.0);
}

}  // namespace detail

// CDF at y >= 0 of the sum of independent Exp(rates[i]) variables. The rates
// are sorted internally, so the result is bitwise independent of the order in
// which callers list the stages (the distribution itself is symmetric).
inline double hypoexp_cdf(double y, std::span<const double> rates) {
  detail::check_rates(rates);
  if (!(y >= 0.0)) throw DataError{"hypoexponential CDF requires y >= 0"};
  if (y == 0.0) return 0.0;
  if (std::isinf(y)) return 1.0;
  if (rates.size() == 1) return -std::expm1(-rates[0] * y);
  std::vector<double> sorted(rates.begin(), rates.end());
  std::sort(sorted.begin(), sorted.end());
  return detail::uniformized_hypoexp_cdf(y, sorted);
}

inline double hypoexp_cdf(double y, const std::vector<double>& rates) {
  return hypoexp_cdf(y, std::span<const double>{rates});
}

// Gradient of the CDF with respect to each rate, from the exact identity
//
//   dF/drate_m (y) = (F(y) - F_{+m}(y)) / rate_m,
//
// where F_{+m} is the CDF of the same sum with one extra independent
// Exp(rate_m) stage appended (differentiate the Laplace transform
// (1/s) prod_i rate_i/(rate_i + s) in rate_m and read the result back as a
// distribution). Both terms are plain CDF evaluations, so the gradient
// inherits the uniformized evaluation's stability at close or equal rates,
// and it is nonnegative because the extra stage can only delay the sum.
inline std::vector<double> hypoexp_cdf_grad(double y, std::span<const double> rates) {
  detail::check_rates(rates);
  if (!(y >= 0.0)) throw DataError{"hypoexponential CDF requires y >= 0"};
  const std::size_t k = rates.size();
  std::vector<double> grad(k, 0.0);
  if (y == 0.0 || std::isinf(y)) return grad;
  if (k == 1) {
    grad[0] = y * std::exp(-rates[0] * y);
    return grad;
  }
  const double base = hypoexp_cdf(y, rates);
  std::vector<double> augmented(rates.begin(), rates.end());
  augmented.push_back(0.0);
  for (std::size_t m = 0; m < k; ++m) {
    augmented.back() = rates[m];
    grad[m] = std::max(0.0, base - hypoexp_cdf(y, augmented)) / rates[m];
  }
  return grad;
}

inline std::vector<double> hypoexp_cdf_grad(double y, const std::vector<double>& rates) {
  return hypoexp_cdf_grad(y, std::span<const double>{rates});
}

}  // namespace hazard
