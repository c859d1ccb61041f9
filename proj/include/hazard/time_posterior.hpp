#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hazard/errors.hpp"
#include "hazard/likelihood.hpp"
#include "hazard/model.hpp"
#include "hazard/parallel.hpp"
#include "hazard/rng.hpp"
#include "hazard/special_functions.hpp"

// Posterior of the Exp(1) observation time given what was observed.
//
// For m iid background items with shared log-rate theta_plus (weight
// w = exp(theta_plus)) of which k were observed, the posterior density is
// proportional to (1 - e^{-tw})^k e^{-t(1 + (m-k)w)}. Substituting
// u = 1 - e^{-tw} turns it into u ~ Beta(k+1, 1/w + m - k), so with
// alpha = 1/w + (1-r)m and beta = rm + 1 (r = k/m) the moments are exact
// digamma/trigamma expressions. General (interacting, block-diagonal)
// models get a gridded density instead.

namespace hazard {

struct PosteriorSummary {
  double mean = 0.0;
  double variance = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double w_plus = 0.0;
};

inline PosteriorSummary iid_posterior_summary(double theta_plus, int m, int k) {
  if (!std::isfinite(theta_plus)) throw DataError{"background log-rate must be finite"};
  if (m < 1) throw DataError{"background item count must be at least 1"};
  if (k < 0 || k > m) {
    throw DataError{"observed count " + std::to_string(k) + " outside [0, " +
                    std::to_string(m) + "]"};
  }
  double w = std::exp(theta_plus);
  double r = static_cast<double>(k) / m;
  PosteriorSummary out;
  out.w_plus = w;
  out.alpha = 1.0 / w + (1.0 - r) * m;
  out.beta = r * m + 1.0;
  // E[t] = E[-log(1-u)]/w and Var[t] = Var[log(1-u)]/w^2 for u ~ Beta(beta, alpha).
  out.mean = (digamma(out.alpha + out.beta) - digamma(out.alpha)) / w;
  out.variance = (trigamma(out.alpha) - trigamma(out.alpha + out.beta)) / (w * w);
  return out;
}

// Closed-form constants of the posterior-concentration bound at horizon
// t_star: C1 = e^{w t*}/w and C2 = (2 - e^{-w t*}) / (w^2 e^{-w t*}).
struct BoundConstants {
  double c1 = 0.0;
  double c2 = 0.0;
  double w_plus = 0.0;
  double t_star = 0.0;
};

inline BoundConstants bound_constants(double theta_plus, double t_star) {
  if (!std::isfinite(theta_plus)) throw DataError{"background log-rate must be finite"};
  if (!(t_star > 0.0)) throw DataError{"horizon t_star must be positive"};
  BoundConstants out;
  out.w_plus = std::exp(theta_plus);
  out.t_star = t_star;
  out.c1 = std::exp(out.w_plus * t_star) / out.w_plus;
  out.c2 = (2.0 - std::exp(-out.w_plus * t_star)) /
           (out.w_plus * out.w_plus * std::exp(-out.w_plus * t_star));
  return out;
}

// Uniform grid on [0, t_max]. The default horizon leaves < 1e-9 prior tail
// mass; the densities handled here are prior-dominated in the tail.
inline std::vector<double> make_time_grid(double t_max = 21.0, int points = 4000) {
  if (!(t_max > 0.0) || points < 2) throw DataError{"time grid needs t_max > 0 and >= 2 points"};
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    grid[static_cast<std::size_t>(i)] = t_max * static_cast<double>(i) / (points - 1);
  }
  return grid;
}

// Normalized posterior density of t over a grid: p(t | sample) proportional
// to p(sample | t; theta) e^{-t}, with p(sample | t) factorized over theta's
// declared blocks and normalized by trapezoid quadrature on the grid.
inline std::vector<std::pair<double, double>> block_posterior_density(
    const ParamMatrix& theta, const ItemSet& sample, const std::vector<double>& t_grid,
    int enum_cap = kDefaultEnumCap) {
  if (sample.n() != theta.n) throw DataError{"set capacity does not match model size"};
  if (t_grid.size() < 2) throw DataError{"time grid needs at least 2 points"};
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (!(t_grid[i] >= 0.0)) throw DataError{"time grid must be nonnegative"};
    if (i > 0 && !(t_grid[i] > t_grid[i - 1])) throw DataError{"time grid must be increasing"};
  }
  validate_finite(theta);

  // Hoist per-block models out of the grid loop.
  std::vector<std::pair<int, int>> blocks = effective_blocks(theta);
  struct BlockCtx {
    detail::Weights W;
    Sequence items;  // block-local indices of the sample's intersection
  };
  std::vector<BlockCtx> ctx;
  ctx.reserve(blocks.size());
  for (auto [first, last] : blocks) {
    BlockCtx c;
    ParamMatrix sub = submatrix(theta, first, last);
    c.W = detail::Weights::of(sub);
    for (int i = first; i <= last; ++i) {
      if (sample.contains(i)) c.items.push_back(i - first);
    }
    detail::check_enum_cap(static_cast<int>(c.items.size()), enum_cap, "block intersection");
    ctx.push_back(std::move(c));
  }

  std::vector<std::pair<double, double>> out(t_grid.size());
  detail::PrefixScratch scratch;
  for (std::size_t g = 0; g < t_grid.size(); ++g) {
    double t = t_grid[g];
    double log_val = -t;  // the Exp(1) prior factor
    for (const BlockCtx& c : ctx) {
      detail::LogSumExp lse;
      Sequence sigma = c.items;
      do {
        lse.add(detail::log_partial_given_time(c.W, sigma, t, scratch));
      } while (std::next_permutation(sigma.begin(), sigma.end()));
      log_val += lse.value();
    }
    out[g] = {t, std::exp(log_val)};
  }

  double norm = 0.0;
  for (std::size_t g = 1; g < out.size(); ++g) {
    norm += 0.5 * (out[g].second + out[g - 1].second) * (out[g].first - out[g - 1].first);
  }
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw NumericalError{"posterior density normalizer is not positive and finite"};
  }
  for (auto& point : out) point.second /= norm;
  return out;
}

// Trapezoid mean and variance of a gridded density.
inline std::pair<double, double> grid_moments(
    const std::vector<std::pair<double, double>>& density) {
  if (density.size() < 2) throw DataError{"density grid needs at least 2 points"};
  double m1 = 0.0;
  double m2 = 0.0;
  for (std::size_t g = 1; g < density.size(); ++g) {
    double dt = density[g].first - density[g - 1].first;
    m1 += 0.5 * dt *
          (density[g].first * density[g].second +
           density[g - 1].first * density[g - 1].second);
    m2 += 0.5 * dt *
          (density[g].first * density[g].first * density[g].second +
           density[g - 1].first * density[g - 1].first * density[g - 1].second);
  }
  return {m1, m2 - m1 * m1};
}

// Two-item interaction block with off-diagonals fixed at gamma and the
// shared diagonal solved (bisection) so each item's marginal observation
// frequency equals target_freq. Frequencies are exact four-subset sums, so
// the calibration inherits no Monte Carlo error.
inline ParamMatrix calibrate_block_diagonals(double gamma, double target_freq) {
  if (!std::isfinite(gamma)) throw DataError{"interaction strength must be finite"};
  if (!(target_freq > 0.0) || !(target_freq < 1.0)) {
    throw DataError{"target frequency must lie in (0, 1)"};
  }
  auto frequency = [&](double diag) {
    ParamMatrix block = ParamMatrix::zeros(2);
    block.theta = {diag, gamma, gamma, diag};
    return marginal_set_prob(block, ItemSet::of(2, {0})) +
           marginal_set_prob(block, ItemSet::of(2, {0, 1}));
  };
  double lo = -20.0;
  double hi = 10.0;
  if (frequency(lo) > target_freq || frequency(hi) < target_freq) {
    throw DataError{"no shared diagonal in [-20, 10] attains the target frequency"};
  }
  double mid = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    mid = 0.5 * (lo + hi);
    double f = frequency(mid);
    if (std::abs(f - target_freq) <= 1e-12) break;
    if (f < target_freq) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-14) break;
  }
  ParamMatrix block = ParamMatrix::zeros(2);
  block.theta = {mid, gamma, gamma, mid};
  block.blocks = {{0, 1}};
  return block;
}

// One row of a posterior-variance sweep over the background size m.
struct VarianceSweepRow {
  int m = 0;
  double mean_variance = 0.0;
  double stderr_variance = 0.0;
  double mean_abs_mean_error = 0.0;  // mean |posterior mean - true t*|
};

// For each m: num_pairs draws of (t* ~ Exp(1), k ~ Binomial(m, 1-e^{-w t*}))
// and the Beta-form posterior variance at that (m, k). Streams are keyed by
// (m index, pair index), so rows are reproducible independently of schedule.
inline std::vector<VarianceSweepRow> posterior_variance_sweep(double theta_plus,
                                                              const std::vector<int>& m_values,
                                                              int num_pairs, RngState& rng,
                                                              int threads = 0) {
  if (num_pairs < 2) throw DataError{"variance sweep needs at least 2 sampled pairs"};
  if (m_values.empty()) throw DataError{"variance sweep needs at least one m"};
  double w = std::exp(theta_plus);
  std::vector<VarianceSweepRow> rows(m_values.size());
  for (std::size_t im = 0; im < m_values.size(); ++im) {
    int m = m_values[im];
    if (m < 1) throw DataError{"background item count must be at least 1"};
    std::vector<double> variances(static_cast<std::size_t>(num_pairs));
    std::vector<double> mean_errors(static_cast<std::size_t>(num_pairs));
    parallel_for(num_pairs, resolve_threads(threads), [&](std::int64_t i) {
      RngState stream = rng.child(static_cast<std::uint64_t>(im), static_cast<std::uint64_t>(i));
      double t_star = stream.next_exp(1.0);
      double p = -std::expm1(-w * t_star);
      int k = 0;
      for (int item = 0; item < m; ++item) {
        if (stream.next_unit() < p) ++k;
      }
      PosteriorSummary summary = iid_posterior_summary(theta_plus, m, k);
      variances[static_cast<std::size_t>(i)] = summary.variance;
      mean_errors[static_cast<std::size_t>(i)] = std::abs(summary.mean - t_star);
    });
    double mean = pairwise_sum(variances) / num_pairs;
    std::vector<double> sq(variances.size());
    for (std::size_t i = 0; i < variances.size(); ++i) {
      double d = variances[i] - mean;
      sq[i] = d * d;
    }
    double var = pairwise_sum(sq) / (num_pairs - 1);
    rows[im].m = m;
    rows[im].mean_variance = mean;
    rows[im].stderr_variance = std::sqrt(var / num_pairs);
    rows[im].mean_abs_mean_error = pairwise_sum(mean_errors) / num_pairs;
  }
  return rows;
}

// Least-squares slope of log(y) against log(x); the sweep's scaling summary.
inline double log_log_slope(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) throw DataError{"slope needs at least 2 points"};
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (auto [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0)) throw DataError{"log-log slope needs positive coordinates"};
    double lx = std::log(x);
    double ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  double num = points.size() * sxy - sx * sy;
  double den = points.size() * sxx - sx * sx;
  if (den == 0.0) throw DataError{"log-log slope undefined: all x equal"};
  return num / den;
}

// Mean gridded posterior variance when the m background items form coupled
// pairs (off-diagonals gamma, diagonals calibrated to target_freq). Each of
// num_samples draws samples t* ~ Exp(1) and a per-block observed subset from
// the exact conditional p(block subset | t*), then takes the variance of the
// gridded posterior given the full observed set. gamma = 0 reproduces the
// iid background.
struct BlockVarianceResult {
  double mean_variance = 0.0;
  double stderr_variance = 0.0;
};

inline BlockVarianceResult block_variance_experiment(double gamma, double target_freq, int m,
                                                     int num_samples, RngState& rng,
                                                     const std::vector<double>& t_grid,
                                                     int threads = 0) {
  if (m < 2 || m % 2 != 0) throw DataError{"paired background needs an even m >= 2"};
  if (num_samples < 2) throw DataError{"need at least 2 sampled sets"};
  ParamMatrix block = calibrate_block_diagonals(gamma, target_freq);
  std::vector<ParamMatrix> copies(static_cast<std::size_t>(m / 2), block);
  ParamMatrix full = make_block_diagonal(copies);

  // Exact conditional subset weights per block given t, for categorical draws.
  detail::Weights Wb = detail::Weights::of(block);
  std::vector<ItemSet> block_subsets = {ItemSet::of(2, {}), ItemSet::of(2, {0}),
                                        ItemSet::of(2, {1}), ItemSet::of(2, {0, 1})};

  std::vector<double> variances(static_cast<std::size_t>(num_samples));
  parallel_for(num_samples, resolve_threads(threads), [&](std::int64_t i) {
    RngState stream = rng.child(static_cast<std::uint64_t>(i));
    double t_star = stream.next_exp(1.0);
    detail::PrefixScratch scratch;
    double probs[4];
    for (int c = 0; c < 4; ++c) {
      detail::LogSumExp lse;
      Sequence sigma = block_subsets[static_cast<std::size_t>(c)].items();
      do {
        lse.add(detail::log_partial_given_time(Wb, sigma, t_star, scratch));
      } while (std::next_permutation(sigma.begin(), sigma.end()));
      probs[c] = std::exp(lse.value());
    }
    double total = probs[0] + probs[1] + probs[2] + probs[3];
    ItemSet sample{m};
    for (int b = 0; b < m / 2; ++b) {
      double u = stream.next_unit() * total;
      int pick = 3;
      for (int c = 0; c < 4; ++c) {
        u -= probs[c];
        if (u < 0.0) { pick = c; break; }
      }
      for (int local : block_subsets[static_cast<std::size_t>(pick)].items()) {
        sample.add(2 * b + local);
      }
    }
    auto density = block_posterior_density(full, sample, t_grid);
    variances[static_cast<std::size_t>(i)] = grid_moments(density).second;
  });

  BlockVarianceResult out;
  out.mean_variance = pairwise_sum(variances) / num_samples;
  std::vector<double> sq(variances.size());
  for (std::size_t i = 0; i < variances.size(); ++i) {
    double d = variances[i] - out.mean_variance;
    sq[i] = d * d;
  }
  out.stderr_variance = std::sqrt(pairwise_sum(sq) / (num_samples - 1) / num_samples);
  return out;
}

}  // namespace hazard
