#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hazard/errors.hpp"
#include "hazard/likelihood.hpp"
#include "hazard/model.hpp"
#include "hazard/parallel.hpp"
#include "hazard/rng.hpp"
#include "hazard/sampler.hpp"
#include "hazard/trainer.hpp"

// Model evaluation: the two-item equivalence family (the observable
// distribution pins down only three probabilities, leaving a one-parameter
// ridge), Monte Carlo KL divergence between a fitted and a true model over
// marginal sequences, pairwise order proportions, and multi-initialization
// stability summaries.

namespace hazard {

// Two-item model theta(s) whose marginal set distribution matches that of
// theta* = [[0, alpha], [0, -alpha]] for every s in the valid interval:
//   w11 = s, w22 = 1/p0 - 1 - s,
//   w21 = (1 - p0 - p2 - p0 s) / (p2 s), w12 = (p0 s - p1) / (p1 (1/p0 - 1 - s))
// where p0 = p(emptyset), p1 = p({1}), p2 = p({2}) under theta*. All four
// weights are positive exactly when p1/p0 < s < (1 - p0 - p2)/p0 (a strict
// subinterval of the w22 > 0 interval (0, 1/p0 - 1)).
inline ParamMatrix prop1_family(double alpha, double s) {
  if (!std::isfinite(alpha)) throw DataError{"alpha must be finite"};
  ParamMatrix star = ParamMatrix::zeros(2);
  star.theta = {0.0, alpha, 0.0, -alpha};
  double p0 = marginal_set_prob(star, ItemSet::of(2, {}));
  double p1 = marginal_sequence_prob(star, Sequence{0});
  double p2 = marginal_sequence_prob(star, Sequence{1});
  double lo = p1 / p0;
  double hi = (1.0 - p0 - p2) / p0;
  if (!(s > lo) || !(s < hi)) {
    throw DataError{"s = " + std::to_string(s) + " outside the valid interval (" +
                    std::to_string(lo) + ", " + std::to_string(hi) + ") for alpha = " +
                    std::to_string(alpha) + " (all four weights must be positive; w22 > 0 " +
                    "alone allows (0, " + std::to_string(1.0 / p0 - 1.0) + "))"};
  }
  double w11 = s;
  double w22 = 1.0 / p0 - 1.0 - s;
  double w21 = (1.0 - p0 - p2 - p0 * s) / (p2 * s);
  double w12 = (p0 * s - p1) / (p1 * (1.0 / p0 - 1.0 - s));
  ParamMatrix out = ParamMatrix::zeros(2);
  out.theta = {std::log(w11), std::log(w12), std::log(w21), std::log(w22)};
  return out;
}

// Monte Carlo KL divergence between the restricted marginal sequence
// distribution of theta_hat and the exact one of theta_true.
struct KlReport {
  double kl = 0.0;
  double stderr_kl = 0.0;
  long long num_draws = 0;
  ItemSet restricted_items;
  long long histogram_support = 0;
  bool negative_flagged = false;  // kl < -3 standard errors (should not happen)
};

namespace detail {

// Sampled sequence reduced to the restricted items (order preserved) and
// re-indexed to the restricted model's 0..v-1 item space.
inline Sequence restrict_sequence(const Sequence& sigma, const std::vector<int>& keep_rank,
                                  int n_hat) {
  Sequence out;
  for (int x : sigma) {
    int rank = keep_rank[static_cast<std::size_t>(x)];
    if (rank >= 0) out.push_back(rank);
  }
  (void)n_hat;
  return out;
}

}  // namespace detail

// Draws marginal sequences from theta_hat, deletes items outside `restrict`
// (preserving order), and compares the empirical histogram against exact
// sequence probabilities under theta_true. Ascending restricted items map
// onto theta_true's items 0..v-1. Zero-count sequences contribute nothing
// (plug-in estimator); the estimate carries ~(support-1)/(2 draws) upward
// bias.
inline KlReport kl_recovery(const ParamMatrix& theta_hat, const ParamMatrix& theta_true,
                            const ItemSet& restrict_items, long long draws, RngState& rng,
                            int threads = 0) {
  validate_finite(theta_hat);
  validate_finite(theta_true);
  if (restrict_items.n() != theta_hat.n) {
    throw DataError{"restriction capacity does not match the fitted model"};
  }
  if (restrict_items.count() != theta_true.n) {
    throw DataError{"restriction keeps " + std::to_string(restrict_items.count()) +
                    " items but the true model has " + std::to_string(theta_true.n)};
  }
  if (draws < 1) throw DataError{"draw count must be positive"};

  std::vector<int> keep_rank(static_cast<std::size_t>(theta_hat.n), -1);
  {
    int rank = 0;
    for (int x : restrict_items.items()) keep_rank[static_cast<std::size_t>(x)] = rank++;
  }

  detail::Weights W = detail::Weights::of(theta_hat);
  int nthreads = resolve_threads(threads);
  constexpr long long kShard = 1 << 16;
  long long num_shards = (draws + kShard - 1) / kShard;
  std::vector<std::map<Sequence, long long>> shard_hist(static_cast<std::size_t>(num_shards));
  parallel_for(num_shards, nthreads, [&](std::int64_t shard) {
    auto& hist = shard_hist[static_cast<std::size_t>(shard)];
    long long begin = shard * kShard;
    long long end = std::min(draws, begin + kShard);
    for (long long d = begin; d < end; ++d) {
      RngState stream = rng.child(static_cast<std::uint64_t>(d));
      Sequence sigma = detail::run_jump_chain(W, stream).sequence;
      ++hist[detail::restrict_sequence(sigma, keep_rank, theta_hat.n)];
    }
  });
  std::map<Sequence, long long> hist;  // integer merge: order-independent
  for (const auto& shard : shard_hist) {
    for (const auto& [sigma, count] : shard) hist[sigma] += count;
  }

  KlReport report;
  report.num_draws = draws;
  report.restricted_items = restrict_items;
  report.histogram_support = static_cast<long long>(hist.size());
  double kl = 0.0;
  double second_moment = 0.0;
  for (const auto& [sigma, count] : hist) {
    double p_hat = static_cast<double>(count) / static_cast<double>(draws);
    double log_ratio = std::log(p_hat) - log_marginal_sequence_prob(theta_true, sigma);
    kl += p_hat * log_ratio;
    second_moment += p_hat * log_ratio * log_ratio;
  }
  report.kl = kl;
  report.stderr_kl = std::sqrt(std::max(0.0, second_moment - kl * kl) /
                               static_cast<double>(draws));
  report.negative_flagged = kl < -3.0 * report.stderr_kl;
  return report;
}

// Among sampled sequences containing both items, the fraction where item_a
// comes first.
struct OrderReport {
  int item_a = 0;
  int item_b = 0;
  double prop_a_first = 0.0;
  long long num_cooccurrences = 0;
  long long num_draws = 0;
  bool defined = true;  // false when the items never co-occurred
};

inline OrderReport order_proportion(const ParamMatrix& theta, int a, int b, long long draws,
                                    RngState& rng, int threads = 0) {
  validate_finite(theta);
  if (a == b) throw DataError{"order proportion needs two distinct items"};
  if (a < 0 || a >= theta.n || b < 0 || b >= theta.n) {
    throw DataError{"item index out of range"};
  }
  if (draws < 1) throw DataError{"draw count must be positive"};
  detail::Weights W = detail::Weights::of(theta);
  constexpr long long kShard = 1 << 16;
  long long num_shards = (draws + kShard - 1) / kShard;
  std::vector<long long> shard_cooc(static_cast<std::size_t>(num_shards), 0);
  std::vector<long long> shard_first(static_cast<std::size_t>(num_shards), 0);
  parallel_for(num_shards, resolve_threads(threads), [&](std::int64_t shard) {
    long long begin = shard * kShard;
    long long end = std::min(draws, begin + kShard);
    long long cooc = 0;
    long long first = 0;
    for (long long d = begin; d < end; ++d) {
      RngState stream = rng.child(static_cast<std::uint64_t>(d));
      Sequence sigma = detail::run_jump_chain(W, stream).sequence;
      int pos_a = -1;
      int pos_b = -1;
      for (std::size_t i = 0; i < sigma.size(); ++i) {
        if (sigma[i] == a) pos_a = static_cast<int>(i);
        if (sigma[i] == b) pos_b = static_cast<int>(i);
      }
      if (pos_a >= 0 && pos_b >= 0) {
        ++cooc;
        if (pos_a < pos_b) ++first;
      }
    }
    shard_cooc[static_cast<std::size_t>(shard)] = cooc;
    shard_first[static_cast<std::size_t>(shard)] = first;
  });
  OrderReport report;
  report.item_a = a;
  report.item_b = b;
  report.num_draws = draws;
  for (long long c : shard_cooc) report.num_cooccurrences += c;
  long long first_total = 0;
  for (long long f : shard_first) first_total += f;
  if (report.num_cooccurrences == 0) {
    report.defined = false;
    report.prop_a_first = 0.0;
  } else {
    report.prop_a_first =
        static_cast<double>(first_total) / static_cast<double>(report.num_cooccurrences);
  }
  return report;
}

// Refit the same data under several seeds and report per-parameter ranges
// plus the spread of every pairwise order proportion across the fits.
struct PairSpread {
  int item_a = 0;
  int item_b = 0;
  double min_prop = 0.0;
  double max_prop = 0.0;
};

struct StabilityReport {
  int num_inits = 0;
  ParamMatrix theta_min;
  ParamMatrix theta_max;
  ParamMatrix theta_range;  // max - min per entry
  std::vector<PairSpread> pair_spread;
};

namespace detail {

// Co-occurrence and a-first counts for every ordered pair in one pass over
// sampled sequences.
inline void pairwise_order_counts(const ParamMatrix& theta, long long draws, RngState& rng,
                                  std::vector<long long>& cooc, std::vector<long long>& first,
                                  int threads) {
  int n = theta.n;
  Weights W = Weights::of(theta);
  cooc.assign(static_cast<std::size_t>(n) * n, 0);
  first.assign(static_cast<std::size_t>(n) * n, 0);
  constexpr long long kShard = 1 << 16;
  long long num_shards = (draws + kShard - 1) / kShard;
  std::vector<std::vector<long long>> shard_cooc(static_cast<std::size_t>(num_shards));
  std::vector<std::vector<long long>> shard_first(static_cast<std::size_t>(num_shards));
  parallel_for(num_shards, threads, [&](std::int64_t shard) {
    auto& sc = shard_cooc[static_cast<std::size_t>(shard)];
    auto& sf = shard_first[static_cast<std::size_t>(shard)];
    sc.assign(static_cast<std::size_t>(n) * n, 0);
    sf.assign(static_cast<std::size_t>(n) * n, 0);
    long long begin = shard * kShard;
    long long end = std::min(draws, begin + kShard);
    for (long long d = begin; d < end; ++d) {
      RngState stream = rng.child(static_cast<std::uint64_t>(d));
      Sequence sigma = run_jump_chain(W, stream).sequence;
      for (std::size_t i = 0; i < sigma.size(); ++i) {
        for (std::size_t j = i + 1; j < sigma.size(); ++j) {
          int a = sigma[i];
          int b = sigma[j];
          std::size_t ab = static_cast<std::size_t>(a) * n + b;
          std::size_t ba = static_cast<std::size_t>(b) * n + a;
          ++sc[ab];
          ++sc[ba];
          ++sf[ab];  // a came first
        }
      }
    }
  });
  for (std::size_t s = 0; s < shard_cooc.size(); ++s) {
    for (std::size_t i = 0; i < cooc.size(); ++i) {
      cooc[i] += shard_cooc[s][i];
      first[i] += shard_first[s][i];
    }
  }
}

}  // namespace detail

// Explicit-seed variant (the num_inits overload derives seed + i).
inline StabilityReport stability_report_with_seeds(const Dataset& data, const FitConfig& config,
                                                   const std::vector<std::uint64_t>& seeds,
                                                   RngState& rng, long long order_draws = 100000) {
  if (seeds.size() < 2) throw DataError{"stability needs at least 2 fits"};
  int n = data.n;
  StabilityReport report;
  report.num_inits = static_cast<int>(seeds.size());
  report.theta_min = ParamMatrix::zeros(n);
  report.theta_max = ParamMatrix::zeros(n);
  report.theta_range = ParamMatrix::zeros(n);

  std::vector<std::vector<double>> props;  // per fit: prop(a first) packed a*n+b
  for (std::size_t run = 0; run < seeds.size(); ++run) {
    FitConfig cfg = config;
    cfg.seed = seeds[run];
    FitReport fit_report = fit(data, cfg);
    const ParamMatrix& theta = fit_report.theta_hat;
    for (std::size_t e = 0; e < theta.theta.size(); ++e) {
      if (run == 0) {
        report.theta_min.theta[e] = theta.theta[e];
        report.theta_max.theta[e] = theta.theta[e];
      } else {
        report.theta_min.theta[e] = std::min(report.theta_min.theta[e], theta.theta[e]);
        report.theta_max.theta[e] = std::max(report.theta_max.theta[e], theta.theta[e]);
      }
    }
    std::vector<long long> cooc;
    std::vector<long long> first;
    // Keyed by the fit's seed, not the run index: identical seeds must yield
    // identical rows.
    RngState stream = rng.child(seeds[run]);
    detail::pairwise_order_counts(theta, order_draws, stream, cooc, first,
                                  resolve_threads(config.threads));
    std::vector<double> prop(cooc.size(), 0.5);  // pairs never seen together: no information
    for (std::size_t i = 0; i < cooc.size(); ++i) {
      if (cooc[i] > 0) prop[i] = static_cast<double>(first[i]) / static_cast<double>(cooc[i]);
    }
    props.push_back(std::move(prop));
  }
  for (std::size_t e = 0; e < report.theta_range.theta.size(); ++e) {
    report.theta_range.theta[e] = report.theta_max.theta[e] - report.theta_min.theta[e];
  }
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      PairSpread spread;
      spread.item_a = a;
      spread.item_b = b;
      std::size_t idx = static_cast<std::size_t>(a) * n + b;
      spread.min_prop = props[0][idx];
      spread.max_prop = props[0][idx];
      for (const auto& prop : props) {
        spread.min_prop = std::min(spread.min_prop, prop[idx]);
        spread.max_prop = std::max(spread.max_prop, prop[idx]);
      }
      report.pair_spread.push_back(spread);
    }
  }
  return report;
}

inline StabilityReport stability_report(const Dataset& data, const FitConfig& config,
                                        int num_inits, RngState& rng,
                                        long long order_draws = 100000) {
  if (num_inits < 2) throw DataError{"stability needs at least 2 fits"};
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(num_inits));
  for (int i = 0; i < num_inits; ++i) {
    seeds[static_cast<std::size_t>(i)] = config.seed + static_cast<std::uint64_t>(i);
  }
  return stability_report_with_seeds(data, config, seeds, rng, order_draws);
}

}  // namespace hazard
