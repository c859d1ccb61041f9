#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "hazard/analysis.hpp"
#include "hazard/errors.hpp"
#include "hazard/likelihood.hpp"
#include "hazard/model.hpp"
#include "hazard/parallel.hpp"
#include "hazard/perm_mcmc.hpp"
#include "hazard/rng.hpp"
#include "hazard/sampler.hpp"
#include "hazard/trainer.hpp"

// Synthetic studies: recovery of a two-item model as unrelated items are
// added (occurrence counts acting as a proxy for the unobserved observation
// time), and guided-versus-uniform proposal quality for the gradient
// estimator.

namespace hazard {

// --- Two-item recovery with extra independent items ---

struct KlSweepPoint {
  int num_extra = 0;
  double kl_mean = 0.0;
  double kl_stderr = 0.0;
};

struct TwoItemExperimentResult {
  std::vector<KlSweepPoint> marginal;  // one row per extra-item count
  double baseline_kl_mean = 0.0;       // fits given the true observation times
  double baseline_kl_stderr = 0.0;
};

struct TwoItemExperimentConfig {
  double alpha = 4.0;                     // stiffness of the true two-item model
  std::vector<int> extra_counts{0, 5, 25};
  int replicates = 8;
  int num_samples = 500;                  // dataset size per fit
  long long kl_draws = 1000000;
  FitConfig fit;                          // seed is overridden per fit
  std::uint64_t seed = 0;
};

namespace detail {

inline ParamMatrix two_item_truth(double alpha) {
  ParamMatrix star = ParamMatrix::zeros(2);
  star.theta = {0.0, alpha, 0.0, -alpha};
  return star;
}

// Truth plus `extra` independent items with base rates drawn uniformly from
// [-4, -2]; extras neither influence nor are influenced by anything.
inline ParamMatrix with_extra_items(const ParamMatrix& truth, int extra, RngState& rng) {
  int n = truth.n + extra;
  ParamMatrix out = ParamMatrix::zeros(n);
  for (int i = 0; i < truth.n; ++i) {
    for (int j = 0; j < truth.n; ++j) out.at(i, j) = truth.at(i, j);
  }
  for (int j = truth.n; j < n; ++j) out.at(j, j) = rng.next_uniform(-4.0, -2.0);
  return out;
}

inline void mean_and_stderr(const std::vector<double>& values, double& mean, double& se) {
  mean = pairwise_sum(values) / static_cast<double>(values.size());
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    double d = values[i] - mean;
    sq[i] = d * d;
  }
  double var = values.size() > 1
                   ? pairwise_sum(sq) / static_cast<double>(values.size() - 1)
                   : 0.0;
  se = std::sqrt(var / static_cast<double>(values.size()));
}

}  // namespace detail

// For each replicate and each extra-item count: embed the two-item truth in
// a larger model with independent extras, sample a dataset without times,
// fit, and measure KL of the fitted model restricted to the two original
// items against the truth. The baseline fits the two-item data with its
// true observation times attached.
inline TwoItemExperimentResult two_item_recovery_experiment(const TwoItemExperimentConfig& config) {
  if (config.replicates < 1) throw DataError{"need at least one replicate"};
  ParamMatrix truth = detail::two_item_truth(config.alpha);
  RngState root(config.seed);
  TwoItemExperimentResult result;

  std::vector<double> baseline_kls;
  for (int rep = 0; rep < config.replicates; ++rep) {
    RngState data_stream = root.child(0, static_cast<std::uint64_t>(rep));
    Dataset data = generate_dataset(truth, config.num_samples, /*with_times=*/true, data_stream,
                                    config.fit.threads);
    FitConfig cfg = config.fit;
    cfg.mode = FitMode::given_times;
    cfg.seed = root.child(1, static_cast<std::uint64_t>(rep)).next_u64();
    FitReport fit_report = fit(data, cfg);
    RngState kl_stream = root.child(2, static_cast<std::uint64_t>(rep));
    KlReport kl = kl_recovery(fit_report.theta_hat, truth, ItemSet::of(2, {0, 1}),
                              config.kl_draws, kl_stream, config.fit.threads);
    baseline_kls.push_back(kl.kl);
  }
  detail::mean_and_stderr(baseline_kls, result.baseline_kl_mean, result.baseline_kl_stderr);

  for (std::size_t im = 0; im < config.extra_counts.size(); ++im) {
    int extra = config.extra_counts[im];
    if (extra < 0) throw DataError{"extra-item count must be nonnegative"};
    std::vector<double> kls;
    for (int rep = 0; rep < config.replicates; ++rep) {
      RngState extras_stream = root.child(3, im, static_cast<std::uint64_t>(rep));
      ParamMatrix full = detail::with_extra_items(truth, extra, extras_stream);
      RngState data_stream = root.child(4, im, static_cast<std::uint64_t>(rep));
      Dataset data = generate_dataset(full, config.num_samples, /*with_times=*/false, data_stream,
                                      config.fit.threads);
      FitConfig cfg = config.fit;
      cfg.mode = FitMode::marginal;
      cfg.seed = root.child(5, im, static_cast<std::uint64_t>(rep)).next_u64();
      FitReport fit_report = fit(data, cfg);
      ItemSet restrict_items = ItemSet::of(2 + extra, {0, 1});
      RngState kl_stream = root.child(6, im, static_cast<std::uint64_t>(rep));
      KlReport kl = kl_recovery(fit_report.theta_hat, truth, restrict_items, config.kl_draws,
                                kl_stream, config.fit.threads);
      kls.push_back(kl.kl);
    }
    KlSweepPoint point;
    point.num_extra = extra;
    detail::mean_and_stderr(kls, point.kl_mean, point.kl_stderr);
    result.marginal.push_back(point);
  }
  return result;
}

// --- Guided versus uniform proposals for the gradient estimator ---

struct ProposalErrorRow {
  int num_mcmc_samples = 0;
  double guided_mean_error = 0.0;
  double guided_stderr = 0.0;
  double uniform_mean_error = 0.0;
  double uniform_stderr = 0.0;
};

struct ProposalComparisonConfig {
  int num_items = 20;
  std::vector<int> sample_counts{5, 10, 20, 30, 40, 50};
  int replicates = 20;
  int burn_in = 10;
  std::uint64_t seed = 0;
};

namespace detail {

inline double grad_l2_error(const GradMatrix& estimate, const GradMatrix& exact) {
  double sum = 0.0;
  for (std::size_t i = 0; i < estimate.g.size(); ++i) {
    double d = estimate.g[i] - exact.g[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

// Random instance: moderate base rates, weak interactions, and an observed
// set drawn from the model (redrawn until 2 <= |S| <= 6 so the exact
// gradient stays enumerable).
inline void random_instance(int n, RngState& rng, ParamMatrix& theta, ItemSet& observed) {
  theta = ParamMatrix::zeros(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      theta.at(i, j) = i == j ? rng.next_uniform(-2.0, 0.0) : rng.next_uniform(-0.5, 0.5);
    }
  }
  Weights W = Weights::of(theta);
  for (std::uint64_t attempt = 0;; ++attempt) {
    RngState stream = rng.child(attempt);
    Sequence sigma = run_jump_chain(W, stream).sequence;
    if (sigma.size() >= 2 && sigma.size() <= 6) {
      observed = to_set(n, sigma);
      return;
    }
  }
}

}  // namespace detail

// Paired comparison: each replicate fixes one (theta, S) instance with its
// exact gradient, then both proposals estimate the gradient at every chain
// length. Rows report the mean L2 error across replicates.
inline std::vector<ProposalErrorRow> proposal_comparison_experiment(
    const ProposalComparisonConfig& config) {
  if (config.replicates < 1) throw DataError{"need at least one replicate"};
  RngState root(config.seed);

  struct Instance {
    ParamMatrix theta;
    ItemSet observed;
    GradMatrix exact;
  };
  std::vector<Instance> instances;
  for (int rep = 0; rep < config.replicates; ++rep) {
    Instance inst;
    RngState stream = root.child(0, static_cast<std::uint64_t>(rep));
    detail::random_instance(config.num_items, stream, inst.theta, inst.observed);
    inst.exact = grad_log_marginal_set_exact(inst.theta, inst.observed, 720);
    instances.push_back(std::move(inst));
  }

  std::vector<ProposalErrorRow> rows;
  for (std::size_t im = 0; im < config.sample_counts.size(); ++im) {
    ProposalErrorRow row;
    row.num_mcmc_samples = config.sample_counts[im];
    std::vector<double> guided_errors;
    std::vector<double> uniform_errors;
    for (int rep = 0; rep < config.replicates; ++rep) {
      const Instance& inst = instances[static_cast<std::size_t>(rep)];
      ChainConfig chain;
      chain.num_samples = config.sample_counts[im];
      chain.burn_in = config.burn_in;
      for (int prop = 0; prop < 2; ++prop) {
        chain.proposal = prop == 0 ? Proposal::guided : Proposal::uniform;
        RngState stream =
            root.child(1, im, static_cast<std::uint64_t>(rep) * 2 + static_cast<std::uint64_t>(prop));
        GradMatrix estimate = estimate_grad_log_set(inst.theta, inst.observed, chain, stream);
        double err = detail::grad_l2_error(estimate, inst.exact);
        (prop == 0 ? guided_errors : uniform_errors).push_back(err);
      }
    }
    detail::mean_and_stderr(guided_errors, row.guided_mean_error, row.guided_stderr);
    detail::mean_and_stderr(uniform_errors, row.uniform_mean_error, row.uniform_stderr);
    rows.push_back(row);
  }
  return rows;
}

// --- Order proportions across the two-item equivalence family ---

struct FamilyOrderRow {
  double s = 0.0;
  double prop_first_item = 0.0;  // item 1 observed before item 2
  double stderr_prop = 0.0;
};

// Sweeps s over an inner grid of the valid interval and reports the
// proportion of co-occurrences with item 1 first; every model in the family
// has identical marginal set probabilities, yet this proportion spans
// nearly the whole of (0, 1).
inline std::vector<FamilyOrderRow> family_order_sweep(double alpha, int grid_points,
                                                      long long draws, RngState& rng,
                                                      int threads = 0) {
  if (grid_points < 2) throw DataError{"need at least two grid points"};
  ParamMatrix star = detail::two_item_truth(alpha);
  double p0 = marginal_set_prob(star, ItemSet::of(2, {}));
  double p1 = marginal_sequence_prob(star, Sequence{0});
  double p2 = marginal_sequence_prob(star, Sequence{1});
  double lo = p1 / p0;
  double hi = (1.0 - p0 - p2) / p0;
  std::vector<FamilyOrderRow> rows;
  for (int k = 0; k < grid_points; ++k) {
    double frac = (static_cast<double>(k) + 1.0) / (static_cast<double>(grid_points) + 1.0);
    double s = lo + frac * (hi - lo);
    ParamMatrix theta = prop1_family(alpha, s);
    RngState stream = rng.child(static_cast<std::uint64_t>(k));
    OrderReport report = order_proportion(theta, 0, 1, draws, stream, threads);
    FamilyOrderRow row;
    row.s = s;
    row.prop_first_item = report.prop_a_first;
    if (report.num_cooccurrences > 0) {
      row.stderr_prop = std::sqrt(report.prop_a_first * (1.0 - report.prop_a_first) /
                                  static_cast<double>(report.num_cooccurrences));
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace hazard
