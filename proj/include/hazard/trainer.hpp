#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "hazard/errors.hpp"
#include "hazard/likelihood.hpp"
#include "hazard/model.hpp"
#include "hazard/parallel.hpp"
#include "hazard/perm_mcmc.hpp"
#include "hazard/rng.hpp"

// Maximizes the L1-regularized mean log-likelihood
//
//   F(D; theta) = (1/N) sum_d log p(S_d; theta) - lambda * sum_{i != j} |theta_ij|
//
// by proximal AdaGrad ascent: per-coordinate steps eta * g / sqrt(G + eps)
// with G the running sum of squared gradients, then exact soft-thresholding
// of the off-diagonals. Training runs in three phases: a diagonal warm start
// from item frequencies, diag_pretrain_epochs of diagonal-only epochs, then
// the main epochs after the off-diagonals are initialized uniformly at
// random. The likelihood gradient per sample comes from the permutation
// chain (estimate_grad_log_set) in marginal mode, or exact enumeration in
// given-times mode.
//
// Reproducibility: everything random derives from config.seed via child
// streams keyed by purpose and logical indices — (0) off-diagonal init,
// (1, epoch, sample) gradient chains, (2, epoch, sample) trace estimation —
// so identical (data, config) gives identical reports at any thread count.

namespace hazard {

enum class FitMode { marginal, given_times, diagonal_only };

struct FitConfig {
  double step_size = 1.0;
  double reg_weight = 0.01;
  int epochs = 100;
  int diag_pretrain_epochs = 50;
  double init_offdiag_halfwidth = 0.2;
  ChainConfig mcmc;
  std::uint64_t seed = 0;
  FitMode mode = FitMode::marginal;
  double adagrad_epsilon = 1e-8;
  int enum_cap = kDefaultEnumCap;
  int threads = 0;                   // 0 = env/hardware default
  bool use_exact_gradients = false;  // enumeration instead of chains (small n)
  bool trace_objective = true;
  int trace_draws = 32;  // per-sample proposal draws when the trace is estimated
  bool progress = false; // per-epoch lines on stderr
};

inline void validate_fit_config(const FitConfig& config) {
  if (!(config.step_size > 0.0)) throw DataError{"step size must be positive"};
  if (!(config.reg_weight >= 0.0)) throw DataError{"regularization weight must be nonnegative"};
  if (config.epochs < 0) throw DataError{"epochs must be nonnegative"};
  if (config.diag_pretrain_epochs < 0) throw DataError{"pretraining epochs must be nonnegative"};
  if (!(config.init_offdiag_halfwidth >= 0.0)) {
    throw DataError{"init half-width must be nonnegative"};
  }
  if (!(config.adagrad_epsilon > 0.0)) throw DataError{"adagrad epsilon must be positive"};
  if (config.enum_cap < 1) throw DataError{"enumeration cap must be positive"};
  if (config.trace_draws < 1) throw DataError{"trace draws must be positive"};
  validate_chain_config(config.mcmc);
}

struct FitReport {
  ParamMatrix theta_hat;
  std::vector<double> objective_trace;  // one value per main epoch
  std::string trace_kind;               // "exact", "estimated", or "none"
  double wall_time = 0.0;               // seconds
  FitConfig config;
  std::vector<std::string> warnings;
};

// Exact regularized objective. Requires every sample within the enumeration
// cap; larger sets must go through objective_estimate instead.
inline double objective(const ParamMatrix& theta, const Dataset& data, double reg_weight,
                        int enum_cap = kDefaultEnumCap) {
  validate_dataset(data);
  if (data.n != theta.n) throw DataError{"dataset and model sizes differ"};
  validate_finite(theta);
  detail::Weights W = detail::Weights::of(theta);
  detail::PrefixScratch scratch;
  std::map<Sequence, double> cache;  // datasets repeat sets heavily
  double total = 0.0;
  for (const ItemSet& s : data.samples) {
    Sequence items = s.items();
    auto it = cache.find(items);
    if (it == cache.end()) {
      if (s.count() > enum_cap) {
        throw DataError{"enumeration too large: a sample has " + std::to_string(s.count()) +
                        " items (cap " + std::to_string(enum_cap) +
                        "); use the estimated objective"};
      }
      Sequence perm = items;
      it = cache.emplace(std::move(items), detail::log_marginal_set_ws(W, perm, scratch)).first;
    }
    total += it->second;
  }
  double reg = 0.0;
  for (int i = 0; i < theta.n; ++i) {
    for (int j = 0; j < theta.n; ++j) {
      if (i != j) reg += std::abs(theta.at(i, j));
    }
  }
  return total / static_cast<double>(data.samples.size()) - reg_weight * reg;
}

namespace detail {

// Importance-sampling estimate of log p(S) (or log p(S | t) when t_obs is
// nonnegative): draws from the guided proposal, averages p/q in log space.
// Biased slightly low (Jensen); used only for progress traces, never for
// gradients. Sets with <= 1 item are exact and consume no randomness.
inline double estimate_log_prob(const ParamMatrix& theta, const Weights& W, const ItemSet& s,
                                double t_obs, int draws, RngState& rng,
                                PrefixScratch& scratch, GuidedScratch& gscratch) {
  Sequence items = s.items();
  if (items.size() <= 1) {
    return t_obs >= 0.0 ? log_partial_given_time(W, items, t_obs, scratch)
                        : log_marginal_sequence(W, items, scratch);
  }
  LogSumExp lse;
  for (int i = 0; i < draws; ++i) {
    ProposalDraw draw = draw_guided_proposal_impl(theta, W, s, rng, gscratch);
    double lp = t_obs >= 0.0 ? log_partial_given_time(W, draw.sigma, t_obs, scratch)
                             : log_marginal_sequence(W, draw.sigma, scratch);
    lse.add(lp - draw.log_q);
  }
  return lse.value() - std::log(static_cast<double>(draws));
}

inline double l1_offdiagonal(const ParamMatrix& theta) {
  double reg = 0.0;
  for (int i = 0; i < theta.n; ++i) {
    for (int j = 0; j < theta.n; ++j) {
      if (i != j) reg += std::abs(theta.at(i, j));
    }
  }
  return reg;
}

}  // namespace detail

// Trace-friendly estimated objective: mean estimated log-likelihood minus
// the L1 term. Deterministic given rng's stream identity.
inline double objective_estimate(const ParamMatrix& theta, const Dataset& data,
                                 double reg_weight, int draws, RngState& rng) {
  validate_dataset(data);
  if (data.n != theta.n) throw DataError{"dataset and model sizes differ"};
  validate_finite(theta);
  detail::Weights W = detail::Weights::of(theta);
  detail::PrefixScratch scratch;
  detail::GuidedScratch gscratch;
  double total = 0.0;
  for (std::size_t d = 0; d < data.samples.size(); ++d) {
    RngState stream = rng.child(static_cast<std::uint64_t>(d));
    total += detail::estimate_log_prob(theta, W, data.samples[d], -1.0, draws, stream, scratch,
                                       gscratch);
  }
  return total / static_cast<double>(data.samples.size()) -
         reg_weight * detail::l1_offdiagonal(theta);
}

namespace detail {

struct TrainerState {
  ParamMatrix theta;
  GradMatrix adagrad;  // running sum of squared gradients
  int epoch_tag = 0;   // global epoch counter across phases (stream derivation)
};

// One full-dataset epoch: per-sample gradients (slot-filled in fixed order,
// then reduced serially in sample order so the result is thread-count
// independent), AdaGrad ascent, then the off-diagonal proximal step.
inline void run_epoch(TrainerState& state, const Dataset& data, const FitConfig& config,
                      const RngState& root, bool diagonal_only, int threads) {
  int n = state.theta.n;
  std::size_t num = data.samples.size();
  Weights W = Weights::of(state.theta);
  RngState epoch_base = root.child(1, static_cast<std::uint64_t>(state.epoch_tag));

  constexpr std::size_t kBlock = 128;
  std::vector<GradMatrix> slots(std::min(kBlock, num), GradMatrix::zeros(n));

  GradMatrix mean_grad = GradMatrix::zeros(n);
  double inv_n_samples = 1.0 / static_cast<double>(num);
  for (std::size_t base = 0; base < num; base += kBlock) {
    std::size_t block = std::min(kBlock, num - base);
    parallel_for(static_cast<std::int64_t>(block), threads, [&](std::int64_t b) {
      std::size_t d = base + static_cast<std::size_t>(b);
      GradMatrix& slot = slots[static_cast<std::size_t>(b)];
      std::fill(slot.g.begin(), slot.g.end(), 0.0);
      const ItemSet& s = data.samples[d];
      PrefixScratch scratch;
      if (config.mode == FitMode::given_times) {
        Sequence items = s.items();
        accumulate_grad_log_set_given_time(W, items, data.times[d], scratch, slot);
      } else if (config.use_exact_gradients || s.count() <= 1) {
        check_enum_cap(s.count(), config.enum_cap, "sample");
        Sequence items = s.items();
        accumulate_grad_log_marginal_set(W, items, scratch, slot);
      } else {
        RngState chain = epoch_base.child(static_cast<std::uint64_t>(d));
        estimate_grad_log_set_into(state.theta, W, s, config.mcmc, chain, slot);
      }
      double checksum = 0.0;
      for (double v : slot.g) checksum += v;
      if (!std::isfinite(checksum)) {
        throw NumericalError{"non-finite gradient at epoch " + std::to_string(state.epoch_tag) +
                             ", sample " + std::to_string(d + 1) +
                             " (max |theta| = " + std::to_string([&] {
                               double mx = 0.0;
                               for (double v : state.theta.theta) mx = std::max(mx, std::abs(v));
                               return mx;
                             }()) + ")"};
      }
    });
    for (std::size_t b = 0; b < block; ++b) {
      mean_grad.add_scaled(slots[b], inv_n_samples);
    }
  }

  if (diagonal_only) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i != j) mean_grad.at(i, j) = 0.0;
      }
    }
  }

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double g = mean_grad.at(i, j);
      state.adagrad.at(i, j) += g * g;
      double denom = std::sqrt(state.adagrad.at(i, j) + config.adagrad_epsilon);
      double value = state.theta.at(i, j) + config.step_size * g / denom;
      if (i != j && config.reg_weight > 0.0) {
        double threshold = config.reg_weight * config.step_size / denom;
        value = value > 0.0 ? std::max(0.0, value - threshold)
                            : std::min(0.0, value + threshold);
      }
      state.theta.at(i, j) = value;
    }
  }
  ++state.epoch_tag;
}

}  // namespace detail

// Full training run. See the header comment for the phase structure and
// stream layout. The trace covers the main epochs; its likelihood term is
// exact when the dataset's total permutation count allows enumeration in
// reasonable time, and importance-sampled (flagged "estimated") otherwise.
inline FitReport fit(const Dataset& data, const FitConfig& config) {
  auto start = std::chrono::steady_clock::now();
  validate_dataset(data);
  validate_fit_config(config);
  if (config.mode == FitMode::given_times) {
    if (!data.has_times()) throw DataError{"given-times training needs observation times"};
    for (const ItemSet& s : data.samples) {
      detail::check_enum_cap(s.count(), config.enum_cap, "sample");
    }
  }
  int n = data.n;
  std::size_t num = data.samples.size();
  int threads = resolve_threads(config.threads);
  RngState root{config.seed};

  FitReport report;
  report.config = config;

  detail::TrainerState state;
  state.theta = ParamMatrix::zeros(n);
  state.theta.item_names = data.item_names;
  state.adagrad = GradMatrix::zeros(n);

  // Diagonal warm start: logit of each item's empirical frequency, clamped.
  for (int j = 0; j < n; ++j) {
    std::size_t count = 0;
    for (const ItemSet& s : data.samples) {
      if (s.contains(j)) ++count;
    }
    double value;
    if (count == 0) {
      value = -10.0;
    } else if (count == num) {
      value = 2.0;
    } else {
      double f = static_cast<double>(count) / static_cast<double>(num);
      value = std::clamp(std::log(f / (1.0 - f)), -10.0, 2.0);
    }
    state.theta.at(j, j) = value;
  }

  // Decide the trace flavor once: exact enumeration is affordable when the
  // whole dataset's permutation count stays small.
  bool trace_exact = true;
  if (config.mode != FitMode::given_times) {
    double total_perms = 0.0;
    for (const ItemSet& s : data.samples) {
      total_perms += std::tgamma(static_cast<double>(s.count()) + 1.0);
      if (s.count() > config.enum_cap || total_perms > 1e6) {
        trace_exact = false;
        break;
      }
    }
  } else {
    double total_perms = 0.0;
    for (const ItemSet& s : data.samples) {
      total_perms += std::tgamma(static_cast<double>(s.count()) + 1.0);
    }
    trace_exact = total_perms <= 1e6;
  }
  report.trace_kind = config.trace_objective ? (trace_exact ? "exact" : "estimated") : "none";

  auto elapsed = [&start]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  auto trace_value = [&](const ParamMatrix& theta) -> double {
    if (config.mode == FitMode::given_times) {
      if (trace_exact) {
        detail::Weights W = detail::Weights::of(theta);
        detail::PrefixScratch scratch;
        double total = 0.0;
        for (std::size_t d = 0; d < num; ++d) {
          Sequence items = data.samples[d].items();
          total += detail::log_set_given_time_ws(W, items, data.times[d], scratch);
        }
        return total / static_cast<double>(num) -
               config.reg_weight * detail::l1_offdiagonal(theta);
      }
      detail::Weights W = detail::Weights::of(theta);
      detail::PrefixScratch scratch;
      detail::GuidedScratch gscratch;
      RngState trace_base = root.child(2, static_cast<std::uint64_t>(state.epoch_tag));
      double total = 0.0;
      for (std::size_t d = 0; d < num; ++d) {
        RngState stream = trace_base.child(static_cast<std::uint64_t>(d));
        total += detail::estimate_log_prob(theta, W, data.samples[d], data.times[d],
                                           config.trace_draws, stream, scratch, gscratch);
      }
      return total / static_cast<double>(num) -
             config.reg_weight * detail::l1_offdiagonal(theta);
    }
    if (trace_exact) return objective(theta, data, config.reg_weight, config.enum_cap);
    RngState trace_base = root.child(2, static_cast<std::uint64_t>(state.epoch_tag));
    return objective_estimate(theta, data, config.reg_weight, config.trace_draws, trace_base);
  };

  // Phase 1: diagonal-only pretraining epochs.
  for (int e = 0; e < config.diag_pretrain_epochs; ++e) {
    detail::run_epoch(state, data, config, root, /*diagonal_only=*/true, threads);
    if (config.progress) {
      std::fprintf(stderr, "pretrain epoch %d/%d  wall %.1fs\n", e + 1,
                   config.diag_pretrain_epochs, elapsed());
    }
  }
  for (int j = 0; j < n; ++j) {
    if (std::abs(state.theta.at(j, j)) > 8.0) {
      report.warnings.push_back("item " + std::to_string(j + 1) +
                                " has extreme base rate after pretraining (theta_jj = " +
                                std::to_string(state.theta.at(j, j)) +
                                "); its frequency is degenerate in this dataset");
    }
  }

  // Phase 2: off-diagonal initialization (frozen at 0 in diagonal-only mode).
  if (config.mode != FitMode::diagonal_only && config.init_offdiag_halfwidth > 0.0) {
    RngState init_stream = root.child(0);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i != j) {
          state.theta.at(i, j) = init_stream.next_uniform(-config.init_offdiag_halfwidth,
                                                          config.init_offdiag_halfwidth);
        }
      }
    }
  }

  // Phase 3: main epochs.
  for (int e = 0; e < config.epochs; ++e) {
    detail::run_epoch(state, data, config, root,
                      /*diagonal_only=*/config.mode == FitMode::diagonal_only, threads);
    if (config.trace_objective) {
      double value = trace_value(state.theta);
      report.objective_trace.push_back(value);
      if (config.progress) {
        std::fprintf(stderr, "epoch %d/%d  objective %.6f  wall %.1fs\n", e + 1, config.epochs,
                     value, elapsed());
      }
    } else if (config.progress) {
      std::fprintf(stderr, "epoch %d/%d  wall %.1fs\n", e + 1, config.epochs, elapsed());
    }
  }

  report.theta_hat = std::move(state.theta);
  report.wall_time = elapsed();
  return report;
}

// Known-observation-times variant: the likelihood term becomes
// log p(S_d | t_d; theta) with exact enumeration gradients.
inline FitReport fit_given_times(const Dataset& data, FitConfig config) {
  config.mode = FitMode::given_times;
  return fit(data, config);
}

}  // namespace hazard
