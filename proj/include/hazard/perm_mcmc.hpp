#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hazard/errors.hpp"
#include "hazard/likelihood.hpp"
#include "hazard/model.hpp"
#include "hazard/rng.hpp"

// Metropolis-Hastings over the jump orders of an observed set, targeting
// p(sigma | S; theta), and the stochastic estimator of grad log p(S; theta)
// that averages grad log p(sigma; theta) over retained chain states.
//
// Both proposals ignore the current state (independence sampler): uniform
// draws a random permutation of S; guided builds sigma item by item, picking
// the next item nu with probability proportional to
//
//   u_nu = prod_{j in S, j unplaced, j != nu} w_{nu j} / (1 + qh_{placed + nu})
//
// which is cheap to maintain incrementally and samples the target exactly
// when |S| = 2.

namespace hazard {

enum class Proposal { uniform, guided };

struct ChainConfig {
  int num_samples = 50;  // retained states averaged into the estimate
  int burn_in = 10;      // discarded leading states
  Proposal proposal = Proposal::guided;
};

inline void validate_chain_config(const ChainConfig& config) {
  if (config.num_samples < 1) throw DataError{"chain must retain at least one sample"};
  if (config.burn_in < 0) throw DataError{"burn-in must be nonnegative"};
}

// One proposal outcome: the permutation and the log of the probability the
// proposal assigns to it (needed in the acceptance ratio).
struct ProposalDraw {
  Sequence sigma;
  double log_q = 0.0;
};

namespace detail {

// Incremental state for building one guided draw. E[j] tracks
// w_jj * prod_{i placed} w_ij (so qh of a candidate extension is one dot
// product); tsum[nu] tracks sum_{j in S unplaced} theta_{nu j}.
struct GuidedScratch {
  std::vector<double> E;
  std::vector<char> placed;
  std::vector<int> remaining;  // ascending order preserved as items leave
  std::vector<double> tsum;
  std::vector<double> logu;

  void init(const ParamMatrix& theta, const Weights& W, const ItemSet& s) {
    int n = W.n;
    E.resize(static_cast<std::size_t>(n));
    placed.assign(static_cast<std::size_t>(n), 0);
    tsum.assign(static_cast<std::size_t>(n), 0.0);
    for (int j = 0; j < n; ++j) E[static_cast<std::size_t>(j)] = W.at(j, j);
    remaining = s.items();
    for (int nu : remaining) {
      double acc = 0.0;
      for (int j : remaining) acc += theta.at(nu, j);
      tsum[static_cast<std::size_t>(nu)] = acc;
    }
  }

  // Candidate log-weights, aligned with `remaining`.
  void step_weights(const ParamMatrix& theta, const Weights& W) {
    logu.resize(remaining.size());
    for (std::size_t c = 0; c < remaining.size(); ++c) {
      int nu = remaining[c];
      double qh = 0.0;
      for (int j = 0; j < W.n; ++j) {
        if (!placed[static_cast<std::size_t>(j)] && j != nu) {
          qh += E[static_cast<std::size_t>(j)] * W.at(nu, j);
        }
      }
      logu[c] = (tsum[static_cast<std::size_t>(nu)] - theta.at(nu, nu)) - std::log1p(qh);
    }
  }

  void advance(const ParamMatrix& theta, const Weights& W, std::size_t choice) {
    int x = remaining[choice];
    placed[static_cast<std::size_t>(x)] = 1;
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(choice));
    for (int j = 0; j < W.n; ++j) E[static_cast<std::size_t>(j)] *= W.at(x, j);
    for (int nu : remaining) tsum[static_cast<std::size_t>(nu)] -= theta.at(nu, x);
  }
};

// Guided draw. A forced final step (one candidate) consumes no randomness
// and contributes log 1 = 0 to log_q.
inline ProposalDraw draw_guided_proposal_impl(const ParamMatrix& theta, const Weights& W,
                                              const ItemSet& s, RngState& rng,
                                              GuidedScratch& scratch) {
  scratch.init(theta, W, s);
  ProposalDraw out;
  out.sigma.reserve(static_cast<std::size_t>(s.count()));
  while (!scratch.remaining.empty()) {
    if (scratch.remaining.size() == 1) {
      out.sigma.push_back(scratch.remaining[0]);
      scratch.advance(theta, W, 0);
      continue;
    }
    scratch.step_weights(theta, W);
    double mx = scratch.logu[0];
    for (double v : scratch.logu) mx = std::max(mx, v);
    double total = 0.0;
    for (double v : scratch.logu) total += std::exp(v - mx);
    double u = rng.next_unit() * total;
    std::size_t choice = scratch.logu.size() - 1;
    for (std::size_t c = 0; c < scratch.logu.size(); ++c) {
      u -= std::exp(scratch.logu[c] - mx);
      if (u < 0.0) { choice = c; break; }
    }
    out.log_q += scratch.logu[choice] - (mx + std::log(total));
    out.sigma.push_back(scratch.remaining[choice]);
    scratch.advance(theta, W, choice);
  }
  return out;
}

// Uniform permutation draw (Fisher-Yates over ascending items).
inline ProposalDraw draw_uniform_proposal_impl(const ItemSet& s, RngState& rng) {
  ProposalDraw out;
  out.sigma = s.items();
  for (std::size_t i = out.sigma.size(); i > 1; --i) {
    std::uint64_t j = rng.next_below(i);
    std::swap(out.sigma[i - 1], out.sigma[static_cast<std::size_t>(j)]);
  }
  out.log_q = -std::lgamma(static_cast<double>(out.sigma.size()) + 1.0);
  return out;
}

inline ProposalDraw draw_proposal_impl(const ParamMatrix& theta, const Weights& W,
                                       const ItemSet& s, Proposal proposal, RngState& rng,
                                       GuidedScratch& scratch) {
  if (proposal == Proposal::guided) {
    return draw_guided_proposal_impl(theta, W, s, rng, scratch);
  }
  return draw_uniform_proposal_impl(s, rng);
}

}  // namespace detail

// One guided draw from scratch (tests and small callers; the chain reuses
// caches internally).
inline ProposalDraw draw_guided_proposal(const ParamMatrix& theta, const ItemSet& s,
                                         RngState& rng) {
  if (s.n() != theta.n) throw DataError{"set capacity does not match model size"};
  if (s.count() < 1) throw DataError{"guided proposal needs a nonempty set"};
  validate_finite(theta);
  detail::Weights W = detail::Weights::of(theta);
  detail::GuidedScratch scratch;
  return detail::draw_guided_proposal_impl(theta, W, s, rng, scratch);
}

inline ProposalDraw draw_uniform_proposal(const ItemSet& s, RngState& rng) {
  return detail::draw_uniform_proposal_impl(s, rng);
}

// log of the probability the guided proposal assigns to one specific
// permutation of s (deterministic replay of the construction; exact kernel
// tests are built on this).
inline double guided_log_proposal_prob(const ParamMatrix& theta, const ItemSet& s,
                                       const Sequence& sigma) {
  if (s.n() != theta.n) throw DataError{"set capacity does not match model size"};
  validate_sequence(theta.n, sigma);
  if (!(to_set(theta.n, sigma) == s)) {
    throw DataError{"sequence is not a permutation of the target set"};
  }
  validate_finite(theta);
  detail::Weights W = detail::Weights::of(theta);
  detail::GuidedScratch scratch;
  scratch.init(theta, W, s);
  double log_q = 0.0;
  for (int x : sigma) {
    std::size_t choice = 0;
    while (scratch.remaining[choice] != x) ++choice;
    if (scratch.remaining.size() > 1) {
      scratch.step_weights(theta, W);
      double mx = scratch.logu[0];
      for (double v : scratch.logu) mx = std::max(mx, v);
      double total = 0.0;
      for (double v : scratch.logu) total += std::exp(v - mx);
      log_q += scratch.logu[choice] - (mx + std::log(total));
    }
    scratch.advance(theta, W, choice);
  }
  return log_q;
}

// One independence-sampler step from `current`: propose, accept with
// min(1, [p(new) q(cur)] / [p(cur) q(new)]); the p(S) normalizer cancels so
// target ratios reduce to marginal sequence probability ratios. Always
// consumes one acceptance uniform.
inline ProposalDraw mh_step(const ParamMatrix& theta, const ItemSet& s,
                            const ProposalDraw& current, Proposal proposal, RngState& rng) {
  if (s.n() != theta.n) throw DataError{"set capacity does not match model size"};
  validate_sequence(theta.n, current.sigma);
  if (!(to_set(theta.n, current.sigma) == s)) {
    throw DataError{"chain state is not a permutation of the target set"};
  }
  validate_finite(theta);
  detail::Weights W = detail::Weights::of(theta);
  detail::GuidedScratch scratch;
  detail::PrefixScratch seq_scratch;
  double lp_cur = detail::log_marginal_sequence(W, current.sigma, seq_scratch);
  ProposalDraw prop = detail::draw_proposal_impl(theta, W, s, proposal, rng, scratch);
  double lp_new = detail::log_marginal_sequence(W, prop.sigma, seq_scratch);
  double log_r = (lp_new - lp_cur) + (current.log_q - prop.log_q);
  double u = rng.next_unit_positive();
  if (std::log(u) <= log_r) return prop;
  return current;
}

namespace detail {

// Chain-averaged gradient estimate added into out (caller zeroes or blends).
// Runs burn_in discarded steps, then num_samples retained ones, accumulating
// (1/M) grad log p(sigma) of the state after each retained step. Repeated
// visits to one state batch their weight so a rejection costs no gradient
// walk.
inline void estimate_grad_log_set_into(const ParamMatrix& theta, const Weights& W,
                                       const ItemSet& s, const ChainConfig& config,
                                       RngState& rng, GradMatrix& out) {
  validate_chain_config(config);
  PrefixScratch seq_scratch;
  Sequence items = s.items();
  if (items.size() <= 1) {
    accumulate_grad_log_marginal_sequence(W, items, 1.0, seq_scratch, out);
    return;
  }
  GuidedScratch scratch;
  ProposalDraw current = draw_proposal_impl(theta, W, s, config.proposal, rng, scratch);
  double lp_cur = log_marginal_sequence(W, current.sigma, seq_scratch);
  double inv = 1.0 / config.num_samples;
  double pending = 0.0;
  int total_steps = config.burn_in + config.num_samples;
  for (int it = 0; it < total_steps; ++it) {
    ProposalDraw prop = draw_proposal_impl(theta, W, s, config.proposal, rng, scratch);
    double lp_new = log_marginal_sequence(W, prop.sigma, seq_scratch);
    double log_r = (lp_new - lp_cur) + (current.log_q - prop.log_q);
    double u = rng.next_unit_positive();
    if (std::log(u) <= log_r) {
      if (pending > 0.0) {
        accumulate_grad_log_marginal_sequence(W, current.sigma, pending, seq_scratch, out);
        pending = 0.0;
      }
      current = std::move(prop);
      lp_cur = lp_new;
    }
    if (it >= config.burn_in) pending += inv;
  }
  if (pending > 0.0) {
    accumulate_grad_log_marginal_sequence(W, current.sigma, pending, seq_scratch, out);
  }
}

}  // namespace detail

// MCMC estimate of grad log p(S; theta): the average of grad log p(sigma)
// over retained chain states. |S| <= 1 has a unique order, so the exact
// gradient is returned without running a chain.
inline GradMatrix estimate_grad_log_set(const ParamMatrix& theta, const ItemSet& s,
                                        const ChainConfig& config, RngState& rng) {
  if (s.n() != theta.n) throw DataError{"set capacity does not match model size"};
  validate_finite(theta);
  detail::Weights W = detail::Weights::of(theta);
  GradMatrix out = GradMatrix::zeros(theta.n);
  detail::estimate_grad_log_set_into(theta, W, s, config, rng, out);
  return out;
}

}  // namespace hazard
