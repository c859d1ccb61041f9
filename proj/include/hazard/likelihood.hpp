#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "hazard/errors.hpp"
#include "hazard/hypoexp.hpp"
#include "hazard/model.hpp"

// Exact probability computations over jump orders of the cumulative chain.
//
// Writing R_i for the state after i jumps of a partial order sigma
// (R_0 = {}), q_i for the rate of the i-th jump and qh_i for the exit rate
// of R_i, the quantities computed here are:
//
//   full order (covers V):      p(sigma)        = prod_i q_i / qh_{i-1}
//   order given the time:       p(sigma | t)    = prod_i (q_i / qh_{i-1})
//                                 * [F(t; qh_0..qh_{k-1}) - F(t; qh_0..qh_k)]
//   order, time marginalized:   p(sigma)        = prod_i q_i/(1 + qh_{i-1})
//                                 * 1/(1 + qh_k)
//   set, time marginalized:     p(S)            = sum over orders of S
//
// with F the hypoexponential CDF of the accumulated jump times. Everything
// is evaluated in log space; probability-domain wrappers exponentiate.

namespace hazard {

inline constexpr int kDefaultEnumCap = 10;  // 10! ~ 3.6e6 orders, seconds at desk scale

namespace detail {

// Scratch for walking one growing prefix. weight[j] tracks
// w_jj * prod_{i in prefix} w_ij for every j, so the rate of adding j to the
// current prefix state is weight[j] and the exit rate is the sum over absent
// j. Prefixes only grow within a walk; enumeration across permutations
// re-walks rather than undoing multiplies, keeping results order-exact.
struct PrefixScratch {
  std::vector<double> weight;
  std::vector<char> present;
  std::vector<int> prefix;
  std::vector<double> exit_rates;            // qh of successive prefix states
  std::vector<std::vector<double>> levels;   // weight snapshots per depth (gradient walks)

  void reset(const Weights& W) {
    int n = W.n;
    weight.resize(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) weight[static_cast<std::size_t>(j)] = W.at(j, j);
    present.assign(static_cast<std::size_t>(n), 0);
    prefix.clear();
    exit_rates.clear();
  }

  double exit_rate() const {
    double total = 0.0;
    for (std::size_t j = 0; j < weight.size(); ++j) {
      if (!present[j]) total += weight[j];
    }
    return total;
  }

  void push(const Weights& W, int x) {
    int n = W.n;
    const double* row = &W.w[static_cast<std::size_t>(x) * n];
    for (int j = 0; j < n; ++j) weight[static_cast<std::size_t>(j)] *= row[j];
    present[static_cast<std::size_t>(x)] = 1;
    prefix.push_back(x);
  }
};

// log prod_i q_i/(1 + qh_{i-1}) - log(1 + qh_k): the time-marginalized order
// probability. No validation; callers own precondition checks.
inline double log_marginal_sequence(const Weights& W, const Sequence& sigma,
                                    PrefixScratch& scratch) {
  scratch.reset(W);
  double lp = 0.0;
  for (int x : sigma) {
    double qh = scratch.exit_rate();
    lp += std::log(scratch.weight[static_cast<std::size_t>(x)]) - std::log1p(qh);
    scratch.push(W, x);
  }
  lp -= std::log1p(scratch.exit_rate());
  return lp;
}

// log prod_i q_i / qh_{i-1} over a full permutation of V.
inline double log_full_sequence(const Weights& W, const Sequence& sigma,
                                PrefixScratch& scratch) {
  scratch.reset(W);
  double lp = 0.0;
  for (int x : sigma) {
    double qh = scratch.exit_rate();
    lp += std::log(scratch.weight[static_cast<std::size_t>(x)]) - std::log(qh);
    scratch.push(W, x);
  }
  return lp;
}

// log p(sigma | t): jump-order factor plus the probability that exactly
// |sigma| jumps fit before t. Returns -inf when the window probability
// underflows (e.g. t = 0 with a nonempty order).
inline double log_partial_given_time(const Weights& W, const Sequence& sigma, double t,
                                     PrefixScratch& scratch) {
  scratch.reset(W);
  if (sigma.empty()) return -scratch.exit_rate() * t;
  double log_pa = 0.0;
  for (int x : sigma) {
    double qh = scratch.exit_rate();
    scratch.exit_rates.push_back(qh);
    log_pa += std::log(scratch.weight[static_cast<std::size_t>(x)]) - std::log(qh);
    scratch.push(W, x);
  }
  double f_k = hypoexp_cdf(t, std::span<const double>{scratch.exit_rates});
  double f_k1 = 0.0;
  if (static_cast<int>(sigma.size()) < W.n) {  // a further jump is possible
    scratch.exit_rates.push_back(scratch.exit_rate());
    f_k1 = hypoexp_cdf(t, std::span<const double>{scratch.exit_rates});
  }
  double window = f_k - f_k1;
  if (!(window > 0.0)) return -std::numeric_limits<double>::infinity();
  return log_pa + std::log(window);
}

// Streaming log-sum-exp accumulator; serial, deterministic in feed order.
struct LogSumExp {
  double max_term = -std::numeric_limits<double>::infinity();
  double scaled_sum = 0.0;

  void add(double term) {
    if (term == -std::numeric_limits<double>::infinity()) return;
    if (term > max_term) {
      scaled_sum = scaled_sum * std::exp(max_term - term) + 1.0;
      max_term = term;
    } else {
      scaled_sum += std::exp(term - max_term);
    }
  }

  double value() const {
    if (scaled_sum == 0.0) return -std::numeric_limits<double>::infinity();
    return max_term + std::log(scaled_sum);
  }
};

inline void check_enum_cap(int size, int cap, const char* what) {
  if (size > cap) {
    throw DataError{std::string{"enumeration too large: "} + what + " has " +
                    std::to_string(size) + " items, cap is " + std::to_string(cap)};
  }
}

// Walk sigma recording per-depth weight snapshots and exit rates; the
// gradient accumulators below revisit each prefix state.
inline void walk_with_levels(const Weights& W, const Sequence& sigma, PrefixScratch& scratch) {
  scratch.reset(W);
  scratch.levels.resize(sigma.size() + 1);
  for (std::size_t d = 0; d <= sigma.size(); ++d) {
    scratch.levels[d] = scratch.weight;
    scratch.exit_rates.push_back(scratch.exit_rate());
    if (d < sigma.size()) scratch.push(W, sigma[d]);
  }
}

// out += weight * grad log p(sigma) for the time-marginalized order
// probability. Numerator: d log q_i / d theta_ab = [b = sigma_i][a = b or
// a in R_{i-1}]. Denominators: each prefix state R contributes
// -q_{R,b} ([a = b] + [a in R]) / (1 + qh_R) at (a, b), b absent from R.
inline void accumulate_grad_log_marginal_sequence(const Weights& W, const Sequence& sigma,
                                                  double weight, PrefixScratch& scratch,
                                                  GradMatrix& out) {
  int n = W.n;
  walk_with_levels(W, sigma, scratch);
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    int x = sigma[i];
    out.at(x, x) += weight;
    for (std::size_t a = 0; a < i; ++a) out.at(sigma[a], x) += weight;
  }
  for (std::size_t d = 0; d < scratch.levels.size(); ++d) {
    const std::vector<double>& level = scratch.levels[d];
    double c = weight / (1.0 + scratch.exit_rates[d]);
    for (int b = 0; b < n; ++b) {
      bool absent = true;
      for (std::size_t a = 0; a < d; ++a) {
        if (sigma[a] == b) { absent = false; break; }
      }
      if (!absent) continue;
      double v = c * level[static_cast<std::size_t>(b)];
      out.at(b, b) -= v;
      for (std::size_t a = 0; a < d; ++a) out.at(sigma[a], b) -= v;
    }
  }
}

// out += weight * grad log p(sigma | t). The jump-order factor divides by
// qh_{i-1} (not 1 + qh), and the hypoexponential window contributes through
// dF/d qh of the prefix exit rates.
inline void accumulate_grad_log_partial_given_time(const Weights& W, const Sequence& sigma,
                                                   double t, double weight,
                                                   PrefixScratch& scratch, GradMatrix& out) {
  int n = W.n;
  int k = static_cast<int>(sigma.size());
  walk_with_levels(W, sigma, scratch);
  // scratch.exit_rates now holds qh_0 .. qh_k (k+1 entries).
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    int x = sigma[i];
    out.at(x, x) += weight;
    for (std::size_t a = 0; a < i; ++a) out.at(sigma[a], x) += weight;
  }
  if (k == 0) {
    // log p = -qh_0 * t; d qh_0 / d theta_ab = q_{{},b} [a = b].
    const std::vector<double>& level = scratch.levels[0];
    for (int b = 0; b < n; ++b) out.at(b, b) -= weight * t * level[static_cast<std::size_t>(b)];
    return;
  }

  bool full = (k == n);
  std::span<const double> lam_k{scratch.exit_rates.data(), static_cast<std::size_t>(k)};
  double f_k = hypoexp_cdf(t, lam_k);
  std::vector<double> grad_k = hypoexp_cdf_grad(t, lam_k);
  double f_k1 = 0.0;
  std::vector<double> grad_k1(static_cast<std::size_t>(k) + 1, 0.0);
  if (!full) {
    std::span<const double> lam_k1{scratch.exit_rates.data(), static_cast<std::size_t>(k) + 1};
    f_k1 = hypoexp_cdf(t, lam_k1);
    grad_k1 = hypoexp_cdf_grad(t, lam_k1);
  }
  double window = f_k - f_k1;
  if (!(window > 0.0)) {
    throw NumericalError{"gradient of a zero-probability order given its time"};
  }
  // Per prefix state R_d (d = 0..k): combined coefficient of d qh_d.
  // States d < k also divide the jump-order factor by qh_d.
  for (int d = 0; d <= (full ? k - 1 : k); ++d) {
    double dwindow = (d < k ? grad_k[static_cast<std::size_t>(d)] : 0.0) -
                     grad_k1[static_cast<std::size_t>(d)];
    double coef = weight * dwindow / window;
    if (d < k) coef -= weight / scratch.exit_rates[static_cast<std::size_t>(d)];
    if (coef == 0.0) continue;
    const std::vector<double>& level = scratch.levels[static_cast<std::size_t>(d)];
    for (int b = 0; b < n; ++b) {
      bool absent = true;
      for (int a = 0; a < d; ++a) {
        if (sigma[static_cast<std::size_t>(a)] == b) { absent = false; break; }
      }
      if (!absent) continue;
      double v = coef * level[static_cast<std::size_t>(b)];
      out.at(b, b) += v;
      for (int a = 0; a < d; ++a) out.at(sigma[static_cast<std::size_t>(a)], b) += v;
    }
  }
}

// Exact log p(S) with cached weights: log-sum-exp over the permutations of
// `items` (sorted ascending on entry; next_permutation cycles it back).
inline double log_marginal_set_ws(const Weights& W, Sequence& items, PrefixScratch& scratch) {
  LogSumExp lse;
  do {
    lse.add(log_marginal_sequence(W, items, scratch));
  } while (std::next_permutation(items.begin(), items.end()));
  return lse.value();
}

// Exact log p(S | t) with cached weights, same enumeration contract.
inline double log_set_given_time_ws(const Weights& W, Sequence& items, double t,
                                    PrefixScratch& scratch) {
  LogSumExp lse;
  do {
    lse.add(log_partial_given_time(W, items, t, scratch));
  } while (std::next_permutation(items.begin(), items.end()));
  return lse.value();
}

// out += grad log p(S): posterior-weighted average of per-order gradients
// (two enumeration passes: normalizer, then weighted accumulation).
inline void accumulate_grad_log_marginal_set(const Weights& W, Sequence& items,
                                             PrefixScratch& scratch, GradMatrix& out) {
  double log_total = log_marginal_set_ws(W, items, scratch);
  do {
    double lp = log_marginal_sequence(W, items, scratch);
    accumulate_grad_log_marginal_sequence(W, items, std::exp(lp - log_total), scratch, out);
  } while (std::next_permutation(items.begin(), items.end()));
}

// out += grad log p(S | t), posterior-weighted over orders of S.
inline void accumulate_grad_log_set_given_time(const Weights& W, Sequence& items, double t,
                                               PrefixScratch& scratch, GradMatrix& out) {
  double log_total = log_set_given_time_ws(W, items, t, scratch);
  if (log_total == -std::numeric_limits<double>::infinity()) {
    throw NumericalError{"set has zero probability at its observation time"};
  }
  do {
    double lp = log_partial_given_time(W, items, t, scratch);
    if (lp == -std::numeric_limits<double>::infinity()) continue;
    accumulate_grad_log_partial_given_time(W, items, t, std::exp(lp - log_total), scratch, out);
  } while (std::next_permutation(items.begin(), items.end()));
}

}  // namespace detail

// --- public API -------------------------------------------------------------

// Probability of observing the complete jump order sigma (a permutation of V).
inline double log_full_sequence_prob(const ParamMatrix& theta, const Sequence& sigma) {
  validate_sequence(theta.n, sigma);
  if (static_cast<int>(sigma.size()) != theta.n) {
    throw DataError{"full sequence must be a permutation of all items"};
  }
  detail::Weights W = detail::Weights::of(theta);
  detail::PrefixScratch scratch;
  return detail::log_full_sequence(W, sigma, scratch);
}

inline double full_sequence_prob(const ParamMatrix& theta, const Sequence& sigma) {
  return std::exp(log_full_sequence_prob(theta, sigma));
}

// Probability of the partial jump order sigma when the trajectory is cut at
// an Exp(1) observation time (time marginalized out).
inline double log_marginal_sequence_prob(const ParamMatrix& theta, const Sequence& sigma) {
  validate_sequence(theta.n, sigma);
  detail::Weights W = detail::Weights::of(theta);
  detail::PrefixScratch scratch;
  return detail::log_marginal_sequence(W, sigma, scratch);
}

inline double marginal_sequence_prob(const ParamMatrix& theta, const Sequence& sigma) {
  return std::exp(log_marginal_sequence_prob(theta, sigma));
}

// Probability of the partial jump order sigma given the observation time.
inline double log_partial_sequence_given_time_prob(const ParamMatrix& theta,
                                                   const Sequence& sigma, double t_obs) {
  validate_sequence(theta.n, sigma);
  if (!(t_obs >= 0.0)) throw DataError{"observation time must be nonnegative"};
  detail::Weights W = detail::Weights::of(theta);
  detail::PrefixScratch scratch;
  return detail::log_partial_given_time(W, sigma, t_obs, scratch);
}

inline double partial_sequence_given_time_prob(const ParamMatrix& theta, const Sequence& sigma,
                                               double t_obs) {
  return std::exp(log_partial_sequence_given_time_prob(theta, sigma, t_obs));
}

// Probability of observing the unordered set s: exact sum over the |s|!
// orders, refused above the enumeration cap.
inline double log_marginal_set_prob(const ParamMatrix& theta, const ItemSet& s,
                                    int enum_cap = kDefaultEnumCap) {
  if (s.n() != theta.n) throw DataError{"set capacity does not match model size"};
  detail::check_enum_cap(s.count(), enum_cap, "set");
  detail::Weights W = detail::Weights::of(theta);
  detail::PrefixScratch scratch;
  Sequence sigma = s.items();
  return detail::log_marginal_set_ws(W, sigma, scratch);
}

inline double marginal_set_prob(const ParamMatrix& theta, const ItemSet& s,
                                int enum_cap = kDefaultEnumCap) {
  return std::exp(log_marginal_set_prob(theta, s, enum_cap));
}

// Gradient of log marginal_sequence_prob with respect to every theta entry.
inline GradMatrix grad_log_marginal_sequence(const ParamMatrix& theta, const Sequence& sigma) {
  validate_sequence(theta.n, sigma);
  detail::Weights W = detail::Weights::of(theta);
  detail::PrefixScratch scratch;
  GradMatrix out = GradMatrix::zeros(theta.n);
  detail::accumulate_grad_log_marginal_sequence(W, sigma, 1.0, scratch, out);
  return out;
}

// Gradient of log marginal_set_prob: posterior-weighted average of the
// per-order gradients (two enumeration passes: normalizer, then weights).
inline GradMatrix grad_log_marginal_set_exact(const ParamMatrix& theta, const ItemSet& s,
                                              int enum_cap = kDefaultEnumCap) {
  if (s.n() != theta.n) throw DataError{"set capacity does not match model size"};
  detail::check_enum_cap(s.count(), enum_cap, "set");
  detail::Weights W = detail::Weights::of(theta);
  detail::PrefixScratch scratch;
  Sequence sigma = s.items();
  GradMatrix out = GradMatrix::zeros(theta.n);
  detail::accumulate_grad_log_marginal_set(W, sigma, scratch, out);
  return out;
}

// p(s | t) for one block-free model: sum of partial_sequence_given_time_prob
// over the orders of s.
inline double log_set_given_time_single_block(const ParamMatrix& theta, const ItemSet& s,
                                              double t, int enum_cap = kDefaultEnumCap) {
  if (s.n() != theta.n) throw DataError{"set capacity does not match model size"};
  detail::check_enum_cap(s.count(), enum_cap, "set");
  if (!(t >= 0.0)) throw DataError{"observation time must be nonnegative"};
  detail::Weights W = detail::Weights::of(theta);
  detail::PrefixScratch scratch;
  Sequence sigma = s.items();
  return detail::log_set_given_time_ws(W, sigma, t, scratch);
}

// p(s | t) under theta's declared block structure: independent per-block
// factors (cross-block entries are 0 so blocks evolve independently). The
// enumeration cap applies per block.
inline double log_set_given_time_prob(const ParamMatrix& theta, const ItemSet& s, double t,
                                      int enum_cap = kDefaultEnumCap) {
  if (s.n() != theta.n) throw DataError{"set capacity does not match model size"};
  std::vector<std::pair<int, int>> blocks = effective_blocks(theta);
  if (blocks.size() == 1) return log_set_given_time_single_block(theta, s, t, enum_cap);
  double total = 0.0;
  for (auto [first, last] : blocks) {
    ParamMatrix sub = submatrix(theta, first, last);
    ItemSet local{sub.n};
    for (int i = first; i <= last; ++i) {
      if (s.contains(i)) local.add(i - first);
    }
    total += log_set_given_time_single_block(sub, local, t, enum_cap);
  }
  return total;
}

inline double set_given_time_prob(const ParamMatrix& theta, const ItemSet& s, double t,
                                  int enum_cap = kDefaultEnumCap) {
  return std::exp(log_set_given_time_prob(theta, s, t, enum_cap));
}

// Gradient of log p(s | t) by exact enumeration (single-block models; the
// trainer's known-times mode). Posterior-weighted like the marginal case.
inline GradMatrix grad_log_set_given_time_exact(const ParamMatrix& theta, const ItemSet& s,
                                                double t, int enum_cap = kDefaultEnumCap) {
  if (s.n() != theta.n) throw DataError{"set capacity does not match model size"};
  detail::check_enum_cap(s.count(), enum_cap, "set");
  if (!(t >= 0.0)) throw DataError{"observation time must be nonnegative"};
  detail::Weights W = detail::Weights::of(theta);
  detail::PrefixScratch scratch;
  Sequence sigma = s.items();
  GradMatrix out = GradMatrix::zeros(theta.n);
  detail::accumulate_grad_log_set_given_time(W, sigma, t, scratch, out);
  return out;
}

}  // namespace hazard
