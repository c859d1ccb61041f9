#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "hazard/model.hpp"
#include "hazard/parallel.hpp"
#include "hazard/rng.hpp"

// Forward simulation of the cumulative chain. Each draw first samples the
// observation time t_obs ~ Exp(1), then runs the jump chain (holding time
// ~ Exp(exit rate), next item proportional to its transition rate) until the
// next jump would land past t_obs. Per-draw child RNG streams keyed by the
// sample index make dataset generation order- and thread-independent.

namespace hazard {

struct TimedTrajectory {
  Sequence sequence;
  std::vector<double> holding_times;
  double t_obs = 0.0;
};

namespace detail {

// One jump-chain run on cached weights. rate[j] of adding j to the current
// state is maintained as w_jj * prod_{i placed} w_ij (one multiply per placed
// item per j). Consumes, per accepted jump, one exponential and one
// categorical uniform; the overshooting holding time is drawn and discarded
// with the loop.
inline TimedTrajectory run_jump_chain(const Weights& W, RngState& rng) {
  int n = W.n;
  TimedTrajectory out;
  out.t_obs = rng.next_exp(1.0);
  std::vector<double> rate(static_cast<std::size_t>(n));
  std::vector<char> present(static_cast<std::size_t>(n), 0);
  for (int j = 0; j < n; ++j) rate[static_cast<std::size_t>(j)] = W.at(j, j);
  double t = 0.0;
  int placed = 0;
  while (placed < n) {
    double total = 0.0;
    for (int j = 0; j < n; ++j) {
      if (!present[static_cast<std::size_t>(j)]) total += rate[static_cast<std::size_t>(j)];
    }
    double hold = rng.next_exp(total);
    if (t + hold >= out.t_obs) break;
    t += hold;
    // Categorical by linear scan over absent items in ascending order.
    double u = rng.next_unit() * total;
    int chosen = -1;
    for (int j = 0; j < n; ++j) {
      if (present[static_cast<std::size_t>(j)]) continue;
      chosen = j;  // falls through to the last absent item if u outruns the scan
      u -= rate[static_cast<std::size_t>(j)];
      if (u < 0.0) break;
    }
    present[static_cast<std::size_t>(chosen)] = 1;
    ++placed;
    for (int j = 0; j < n; ++j) rate[static_cast<std::size_t>(j)] *= W.at(chosen, j);
    out.sequence.push_back(chosen);
    out.holding_times.push_back(hold);
  }
  return out;
}

}  // namespace detail

// Ordered items, holding times, and the observation time of one trajectory.
inline TimedTrajectory sample_timed_trajectory(const ParamMatrix& theta, RngState& rng) {
  validate_finite(theta);
  detail::Weights W = detail::Weights::of(theta);
  return detail::run_jump_chain(W, rng);
}

// The observed set of one draw (the trajectory with order and times dropped).
inline ItemSet sample_marginal_set(const ParamMatrix& theta, RngState& rng) {
  validate_finite(theta);
  detail::Weights W = detail::Weights::of(theta);
  return to_set(theta.n, detail::run_jump_chain(W, rng).sequence);
}

// count independent draws; sample d uses the child stream rng.child(d), so
// the result is identical however the loop is scheduled.
inline Dataset generate_dataset(const ParamMatrix& theta, int count, bool with_times,
                                RngState& rng, int threads = 0) {
  validate_finite(theta);
  if (count < 1) throw DataError{"dataset draw count must be at least 1"};
  detail::Weights W = detail::Weights::of(theta);
  Dataset data;
  data.n = theta.n;
  data.item_names = theta.item_names;
  data.samples.resize(static_cast<std::size_t>(count));
  if (with_times) data.times.resize(static_cast<std::size_t>(count));
  parallel_for(count, resolve_threads(threads), [&](std::int64_t d) {
    RngState stream = rng.child(static_cast<std::uint64_t>(d));
    TimedTrajectory traj = detail::run_jump_chain(W, stream);
    data.samples[static_cast<std::size_t>(d)] = to_set(theta.n, traj.sequence);
    if (with_times) data.times[static_cast<std::size_t>(d)] = traj.t_obs;
  });
  return data;
}

}  // namespace hazard
