#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <vector>

#include "hazard/likelihood.hpp"
#include "hazard/model.hpp"
#include "hazard/rng.hpp"
#include "hazard/sampler.hpp"
#include "oracles.hpp"

using hazard::Dataset;
using hazard::ItemSet;
using hazard::ParamMatrix;
using hazard::Sequence;

TEST(Sampler, TrajectoryIsConsistent) {
  hazard::RngState rng(401);
  ParamMatrix theta = oracles::random_theta(4, rng);
  for (int d = 0; d < 1000; ++d) {
    hazard::RngState stream = rng.child(static_cast<std::uint64_t>(d));
    hazard::TimedTrajectory traj = hazard::sample_timed_trajectory(theta, stream);
    EXPECT_EQ(traj.sequence.size(), traj.holding_times.size());
    EXPECT_GT(traj.t_obs, 0.0);
    hazard::validate_sequence(4, traj.sequence);
    double elapsed = 0.0;
    for (double h : traj.holding_times) {
      EXPECT_GT(h, 0.0);
      elapsed += h;
    }
    EXPECT_LE(elapsed, traj.t_obs);
  }
}

TEST(Sampler, ObservationTimeIsUnitExponential) {
  hazard::RngState rng(402);
  ParamMatrix theta = oracles::random_theta(3, rng);
  double sum = 0.0;
  const int n = 100000;
  for (int d = 0; d < n; ++d) {
    hazard::RngState stream = rng.child(static_cast<std::uint64_t>(d));
    sum += hazard::sample_timed_trajectory(theta, stream).t_obs;
  }
  EXPECT_NEAR(sum / n, 1.0, 0.02);
}

TEST(Sampler, SetFrequenciesMatchExactProbabilities) {
  hazard::RngState rng(403);
  ParamMatrix theta = oracles::random_theta(3, rng);
  std::map<std::vector<int>, int> counts;
  const int n = 200000;
  for (int d = 0; d < n; ++d) {
    hazard::RngState stream = rng.child(static_cast<std::uint64_t>(d));
    counts[hazard::sample_marginal_set(theta, stream).items()] += 1;
  }
  for (const ItemSet& s : oracles::all_subsets(3)) {
    double p = hazard::marginal_set_prob(theta, s);
    double freq = static_cast<double>(counts[s.items()]) / n;
    double sigma = std::sqrt(p * (1.0 - p) / n);
    EXPECT_NEAR(freq, p, 5.0 * sigma + 1e-4) << "set size " << s.count();
  }
}

TEST(Sampler, SequenceFrequenciesMatchExactProbabilities) {
  hazard::RngState rng(404);
  ParamMatrix theta = oracles::random_theta(2, rng);
  std::map<Sequence, int> counts;
  const int n = 200000;
  for (int d = 0; d < n; ++d) {
    hazard::RngState stream = rng.child(static_cast<std::uint64_t>(d));
    counts[hazard::sample_timed_trajectory(theta, stream).sequence] += 1;
  }
  for (const Sequence& sigma : oracles::all_sequences(2)) {
    double p = hazard::marginal_sequence_prob(theta, sigma);
    double freq = static_cast<double>(counts[sigma]) / n;
    double sigma_mc = std::sqrt(p * (1.0 - p) / n);
    EXPECT_NEAR(freq, p, 5.0 * sigma_mc + 1e-4);
  }
}

// Holding times must reflect the exit rates: conditional on leaving the
// empty state, the first holding time averages near 1/(1 + qh) ... the wait
// is Exp(qh) truncated by the Exp(1) observation clock, so E[h | step] =
// 1/(1 + qh).
TEST(Sampler, FirstHoldingTimeMatchesCompetingClock) {
  hazard::RngState rng(405);
  ParamMatrix theta = oracles::random_theta(3, rng);
  double qh = hazard::exit_rate(theta, ItemSet(3));
  double sum = 0.0;
  int steps = 0;
  const int n = 200000;
  for (int d = 0; d < n; ++d) {
    hazard::RngState stream = rng.child(static_cast<std::uint64_t>(d));
    hazard::TimedTrajectory traj = hazard::sample_timed_trajectory(theta, stream);
    if (!traj.holding_times.empty()) {
      sum += traj.holding_times[0];
      ++steps;
    }
  }
  EXPECT_NEAR(sum / steps, 1.0 / (1.0 + qh), 0.01);
}

TEST(GenerateDataset, ShapesAndDeterminism) {
  hazard::RngState rng(406);
  ParamMatrix theta = oracles::random_theta(4, rng);
  theta.item_names = {"a", "b", "c", "d"};
  hazard::RngState r1(99);
  Dataset d1 = hazard::generate_dataset(theta, 500, /*with_times=*/true, r1);
  EXPECT_EQ(d1.n, 4);
  EXPECT_EQ(d1.samples.size(), 500u);
  EXPECT_EQ(d1.times.size(), 500u);
  EXPECT_EQ(d1.item_names, theta.item_names);
  for (double t : d1.times) EXPECT_GT(t, 0.0);

  hazard::RngState r2(99);
  Dataset d2 = hazard::generate_dataset(theta, 500, true, r2);
  for (std::size_t i = 0; i < 500; ++i) {
    EXPECT_EQ(d1.samples[i].items(), d2.samples[i].items());
    EXPECT_DOUBLE_EQ(d1.times[i], d2.times[i]);
  }
}

TEST(GenerateDataset, ThreadCountInvariant) {
  hazard::RngState rng(407);
  ParamMatrix theta = oracles::random_theta(5, rng);
  hazard::RngState r1(123);
  hazard::RngState r2(123);
  Dataset d1 = hazard::generate_dataset(theta, 400, true, r1, /*threads=*/1);
  Dataset d2 = hazard::generate_dataset(theta, 400, true, r2, /*threads=*/7);
  for (std::size_t i = 0; i < 400; ++i) {
    EXPECT_EQ(d1.samples[i].items(), d2.samples[i].items());
    EXPECT_DOUBLE_EQ(d1.times[i], d2.times[i]);
  }
}

TEST(GenerateDataset, WithoutTimesLeavesTimesEmpty) {
  ParamMatrix theta = ParamMatrix::zeros(2);
  hazard::RngState rng(1);
  Dataset data = hazard::generate_dataset(theta, 50, false, rng);
  EXPECT_FALSE(data.has_times());
}

// The recorded sample must equal the set of items whose transitions happened
// before t_obs; with times attached, the conditional likelihood of the
// sample at its time must be positive.
TEST(GenerateDataset, TimedSamplesHavePositiveConditionalProbability) {
  hazard::RngState rng(408);
  ParamMatrix theta = oracles::random_theta(3, rng);
  hazard::RngState stream(55);
  Dataset data = hazard::generate_dataset(theta, 200, true, stream);
  for (std::size_t d = 0; d < data.samples.size(); ++d) {
    double p = hazard::set_given_time_prob(theta, data.samples[d], data.times[d]);
    EXPECT_GT(p, 0.0) << "sample " << d;
  }
}
