#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "hazard/errors.hpp"
#include "hazard/model.hpp"
#include "hazard/rng.hpp"
#include "oracles.hpp"

using hazard::Dataset;
using hazard::GradMatrix;
using hazard::ItemSet;
using hazard::ParamMatrix;
using hazard::Sequence;

TEST(ItemSetOps, AddRemoveContains) {
  ItemSet s(6);
  EXPECT_TRUE(s.empty());
  s.add(3);
  s.add(0);
  EXPECT_TRUE(s.contains(0));
  EXPECT_TRUE(s.contains(3));
  EXPECT_FALSE(s.contains(1));
  EXPECT_EQ(s.count(), 2);
  s.remove(3);
  EXPECT_FALSE(s.contains(3));
  EXPECT_EQ(s.count(), 1);
}

TEST(ItemSetOps, ItemsAscending) {
  ItemSet s = ItemSet::of(8, {5, 1, 7, 0});
  std::vector<int> expected{0, 1, 5, 7};
  EXPECT_EQ(s.items(), expected);
  EXPECT_EQ(s.n(), 8);
  EXPECT_FALSE(s.full());
  ItemSet full = ItemSet::of(3, {0, 1, 2});
  EXPECT_TRUE(full.full());
}

TEST(ItemSetOps, EqualityAndBounds) {
  EXPECT_EQ(ItemSet::of(4, {1, 2}), ItemSet::of(4, {2, 1}));
  EXPECT_THROW(ItemSet::of(4, {4}), hazard::DataError);
  EXPECT_THROW(ItemSet(-1), hazard::DataError);
}

TEST(ParamMatrixOps, RowMajorLayout) {
  ParamMatrix theta = ParamMatrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
  EXPECT_EQ(theta.n, 2);
  EXPECT_DOUBLE_EQ(theta.at(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(theta.at(0, 1), 2.0);
  EXPECT_DOUBLE_EQ(theta.at(1, 0), 3.0);
  EXPECT_DOUBLE_EQ(theta.at(1, 1), 4.0);
  EXPECT_THROW(ParamMatrix::from_rows({{1.0}, {2.0, 3.0}}), hazard::DataError);
}

TEST(ParamMatrixOps, ValidateFinite) {
  ParamMatrix theta = ParamMatrix::zeros(2);
  hazard::validate_finite(theta);
  theta.at(1, 0) = std::nan("");
  EXPECT_THROW(hazard::validate_finite(theta), hazard::DataError);
}

TEST(SequenceOps, Validation) {
  hazard::validate_sequence(4, {3, 0, 2});
  EXPECT_THROW(hazard::validate_sequence(4, {1, 1}), hazard::DataError);
  EXPECT_THROW(hazard::validate_sequence(4, {4}), hazard::DataError);
  EXPECT_THROW(hazard::validate_sequence(4, {-1}), hazard::DataError);
}

TEST(SequenceOps, ToSet) {
  ItemSet s = hazard::to_set(5, {4, 1});
  EXPECT_TRUE(s.contains(1));
  EXPECT_TRUE(s.contains(4));
  EXPECT_EQ(s.count(), 2);
}

TEST(Rates, MatchDirectFormula) {
  hazard::RngState rng(5);
  ParamMatrix theta = oracles::random_theta(5, rng);
  ItemSet s = ItemSet::of(5, {0, 3});
  std::vector<int> prefix{0, 3};
  for (int j : {1, 2, 4}) {
    EXPECT_NEAR(hazard::transition_rate(theta, s, j), oracles::ref_rate(theta, prefix, j),
                1e-12);
  }
  EXPECT_NEAR(hazard::exit_rate(theta, s), oracles::ref_exit_rate(theta, prefix, 5), 1e-12);
  EXPECT_NEAR(hazard::exit_rate(theta, ItemSet(5)), oracles::ref_exit_rate(theta, {}, 5), 1e-12);
}

TEST(Weights, ExponentiatesEveryEntry) {
  hazard::RngState rng(6);
  ParamMatrix theta = oracles::random_theta(3, rng);
  auto W = hazard::detail::Weights::of(theta);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      EXPECT_DOUBLE_EQ(W.at(i, j), std::exp(theta.at(i, j)));
    }
  }
}

TEST(GradMatrixOps, AddScaledAndScale) {
  GradMatrix a = GradMatrix::zeros(2);
  GradMatrix b = GradMatrix::zeros(2);
  b.at(0, 1) = 2.0;
  b.at(1, 1) = -4.0;
  a.add_scaled(b, 0.5);
  EXPECT_DOUBLE_EQ(a.at(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(a.at(1, 1), -2.0);
  a.scale(3.0);
  EXPECT_DOUBLE_EQ(a.at(1, 1), -6.0);
}

TEST(BlockStructure, BlockDiagonalAssembly) {
  ParamMatrix a = ParamMatrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
  ParamMatrix b = ParamMatrix::from_rows({{5.0}});
  ParamMatrix full = hazard::make_block_diagonal({a, b});
  EXPECT_EQ(full.n, 3);
  EXPECT_DOUBLE_EQ(full.at(0, 1), 2.0);
  EXPECT_DOUBLE_EQ(full.at(2, 2), 5.0);
  EXPECT_DOUBLE_EQ(full.at(0, 2), 0.0);
  EXPECT_DOUBLE_EQ(full.at(2, 0), 0.0);
  ASSERT_EQ(full.blocks.size(), 2u);
  EXPECT_EQ(full.blocks[0], (std::pair<int, int>{0, 1}));
  EXPECT_EQ(full.blocks[1], (std::pair<int, int>{2, 2}));

  ParamMatrix sub = hazard::submatrix(full, 0, 1);
  EXPECT_EQ(sub.n, 2);
  EXPECT_DOUBLE_EQ(sub.at(1, 0), 3.0);
}

TEST(BlockStructure, EffectiveBlocksDefaultsToWholeMatrix) {
  ParamMatrix theta = ParamMatrix::zeros(4);
  auto blocks = hazard::effective_blocks(theta);
  ASSERT_EQ(blocks.size(), 1u);
  EXPECT_EQ(blocks[0], (std::pair<int, int>{0, 3}));
  theta.blocks = {{0, 1}, {2, 3}};
  blocks = hazard::effective_blocks(theta);
  ASSERT_EQ(blocks.size(), 2u);
}

TEST(DatasetOps, Validation) {
  Dataset data;
  data.n = 3;
  EXPECT_THROW(hazard::validate_dataset(data), hazard::DataError);  // no samples
  data.samples.push_back(ItemSet::of(3, {1}));
  hazard::validate_dataset(data);
  data.times.push_back(1.0);
  data.times.push_back(2.0);
  EXPECT_THROW(hazard::validate_dataset(data), hazard::DataError);  // length mismatch
  data.times = {1.0};
  hazard::validate_dataset(data);
  data.times = {-0.5};
  EXPECT_THROW(hazard::validate_dataset(data), hazard::DataError);  // negative time
  data.times.clear();
  data.samples.push_back(ItemSet::of(2, {0}));
  EXPECT_THROW(hazard::validate_dataset(data), hazard::DataError);  // capacity mismatch
}
