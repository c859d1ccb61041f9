#pragma once

#include <bitset>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hazard/errors.hpp"

// Core model state: an n-item ground set, subsets of it, ordered sequences,
// and the n x n log-rate parameter matrix. The chain only ever adds items;
// the rate of adding j to state S is exp(theta_jj + sum_{i in S} theta_ij).
// Item indices are 0-based everywhere in process; the I/O layer owns the
// 1-based user-facing convention.

namespace hazard {

#ifndef HAZARD_MAX_ITEMS
#define HAZARD_MAX_ITEMS 512
#endif
inline constexpr int kMaxItems = HAZARD_MAX_ITEMS;

namespace detail {
inline void check_item_count(int n) {
  if (n < 1) throw DataError{"item count must be positive, got " + std::to_string(n)};
  if (n > kMaxItems) {
    throw DataError{"item count " + std::to_string(n) + " exceeds capacity " +
                    std::to_string(kMaxItems)};
  }
}
}  // namespace detail

// Subset of {0..n-1} with cached cardinality. Fixed bitset capacity keeps
// membership tests branch-free; n > kMaxItems is a construction error.
class ItemSet {
 public:
  ItemSet() = default;
  explicit ItemSet(int n) : n_{n} { detail::check_item_count(n); }

  int n() const { return n_; }
  int count() const { return count_; }
  bool empty() const { return count_ == 0; }
  bool full() const { return count_ == n_; }

  bool contains(int i) const {
    check_index(i);
    return bits_[static_cast<std::size_t>(i)];
  }

  void add(int i) {
    check_index(i);
    if (bits_[static_cast<std::size_t>(i)]) throw DataError{"item already in set: " + std::to_string(i + 1)};
    bits_.set(static_cast<std::size_t>(i));
    ++count_;
  }

  void remove(int i) {
    check_index(i);
    if (!bits_[static_cast<std::size_t>(i)]) throw DataError{"item not in set: " + std::to_string(i + 1)};
    bits_.reset(static_cast<std::size_t>(i));
    --count_;
  }

  std::vector<int> items() const {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(count_));
    for (int i = 0; i < n_; ++i) {
      if (bits_[static_cast<std::size_t>(i)]) out.push_back(i);
    }
    return out;
  }

  static ItemSet of(int n, std::initializer_list<int> items) {
    ItemSet s{n};
    for (int i : items) s.add(i);
    return s;
  }

  friend bool operator==(const ItemSet& a, const ItemSet& b) {
    return a.n_ == b.n_ && a.bits_ == b.bits_;
  }

 private:
  void check_index(int i) const {
    if (i < 0 || i >= n_) {
      throw DataError{"item index out of range: " + std::to_string(i + 1) +
                      " (n = " + std::to_string(n_) + ")"};
    }
  }

  std::bitset<kMaxItems> bits_;
  int n_ = 0;
  int count_ = 0;
};

// Ordered list of distinct item indices; a (possibly partial) jump order.
using Sequence = std::vector<int>;

// n x n log-rate matrix theta, row-major. theta(i,j) for i != j is item i's
// multiplicative influence (log scale) on item j's rate; theta(j,j) is item
// j's base log-rate. Optional labels and an optional block partition
// (contiguous, covering, explicitly declared -- never inferred).
struct ParamMatrix {
  int n = 0;
  std::vector<double> theta;                   // row-major, size n*n
  std::vector<std::string> item_names;         // empty or size n
  std::vector<std::pair<int, int>> blocks;     // 0-based [first, last] inclusive; empty = one block

  double& at(int i, int j) { return theta[static_cast<std::size_t>(i) * n + j]; }
  double at(int i, int j) const { return theta[static_cast<std::size_t>(i) * n + j]; }

  static ParamMatrix zeros(int n) {
    detail::check_item_count(n);
    ParamMatrix m;
    m.n = n;
    m.theta.assign(static_cast<std::size_t>(n) * n, 0.0);
    return m;
  }

  static ParamMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    ParamMatrix m = zeros(static_cast<int>(rows.size()));
    for (int i = 0; i < m.n; ++i) {
      if (static_cast<int>(rows[static_cast<std::size_t>(i)].size()) != m.n) {
        throw DataError{"theta row " + std::to_string(i + 1) + " has wrong length"};
      }
      for (int j = 0; j < m.n; ++j) m.at(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    return m;
  }
};

// Throws unless every entry is finite (stored NaN/Inf is a contract breach).
inline void validate_finite(const ParamMatrix& theta) {
  for (double v : theta.theta) {
    if (!std::isfinite(v)) throw DataError{"parameter matrix contains a non-finite entry"};
  }
}

// Throws unless sigma holds distinct in-range items for an n-item model.
inline void validate_sequence(int n, const Sequence& sigma) {
  ItemSet seen{n};
  for (int item : sigma) seen.add(item);  // add() rejects range errors and duplicates
}

inline ItemSet to_set(int n, const Sequence& sigma) {
  ItemSet s{n};
  for (int item : sigma) s.add(item);
  return s;
}

// Gradient of a scalar objective with respect to theta; same layout.
struct GradMatrix {
  int n = 0;
  std::vector<double> g;

  double& at(int i, int j) { return g[static_cast<std::size_t>(i) * n + j]; }
  double at(int i, int j) const { return g[static_cast<std::size_t>(i) * n + j]; }

  static GradMatrix zeros(int n) {
    GradMatrix m;
    m.n = n;
    m.g.assign(static_cast<std::size_t>(n) * n, 0.0);
    return m;
  }

  GradMatrix& add_scaled(const GradMatrix& other, double weight) {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += weight * other.g[i];
    return *this;
  }

  GradMatrix& scale(double factor) {
    for (double& v : g) v *= factor;
    return *this;
  }
};

// Cross-sectional data: unordered sets, optionally with true observation times.
struct Dataset {
  int n = 0;
  std::vector<ItemSet> samples;
  std::vector<double> times;               // empty, or one entry per sample
  std::vector<std::string> item_names;     // empty or size n

  bool has_times() const { return !times.empty(); }
};

inline void validate_dataset(const Dataset& data) {
  detail::check_item_count(data.n);
  if (data.samples.empty()) throw DataError{"dataset has no samples"};
  for (const ItemSet& s : data.samples) {
    if (s.n() != data.n) throw DataError{"dataset sample capacity does not match n"};
  }
  if (!data.times.empty() && data.times.size() != data.samples.size()) {
    throw DataError{"times length does not match sample count"};
  }
  for (double t : data.times) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw DataError{"observation times must be finite and nonnegative"};
  }
}

namespace detail {

// Cached w_ij = exp(theta_ij). Rebuilt whenever theta changes; sequence
// evaluation and simulation then run on multiply-adds with no exp() in
// inner loops.
struct Weights {
  int n = 0;
  std::vector<double> w;

  static Weights of(const ParamMatrix& theta) {
    Weights W;
    W.n = theta.n;
    W.w.resize(theta.theta.size());
    for (std::size_t i = 0; i < W.w.size(); ++i) W.w[i] = std::exp(theta.theta[i]);
    return W;
  }

  double at(int i, int j) const { return w[static_cast<std::size_t>(i) * n + j]; }
};

}  // namespace detail

// log q_{s, s+{j}} = theta_jj + sum_{i in s} theta_ij. Precondition: j not in s.
inline double log_transition_rate(const ParamMatrix& theta, const ItemSet& s, int j) {
  if (s.contains(j)) throw DataError{"transition target already present: item " + std::to_string(j + 1)};
  double exponent = theta.at(j, j);
  for (int i = 0; i < theta.n; ++i) {
    if (i != j && s.contains(i)) exponent += theta.at(i, j);
  }
  return exponent;
}

inline double transition_rate(const ParamMatrix& theta, const ItemSet& s, int j) {
  return std::exp(log_transition_rate(theta, s, j));
}

// Total rate of leaving s: sum of transition rates over absent items, in
// ascending item order (the summation order other code must reproduce when
// it needs bit-identical agreement). Exactly 0 when s = V.
inline double exit_rate(const ParamMatrix& theta, const ItemSet& s) {
  double total = 0.0;
  for (int j = 0; j < theta.n; ++j) {
    if (!s.contains(j)) total += transition_rate(theta, s, j);
  }
  return total;
}

// Block-diagonal composition; cross-block entries are 0 (weight 1 = no
// interaction). Block k occupies indices [offset_k, offset_k + n_k).
inline ParamMatrix make_block_diagonal(const std::vector<ParamMatrix>& blocks) {
  if (blocks.empty()) throw DataError{"make_block_diagonal requires at least one block"};
  int total = 0;
  for (const ParamMatrix& b : blocks) total += b.n;
  ParamMatrix full = ParamMatrix::zeros(total);
  int offset = 0;
  for (const ParamMatrix& b : blocks) {
    for (int i = 0; i < b.n; ++i) {
      for (int j = 0; j < b.n; ++j) full.at(offset + i, offset + j) = b.at(i, j);
    }
    full.blocks.emplace_back(offset, offset + b.n - 1);
    if (!b.item_names.empty()) {
      if (full.item_names.empty()) full.item_names.resize(static_cast<std::size_t>(total));
      for (int i = 0; i < b.n; ++i) full.item_names[static_cast<std::size_t>(offset + i)] = b.item_names[static_cast<std::size_t>(i)];
    }
    offset += b.n;
  }
  return full;
}

// Restriction of theta to a contiguous index range [first, last], 0-based.
inline ParamMatrix submatrix(const ParamMatrix& theta, int first, int last) {
  if (first < 0 || last >= theta.n || first > last) throw DataError{"invalid block range"};
  ParamMatrix sub = ParamMatrix::zeros(last - first + 1);
  for (int i = first; i <= last; ++i) {
    for (int j = first; j <= last; ++j) sub.at(i - first, j - first) = theta.at(i, j);
  }
  return sub;
}

// Declared blocks, defaulting to one whole-matrix block. Declared ranges must
// be contiguous, ordered, and cover 0..n-1.
inline std::vector<std::pair<int, int>> effective_blocks(const ParamMatrix& theta) {
  if (theta.blocks.empty()) return {{0, theta.n - 1}};
  int expect = 0;
  for (auto [first, last] : theta.blocks) {
    if (first != expect || last < first || last >= theta.n) {
      throw DataError{"declared blocks must be contiguous, ordered, and cover all items"};
    }
    expect = last + 1;
  }
  if (expect != theta.n) throw DataError{"declared blocks do not cover all items"};
  return theta.blocks;
}

}  // namespace hazard
