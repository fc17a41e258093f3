/*
 * Copyright 2026 The dqaudit Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

// Anomaly scorers over embeddings: k-th neighbour distance, isolation forest,
// histogram-based outlier score and empirical-CDF tail probabilities.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "dqaudit/core/error.hpp"
#include "dqaudit/core/rng.hpp"
#include "dqaudit/core/types.hpp"
#include "dqaudit/detectors/score_vector.hpp"

namespace dqaudit::detectors {

inline ScoreVector KnnOutlierScore(const EmbeddingMatrix& x, std::size_t k = 5) {
  const std::size_t n = x.rows();
  Require(k >= 1 && k < n, ErrorKind::kContract,
          "k must satisfy 1 <= k < number of items");
  ScoreVector out{x.ids(), std::vector<double>(n)};
  std::vector<double> d;
  d.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    d.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) d.push_back(x.SquaredDistance(i, j));
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k - 1), d.end());
    out.scores[i] = std::sqrt(d[k - 1]);
  }
  return out;
}

// ---------------------------------------------------------------- isolation forest

// Expected path length of an unsuccessful search in a binary tree of n nodes.
inline double AveragePathLength(std::size_t n) {
  if (n <= 1) return 0.0;
  if (n == 2) return 1.0;
  const double m = static_cast<double>(n - 1);
  const double harmonic = std::log(m) + 0.5772156649015329;
  return 2.0 * harmonic - 2.0 * m / static_cast<double>(n);
}

struct IsolationNode {
  // Leaves have dim == kLeaf; size is the number of training points that reached it.
  static constexpr std::size_t kLeaf = std::numeric_limits<std::size_t>::max();
  std::size_t dim = kLeaf;
  double split = 0.0;
  std::size_t left = 0;
  std::size_t right = 0;
  std::size_t size = 0;
  // Range of the split dimension at build time, kept for invariant checks.
  double lo = 0.0;
  double hi = 0.0;
};

struct IsolationTree {
  std::vector<IsolationNode> nodes;  // nodes[0] is the root

  std::size_t Height() const {
    std::size_t best = 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
      auto [node, depth] = stack.back();
      stack.pop_back();
      best = std::max(best, depth);
      if (nodes[node].dim != IsolationNode::kLeaf) {
        stack.emplace_back(nodes[node].left, depth + 1);
        stack.emplace_back(nodes[node].right, depth + 1);
      }
    }
    return best;
  }

  double PathLength(std::span<const double> point) const {
    std::size_t node = 0;
    double depth = 0.0;
    while (nodes[node].dim != IsolationNode::kLeaf) {
      node = point[nodes[node].dim] < nodes[node].split ? nodes[node].left : nodes[node].right;
      depth += 1.0;
    }
    return depth + AveragePathLength(nodes[node].size);
  }
};

struct IForestModel {
  std::vector<IsolationTree> trees;
  std::size_t subsample_size = 0;
  std::size_t tree_count = 0;
  std::size_t dim = 0;
  std::uint64_t seed = 0;
  bool degenerate = false;  // every dimension constant in the training data
};

namespace internal {

inline std::size_t GrowIsolationTree(IsolationTree& tree, const EmbeddingMatrix& x,
                                     std::vector<std::size_t>& rows, std::size_t begin,
                                     std::size_t end, std::size_t depth, std::size_t limit,
                                     Rng& rng) {
  const std::size_t id = tree.nodes.size();
  tree.nodes.emplace_back();
  tree.nodes[id].size = end - begin;
  if (depth >= limit || end - begin <= 1) return id;

  // Dimensions that still vary inside this node.
  std::vector<std::size_t> usable;
  std::vector<std::pair<double, double>> range(x.dim());
  for (std::size_t d = 0; d < x.dim(); ++d) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t r = begin; r < end; ++r) {
      const double v = x.row(rows[r])[d];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    range[d] = {lo, hi};
    if (hi > lo) usable.push_back(d);
  }
  if (usable.empty()) return id;

  const std::size_t d = usable[rng.Index(usable.size())];
  const auto [lo, hi] = range[d];
  double split = lo + (hi - lo) * rng.UniformOpen();
  if (split <= lo) split = std::nextafter(lo, hi);
  auto mid_it = std::partition(rows.begin() + static_cast<std::ptrdiff_t>(begin),
                               rows.begin() + static_cast<std::ptrdiff_t>(end),
                               [&](std::size_t r) { return x.row(r)[d] < split; });
  const auto mid = static_cast<std::size_t>(mid_it - rows.begin());

  const std::size_t left = GrowIsolationTree(tree, x, rows, begin, mid, depth + 1, limit, rng);
  const std::size_t right = GrowIsolationTree(tree, x, rows, mid, end, depth + 1, limit, rng);
  auto& node = tree.nodes[id];
  node.dim = d;
  node.split = split;
  node.left = left;
  node.right = right;
  node.lo = lo;
  node.hi = hi;
  return id;
}

}  // namespace internal

inline IForestModel IForestFit(const EmbeddingMatrix& x, std::size_t tree_count = 100,
                               std::size_t subsample = 256, std::uint64_t seed = 0) {
  const std::size_t n = x.rows();
  Require(n >= 2, ErrorKind::kContract, "isolation forest needs at least 2 items");
  Require(tree_count >= 1 && subsample >= 2, ErrorKind::kContract,
          "need at least one tree and a subsample of at least 2");
  IForestModel model;
  model.subsample_size = std::min(subsample, n);
  model.tree_count = tree_count;
  model.dim = x.dim();
  model.seed = seed;
  const auto limit = static_cast<std::size_t>(
      std::ceil(std::log2(static_cast<double>(model.subsample_size))));

  model.degenerate = true;
  for (std::size_t d = 0; d < x.dim() && model.degenerate; ++d)
    for (std::size_t r = 1; r < n; ++r)
      if (x.row(r)[d] != x.row(0)[d]) {
        model.degenerate = false;
        break;
      }

  const Rng root(seed);
  model.trees.resize(tree_count);
  for (std::size_t t = 0; t < tree_count; ++t) {
    Rng rng = root.Split(t);
    auto rows = rng.SampleWithoutReplacement(n, model.subsample_size);
    internal::GrowIsolationTree(model.trees[t], x, rows, 0, rows.size(), 0, limit, rng);
  }
  return model;
}

// 2^(-E[h(x)] / c(psi)); values in (0, 1), larger is more anomalous.
inline ScoreVector IForestScore(const IForestModel& model, const EmbeddingMatrix& x) {
  Require(x.dim() == model.dim, ErrorKind::kContract,
          "embedding dimension differs from the fitted model");
  const double norm = AveragePathLength(model.subsample_size);
  ScoreVector out{x.ids(), std::vector<double>(x.rows())};
  out.degenerate = model.degenerate;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double total = 0.0;
    for (const auto& tree : model.trees) total += tree.PathLength(x.row(i));
    const double mean = total / static_cast<double>(model.trees.size());
    out.scores[i] = std::exp2(-mean / norm);
  }
  return out;
}

// ---------------------------------------------------------------- HBOS

struct HbosHistogram {
  double lo = 0.0;
  double width = 0.0;  // 0 for a constant dimension (single bin)
  std::vector<double> density;

  std::size_t Bin(double v) const {
    if (density.size() == 1 || width == 0.0) return 0;
    const double pos = std::floor((v - lo) / width);
    if (!(pos > 0.0)) return 0;  // also catches NaN
    return std::min(static_cast<std::size_t>(pos), density.size() - 1);
  }
};

struct HbosModel {
  std::vector<HbosHistogram> dims;
  std::size_t bin_count = 0;
};

inline HbosModel HbosFit(const EmbeddingMatrix& x, std::size_t bin_count = 10) {
  const std::size_t n = x.rows();
  Require(n >= 2, ErrorKind::kContract, "HBOS needs at least 2 items");
  Require(bin_count >= 1, ErrorKind::kContract, "bin_count must be positive");
  HbosModel model;
  model.bin_count = bin_count;
  model.dims.resize(x.dim());
  for (std::size_t d = 0; d < x.dim(); ++d) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t r = 0; r < n; ++r) {
      lo = std::min(lo, x.row(r)[d]);
      hi = std::max(hi, x.row(r)[d]);
    }
    auto& h = model.dims[d];
    h.lo = lo;
    if (hi == lo) {
      // Every point shares the one bin; unit density keeps the term constant.
      h.density = {1.0};
      continue;
    }
    h.width = (hi - lo) / static_cast<double>(bin_count);
    h.density.assign(bin_count, 0.0);
    std::vector<std::size_t> counts(bin_count, 0);
    for (std::size_t r = 0; r < n; ++r) ++counts[h.Bin(x.row(r)[d])];
    for (std::size_t b = 0; b < bin_count; ++b)
      h.density[b] = static_cast<double>(counts[b]) / (static_cast<double>(n) * h.width);
  }
  return model;
}

inline ScoreVector HbosScore(const HbosModel& model, const EmbeddingMatrix& x) {
  Require(x.dim() == model.dims.size(), ErrorKind::kContract,
          "embedding dimension differs from the fitted model");
  constexpr double kFloor = 1e-12;
  ScoreVector out{x.ids(), std::vector<double>(x.rows(), 0.0)};
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (std::size_t d = 0; d < x.dim(); ++d) {
      const auto& h = model.dims[d];
      s += -std::log(std::max(h.density[h.Bin(x.row(i)[d])], kFloor));
    }
    out.scores[i] = s;
  }
  return out;
}

inline ScoreVector HbosScore(const EmbeddingMatrix& x, std::size_t bin_count = 10) {
  return HbosScore(HbosFit(x, bin_count), x);
}

// ---------------------------------------------------------------- ECOD

struct EcodParts {
  std::vector<double> left, right, automatic;
};

inline EcodParts EcodComponents(const EmbeddingMatrix& x) {
  const std::size_t n = x.rows();
  Require(n >= 2, ErrorKind::kContract, "ECOD needs at least 2 items");
  const double nn = static_cast<double>(n);
  EcodParts parts{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
                  std::vector<double>(n, 0.0)};
  std::vector<double> col(n), sorted(n);
  for (std::size_t d = 0; d < x.dim(); ++d) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += (col[r] = x.row(r)[d]);
    mean /= nn;
    double m2 = 0.0, m3 = 0.0;
    for (double v : col) {
      const double c = v - mean;
      m2 += c * c;
      m3 += c * c * c;
    }
    m2 /= nn;
    m3 /= nn;
    const double skew = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;

    sorted = col;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t r = 0; r < n; ++r) {
      const auto le = std::upper_bound(sorted.begin(), sorted.end(), col[r]) - sorted.begin();
      const auto ge = sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), col[r]);
      const double tail_left = -std::log(static_cast<double>(le) / nn);
      const double tail_right = -std::log(static_cast<double>(ge) / nn);
      parts.left[r] += tail_left;
      parts.right[r] += tail_right;
      parts.automatic[r] += skew < 0.0 ? tail_left : tail_right;
    }
  }
  return parts;
}

inline ScoreVector EcodScore(const EmbeddingMatrix& x) {
  const auto parts = EcodComponents(x);
  ScoreVector out{x.ids(), std::vector<double>(x.rows())};
  for (std::size_t i = 0; i < x.rows(); ++i)
    out.scores[i] = std::max({parts.left[i], parts.right[i], parts.automatic[i]});
  return out;
}

}  // namespace dqaudit::detectors
