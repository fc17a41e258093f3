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

// Embedding-space pair similarity and label-error scorers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "dqaudit/core/error.hpp"
#include "dqaudit/core/rng.hpp"
#include "dqaudit/core/types.hpp"
#include "dqaudit/detectors/score_vector.hpp"

namespace dqaudit::detectors {

// 1 / (1 + Euclidean distance) for each pair, keyed by canonical pair key.
inline ScoreVector EmbedPairSimilarity(const EmbeddingMatrix& x,
                                       const std::vector<PairRecord>& pairs) {
  ScoreVector out;
  out.keys.reserve(pairs.size());
  out.scores.reserve(pairs.size());
  for (const auto& p : pairs) {
    const auto a = x.IndexOf(p.item_a);
    const auto b = x.IndexOf(p.item_b);
    Require(a.has_value() && b.has_value(), ErrorKind::kData,
            "pair '" + p.key() + "' references an item without an embedding");
    out.keys.push_back(p.key());
    out.scores.push_back(1.0 / (1.0 + x.Distance(*a, *b)));
  }
  return out;
}

namespace internal {

inline double MeanOfSmallest(std::vector<double>& v, std::size_t k) {
  k = std::min(k, v.size());
  std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  double s = 0.0;
  for (std::size_t t = 0; t < k; ++t) s += v[t];
  return s / static_cast<double>(k);
}

inline std::size_t ClassCount(const std::vector<int>& labels) {
  int top = -1;
  for (int l : labels) {
    Require(l >= 0, ErrorKind::kData, "class ids must be non-negative");
    top = std::max(top, l);
  }
  return static_cast<std::size_t>(top + 1);
}

}  // namespace internal

// Mean distance to the k nearest same-label items over the mean distance to
// the k nearest other-label items. Items alone in their class have no
// same-label neighbours; they get ratio 1 and are listed in `flagged`.
inline ScoreVector EmbedLabelErrorScore(const EmbeddingMatrix& x, const std::vector<int>& labels,
                                        std::size_t k = 10) {
  const std::size_t n = x.rows();
  Require(labels.size() == n, ErrorKind::kContract, "one label per embedding row required");
  Require(k >= 1, ErrorKind::kContract, "k must be positive");
  constexpr double kEps = 1e-12;
  ScoreVector out{x.ids(), std::vector<double>(n)};
  std::vector<double> same, other;
  for (std::size_t i = 0; i < n; ++i) {
    same.clear();
    other.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      (labels[j] == labels[i] ? same : other).push_back(x.Distance(i, j));
    }
    Require(!other.empty(), ErrorKind::kContract,
            "label-error score needs at least two classes");
    const double denom = internal::MeanOfSmallest(other, k);
    if (same.empty()) {
      out.scores[i] = denom / (kEps + denom);
      out.flagged.push_back(x.ids()[i]);
      continue;
    }
    out.scores[i] = internal::MeanOfSmallest(same, k) / (kEps + denom);
  }
  return out;
}

// Out-of-fold class probabilities from neighbour label counts with one
// pseudo-count per class. Rows are indexed like the embedding matrix.
inline std::vector<std::vector<double>> KnnProbEstimator(const EmbeddingMatrix& x,
                                                         const std::vector<int>& labels,
                                                         std::size_t k = 10,
                                                         std::size_t folds = 5,
                                                         std::uint64_t seed = 0) {
  const std::size_t n = x.rows();
  Require(labels.size() == n, ErrorKind::kContract, "one label per embedding row required");
  Require(k >= 1 && folds >= 2 && folds <= n, ErrorKind::kContract,
          "need k >= 1 and 2 <= folds <= number of items");
  const std::size_t classes = internal::ClassCount(labels);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.Shuffle(order);
  std::vector<std::size_t> fold(n);
  for (std::size_t p = 0; p < n; ++p) fold[order[p]] = p % folds;

  std::vector<std::vector<double>> probs(n, std::vector<double>(classes));
  std::vector<std::pair<double, std::size_t>> cand;
  for (std::size_t i = 0; i < n; ++i) {
    cand.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (fold[j] != fold[i]) cand.emplace_back(x.SquaredDistance(i, j), j);
    const std::size_t take = std::min(k, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end());
    std::vector<double> counts(classes, 1.0);
    for (std::size_t t = 0; t < take; ++t) counts[static_cast<std::size_t>(labels[cand[t].second])] += 1.0;
    const double total = static_cast<double>(take + classes);
    for (std::size_t c = 0; c < classes; ++c) probs[i][c] = counts[c] / total;
  }
  return probs;
}

struct ConfidentJoint {
  std::vector<std::vector<std::size_t>> counts;  // [given][suspected]
  std::vector<double> thresholds;                // t_j per class

  std::size_t Total() const {
    std::size_t s = 0;
    for (const auto& row : counts)
      for (auto c : row) s += c;
    return s;
  }
};

struct ConfidentLearningResult {
  ConfidentJoint joint;
  std::vector<std::size_t> flagged;  // items counted off the diagonal
  std::vector<double> scores;        // (max_{j != y} p_j - p_y + 1) / 2
};

// Per-class thresholds t_j are the mean p(j|x) over items given label j; a
// class nobody carries gets threshold 1. Each item lands in the cell
// (given, j*) with j* the most probable class clearing its threshold.
inline ConfidentLearningResult ConfidentLearning(const std::vector<std::vector<double>>& probs,
                                                 const std::vector<int>& given) {
  const std::size_t n = probs.size();
  Require(n == given.size() && n > 0, ErrorKind::kContract,
          "need one probability row per given label");
  const std::size_t classes = probs[0].size();
  Require(classes >= 2, ErrorKind::kContract, "need at least two classes");
  for (std::size_t i = 0; i < n; ++i) {
    Require(probs[i].size() == classes, ErrorKind::kContract, "ragged probability rows");
    double s = 0.0;
    for (double p : probs[i]) {
      Require(std::isfinite(p) && p >= 0.0, ErrorKind::kContract,
              "probabilities must be finite and non-negative");
      s += p;
    }
    Require(std::abs(s - 1.0) <= 1e-6, ErrorKind::kContract,
            "probability row " + std::to_string(i) + " does not sum to 1");
    Require(given[i] >= 0 && static_cast<std::size_t>(given[i]) < classes, ErrorKind::kData,
            "given label out of range in row " + std::to_string(i));
  }

  ConfidentLearningResult out;
  out.joint.counts.assign(classes, std::vector<std::size_t>(classes, 0));
  out.joint.thresholds.assign(classes, 0.0);
  std::vector<std::size_t> carried(classes, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::size_t>(given[i]);
    out.joint.thresholds[y] += probs[i][y];
    ++carried[y];
  }
  for (std::size_t j = 0; j < classes; ++j)
    out.joint.thresholds[j] =
        carried[j] ? out.joint.thresholds[j] / static_cast<double>(carried[j]) : 1.0;

  out.scores.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::size_t>(given[i]);
    std::size_t best = classes;
    for (std::size_t j = 0; j < classes; ++j)
      if (probs[i][j] >= out.joint.thresholds[j] && (best == classes || probs[i][j] > probs[i][best]))
        best = j;
    if (best != classes) {
      ++out.joint.counts[y][best];
      if (best != y) out.flagged.push_back(i);
    }
    double other = 0.0;
    for (std::size_t j = 0; j < classes; ++j)
      if (j != y) other = std::max(other, probs[i][j]);
    out.scores[i] = (other - probs[i][y] + 1.0) / 2.0;
  }
  return out;
}

}  // namespace dqaudit::detectors
