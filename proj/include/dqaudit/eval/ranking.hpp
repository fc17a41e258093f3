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

// Ranking metrics for detector scores against binary issue labels.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <vector>

#include "dqaudit/core/error.hpp"
#include "dqaudit/core/types.hpp"

namespace dqaudit::eval {

// Entry indices sorted by score descending, ties by ascending key.
inline std::vector<std::size_t> RankOrder(const LabeledRanking& r) {
  const auto& e = r.entries();
  std::vector<std::size_t> order(e.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (e[a].score != e[b].score) return e[a].score > e[b].score;
    return e[a].key < e[b].key;
  });
  return order;
}

inline double BaselinePPlus(const LabeledRanking& r) {
  return static_cast<double>(r.positives()) / static_cast<double>(r.size());
}

// Mann-Whitney statistic: P(score_pos > score_neg) + 0.5 P(tie).
inline double Auroc(const LabeledRanking& r) {
  const std::size_t pos = r.positives();
  const std::size_t neg = r.size() - pos;
  if (pos == 0 || neg == 0)
    throw Error(ErrorKind::kUndefinedMetric, "AUROC needs both positive and negative labels");
  const auto& e = r.entries();
  std::vector<std::size_t> order(e.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return e[a].score < e[b].score; });
  // For each tie group: positives beat every negative strictly below, half of those tied.
  double wins = 0.0;
  std::size_t neg_below = 0;
  for (std::size_t g = 0; g < order.size();) {
    std::size_t end = g;
    std::size_t gp = 0, gn = 0;
    while (end < order.size() && e[order[end]].score == e[order[g]].score) {
      (e[order[end]].label ? gp : gn) += 1;
      ++end;
    }
    wins += static_cast<double>(gp) * (static_cast<double>(neg_below) + 0.5 * static_cast<double>(gn));
    neg_below += gn;
    g = end;
  }
  return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

// Non-interpolated average precision over the deterministic rank order.
inline double AveragePrecision(const LabeledRanking& r) {
  const std::size_t pos = r.positives();
  if (pos == 0) throw Error(ErrorKind::kUndefinedMetric, "AP needs at least one positive");
  const auto order = RankOrder(r);
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (r.entries()[order[rank]].label) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  return sum / static_cast<double>(pos);
}

struct AtK {
  double value = 0.0;
  std::size_t k_used = 0;
  bool clipped = false;  // requested k exceeded the ranking length
};

inline std::size_t PositivesInTop(const LabeledRanking& r, std::size_t k) {
  const auto order = RankOrder(r);
  std::size_t hits = 0;
  for (std::size_t t = 0; t < k; ++t) hits += static_cast<std::size_t>(r.entries()[order[t]].label);
  return hits;
}

inline AtK PrecisionAtK(const LabeledRanking& r, std::size_t k) {
  Require(k >= 1, ErrorKind::kContract, "k must be at least 1");
  AtK out;
  out.clipped = k > r.size();
  out.k_used = std::min(k, r.size());
  out.value = static_cast<double>(PositivesInTop(r, out.k_used)) / static_cast<double>(out.k_used);
  return out;
}

inline AtK RecallAtK(const LabeledRanking& r, std::size_t k) {
  Require(k >= 1, ErrorKind::kContract, "k must be at least 1");
  const std::size_t pos = r.positives();
  if (pos == 0) throw Error(ErrorKind::kUndefinedMetric, "recall needs at least one positive");
  AtK out;
  out.clipped = k > r.size();
  out.k_used = std::min(k, r.size());
  out.value = static_cast<double>(PositivesInTop(r, out.k_used)) / static_cast<double>(pos);
  return out;
}

}  // namespace dqaudit::eval
