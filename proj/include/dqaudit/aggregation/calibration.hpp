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

// Expert-driven threshold selection on top of the aggregated probabilities:
// stratified sampling over the p_bar range, per-bin positive fractions, the
// threshold rule, and final labels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "dqaudit/core/error.hpp"
#include "dqaudit/core/rng.hpp"

namespace dqaudit::aggregation {

enum class BinningMode { kQuantile, kEqualWidth };

struct StratifiedSample {
  std::size_t bin_count = 0;
  std::vector<std::size_t> items;       // indices into p_bar, grouped by bin
  std::vector<std::size_t> sample_bin;  // bin of each sampled item
  std::vector<std::size_t> bin_sizes;   // population per bin
  // bin_count + 1 population edges: lowest p_bar of each bin, then the
  // maximum. Non-decreasing; equal-mass bins repeat edges when p_bar ties.
  std::vector<double> bin_edges;
  bool fewer_items_than_bins = false;
};

inline std::vector<std::size_t> AssignBins(std::span<const double> p_bar,
                                           std::size_t bin_count,
                                           BinningMode mode) {
  const std::size_t n = p_bar.size();
  std::vector<std::size_t> bin(n);
  if (mode == BinningMode::kEqualWidth) {
    for (std::size_t i = 0; i < n; ++i) {
      const double x = std::clamp(p_bar[i], 0.0, 1.0);
      bin[i] = std::min(static_cast<std::size_t>(x * static_cast<double>(bin_count)),
                        bin_count - 1);
    }
    return bin;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return p_bar[a] < p_bar[b];
  });
  std::size_t k = 0;
  for (std::size_t pos = 0; pos < n; ++pos) {
    // bin k covers sorted positions [k*n/B, (k+1)*n/B)
    while ((k + 1) * n / bin_count <= pos) ++k;
    bin[order[pos]] = k;
  }
  return bin;
}

inline StratifiedSample StratifiedSampleItems(
    std::span<const double> p_bar, std::size_t bin_count = 20,
    std::size_t per_bin = 20, std::uint64_t seed = 0,
    BinningMode mode = BinningMode::kQuantile) {
  Require(bin_count >= 1 && per_bin >= 1, ErrorKind::kContract,
          "bin_count and per_bin must be >= 1");
  StratifiedSample out;
  out.bin_count = bin_count;
  const std::size_t n = p_bar.size();
  out.fewer_items_than_bins = n < bin_count;

  const auto bin = AssignBins(p_bar, bin_count, mode);
  std::vector<std::vector<std::size_t>> members(bin_count);
  for (std::size_t i = 0; i < n; ++i) members[bin[i]].push_back(i);

  out.bin_sizes.resize(bin_count);
  out.bin_edges.assign(bin_count + 1, std::numeric_limits<double>::quiet_NaN());
  double hi = n ? p_bar[0] : 0.0;
  for (double x : p_bar) hi = std::max(hi, x);
  out.bin_edges[bin_count] = hi;
  for (std::size_t k = bin_count; k-- > 0;) {
    out.bin_sizes[k] = members[k].size();
    if (mode == BinningMode::kEqualWidth) {
      out.bin_edges[k] = static_cast<double>(k) / static_cast<double>(bin_count);
    } else if (members[k].empty()) {
      out.bin_edges[k] = out.bin_edges[k + 1];
    } else {
      double lo = p_bar[members[k][0]];
      for (std::size_t i : members[k]) lo = std::min(lo, p_bar[i]);
      out.bin_edges[k] = lo;
    }
  }
  if (mode == BinningMode::kEqualWidth) out.bin_edges[bin_count] = 1.0;

  Rng rng(seed);
  for (std::size_t k = 0; k < bin_count; ++k) {
    const auto picks = rng.SampleWithoutReplacement(members[k].size(), per_bin);
    for (std::size_t j : picks) {
      out.items.push_back(members[k][j]);
      out.sample_bin.push_back(k);
    }
  }
  return out;
}

struct ThresholdCalibration {
  std::size_t bin_count = 20;
  std::vector<double> bin_edges;
  std::vector<double> positive_fraction_per_bin;  // NaN where no samples
  std::vector<std::size_t> samples_per_bin;
  std::size_t chosen_bin = 0;
  double threshold = 0.5;
};

// Chooses the lowest bin whose positive fraction is >= 0.5 and does not
// decrease over the next two (non-empty) bins; the threshold is the mean
// p_bar of that bin's samples.
inline ThresholdCalibration CalibrateThreshold(
    std::span<const double> sample_p_bar, std::span<const int> expert_labels,
    std::span<const std::size_t> sample_bin, std::size_t bin_count,
    std::vector<double> bin_edges = {}) {
  Require(sample_p_bar.size() == expert_labels.size() &&
              sample_p_bar.size() == sample_bin.size(),
          ErrorKind::kContract, "every sampled item needs an expert label and a bin");
  Require(bin_count >= 1, ErrorKind::kContract, "bin_count must be >= 1");
  ThresholdCalibration cal;
  cal.bin_count = bin_count;
  cal.bin_edges = std::move(bin_edges);
  cal.samples_per_bin.assign(bin_count, 0);
  std::vector<double> positives(bin_count, 0.0), p_sum(bin_count, 0.0);
  for (std::size_t s = 0; s < sample_p_bar.size(); ++s) {
    const std::size_t k = sample_bin[s];
    Require(k < bin_count, ErrorKind::kContract, "sample bin out of range");
    Require(expert_labels[s] == 0 || expert_labels[s] == 1, ErrorKind::kData,
            "expert labels must be 0 or 1");
    ++cal.samples_per_bin[k];
    positives[k] += expert_labels[s];
    p_sum[k] += sample_p_bar[s];
  }
  cal.positive_fraction_per_bin.assign(bin_count,
                                       std::numeric_limits<double>::quiet_NaN());
  std::vector<std::size_t> filled;
  for (std::size_t k = 0; k < bin_count; ++k) {
    if (cal.samples_per_bin[k] == 0) continue;
    cal.positive_fraction_per_bin[k] =
        positives[k] / static_cast<double>(cal.samples_per_bin[k]);
    filled.push_back(k);
  }
  const auto& f = cal.positive_fraction_per_bin;
  for (std::size_t q = 0; q < filled.size(); ++q) {
    if (f[filled[q]] < 0.5) continue;
    const std::size_t last = std::min(q + 2, filled.size() - 1);
    bool nondecreasing = true;
    for (std::size_t r = q; r < last; ++r)
      nondecreasing = nondecreasing && f[filled[r + 1]] >= f[filled[r]];
    if (!nondecreasing) continue;
    cal.chosen_bin = filled[q];
    cal.threshold = p_sum[filled[q]] / static_cast<double>(cal.samples_per_bin[filled[q]]);
    return cal;
  }
  throw CalibrationError(f, "no bin satisfies the threshold rule");
}

inline std::vector<int> FinalizeLabels(std::span<const double> p_bar, double threshold) {
  Require(threshold >= 0.0 && threshold <= 1.0, ErrorKind::kContract,
          "threshold must lie in [0, 1]");
  std::vector<int> labels(p_bar.size());
  for (std::size_t i = 0; i < p_bar.size(); ++i) labels[i] = p_bar[i] >= threshold ? 1 : 0;
  return labels;
}

// Expected fraction of wrongly assigned final labels under the posterior.
inline double UncertaintySummary(std::span<const double> p_bar,
                                 std::span<const int> labels) {
  Require(p_bar.size() == labels.size(), ErrorKind::kContract,
          "p_bar and labels differ in length");
  if (p_bar.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < p_bar.size(); ++i)
    s += labels[i] == 1 ? 1.0 - p_bar[i] : p_bar[i];
  return s / static_cast<double>(p_bar.size());
}

}  // namespace dqaudit::aggregation
