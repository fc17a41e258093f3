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

// Inter-rater agreement on binary labels and percentile bootstrap intervals.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dqaudit/core/error.hpp"
#include "dqaudit/core/rng.hpp"

namespace dqaudit::eval {

inline double CohenKappa(const std::vector<int>& a, const std::vector<int>& b) {
  Require(a.size() == b.size() && a.size() >= 2, ErrorKind::kContract,
          "kappa needs two labelings of equal length >= 2");
  const double n = static_cast<double>(a.size());
  double agree = 0.0, a1 = 0.0, b1 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    Require((a[i] == 0 || a[i] == 1) && (b[i] == 0 || b[i] == 1), ErrorKind::kData,
            "kappa expects binary labels");
    agree += a[i] == b[i] ? 1.0 : 0.0;
    a1 += a[i];
    b1 += b[i];
  }
  const double po = agree / n;
  const double pe = (a1 / n) * (b1 / n) + (1.0 - a1 / n) * (1.0 - b1 / n);
  if (pe >= 1.0) throw Error(ErrorKind::kUndefinedMetric, "kappa undefined: chance agreement is 1");
  return (po - pe) / (1.0 - pe);
}

// Nominal binary ratings grouped by unit (item); units with fewer than two
// ratings are not pairable and drop out.
using RatingUnits = std::vector<std::vector<int>>;

struct CoincidenceMatrix {
  double o[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
  double n() const { return o[0][0] + o[0][1] + o[1][0] + o[1][1]; }
  double marginal(int c) const { return o[c][0] + o[c][1]; }
};

inline CoincidenceMatrix Coincidences(const RatingUnits& units) {
  CoincidenceMatrix m;
  for (const auto& u : units) {
    if (u.size() < 2) continue;
    double count[2] = {0.0, 0.0};
    for (int v : u) {
      Require(v == 0 || v == 1, ErrorKind::kData, "alpha expects binary ratings");
      count[v] += 1.0;
    }
    const double w = 1.0 / static_cast<double>(u.size() - 1);
    for (int c = 0; c < 2; ++c)
      for (int k = 0; k < 2; ++k)
        m.o[c][k] += w * count[c] * (count[k] - (c == k ? 1.0 : 0.0));
  }
  return m;
}

inline double KrippendorffAlpha(const RatingUnits& units) {
  const auto m = Coincidences(units);
  const double n = m.n();
  if (n < 2.0) throw Error(ErrorKind::kUndefinedMetric, "alpha needs pairable ratings");
  const double observed = m.o[0][1] + m.o[1][0];
  const double expected = 2.0 * m.marginal(0) * m.marginal(1) / (n - 1.0);
  if (expected == 0.0)
    throw Error(ErrorKind::kUndefinedMetric, "alpha undefined: every rating has the same value");
  return 1.0 - (n - 1.0) * observed / (2.0 * m.marginal(0) * m.marginal(1));
}

struct RaterRecord {
  std::string rater;
  std::string item;
  int label = 0;
};

// Units ordered by item id; each unit's ratings ordered by rater id.
inline RatingUnits GroupByItem(const std::vector<RaterRecord>& records) {
  std::map<std::string, std::map<std::string, int>> by_item;
  for (const auto& r : records) {
    Require(by_item[r.item].emplace(r.rater, r.label).second, ErrorKind::kConflict,
            "rater '" + r.rater + "' rated item '" + r.item + "' twice");
  }
  RatingUnits units;
  for (const auto& [item, ratings] : by_item) {
    std::vector<int> u;
    for (const auto& [rater, label] : ratings) u.push_back(label);
    units.push_back(std::move(u));
  }
  return units;
}

// Two raters' labels on the items both rated, ordered by item id.
inline std::pair<std::vector<int>, std::vector<int>> PairedLabels(
    const std::vector<RaterRecord>& records, const std::string& a, const std::string& b) {
  std::map<std::string, std::pair<int, int>> both;
  std::map<std::string, int> la, lb;
  for (const auto& r : records) {
    if (r.rater == a) la[r.item] = r.label;
    if (r.rater == b) lb[r.item] = r.label;
  }
  std::vector<int> xa, xb;
  for (const auto& [item, v] : la) {
    auto it = lb.find(item);
    if (it == lb.end()) continue;
    xa.push_back(v);
    xb.push_back(it->second);
  }
  return {xa, xb};
}

struct Interval {
  double low = 0.0;
  double high = 0.0;
  std::size_t resamples_used = 0;
};

// Percentile bootstrap over item indices. Resample r draws from its own
// stream Rng(seed).Split(r). Resamples where the statistic is undefined are
// skipped. The interval is widened to contain `point` when given, since a
// percentile interval for a skewed statistic can miss it.
inline Interval BootstrapCi(std::size_t n_items,
                            const std::function<double(std::span<const std::size_t>)>& statistic,
                            std::size_t n_boot = 2000, double level = 0.95,
                            std::uint64_t seed = 0, std::optional<double> point = std::nullopt) {
  Require(n_items >= 1 && n_boot >= 1, ErrorKind::kContract,
          "bootstrap needs items and at least one resample");
  Require(level > 0.0 && level < 1.0, ErrorKind::kContract, "level must lie in (0, 1)");
  const Rng root(seed);
  std::vector<double> stats;
  stats.reserve(n_boot);
  std::vector<std::size_t> idx(n_items);
  for (std::size_t r = 0; r < n_boot; ++r) {
    Rng rng = root.Split(r);
    for (auto& i : idx) i = static_cast<std::size_t>(rng.Index(n_items));
    try {
      stats.push_back(statistic(idx));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kUndefinedMetric) throw;
    }
  }
  if (stats.empty())
    throw Error(ErrorKind::kUndefinedMetric, "statistic undefined on every resample");
  std::sort(stats.begin(), stats.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(stats.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, stats.size() - 1);
    return stats[lo] + (pos - static_cast<double>(lo)) * (stats[hi] - stats[lo]);
  };
  Interval out{quantile((1.0 - level) / 2.0), quantile((1.0 + level) / 2.0), stats.size()};
  if (point) {
    out.low = std::min(out.low, *point);
    out.high = std::max(out.high, *point);
  }
  return out;
}

}  // namespace dqaudit::eval
