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

// Planted near-duplicate worlds: groups of points inside small balls whose
// centers are kept far apart, so that every duplicate of a point is closer
// to it than any non-duplicate.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dqaudit/core/error.hpp"
#include "dqaudit/core/rng.hpp"
#include "dqaudit/core/types.hpp"
#include "dqaudit/simulate/glad_world.hpp"

namespace dqaudit::simulate {

// component size -> number of components (sizes >= 2; the rest are singletons)
using SizeDistribution = std::map<std::size_t, std::size_t>;

// Component-size counts observed for the released near-duplicate annotations.
inline const SizeDistribution& ReleasedComponentCounts() {
  static const SizeDistribution counts = {
      {2, 1997}, {3, 169}, {4, 151}, {5, 19}, {6, 26}, {7, 8},
      {8, 9},    {10, 4},  {11, 2},  {12, 2}, {25, 1}, {30, 1}};
  return counts;
}

// Draws component sizes with probabilities proportional to ReleasedComponentCounts()
// until roughly `duplicate_fraction` of `n_items` sit in components of size
// >= 2. Sizes above `max_size` or that would overflow the item budget are
// skipped.
inline SizeDistribution ReleasedSizePreset(std::size_t n_items, Rng& rng,
                                     double duplicate_fraction = 0.34,
                                     std::size_t max_size = 30) {
  std::vector<std::pair<std::size_t, double>> table;
  double total = 0.0;
  for (auto [size, count] : ReleasedComponentCounts()) {
    if (size > max_size) continue;
    table.emplace_back(size, static_cast<double>(count));
    total += static_cast<double>(count);
  }
  SizeDistribution out;
  const auto target = static_cast<std::size_t>(duplicate_fraction * static_cast<double>(n_items));
  std::size_t used = 0;
  for (int attempts = 0; used < target && attempts < 10000; ++attempts) {
    double u = rng.Uniform() * total;
    std::size_t size = table.back().first;
    for (auto [s, w] : table) {
      if ((u -= w) < 0.0) {
        size = s;
        break;
      }
    }
    if (used + size > n_items) continue;
    ++out[size];
    used += size;
  }
  return out;
}

struct CliqueWorld {
  EmbeddingMatrix embeddings;
  std::vector<std::size_t> component;  // per row, canonical (first-appearance) ids
  double radius = 1.0;
  double margin = 3.0;
  std::uint64_t seed = 0;

  std::size_t LargestComponent() const {
    std::map<std::size_t, std::size_t> sizes;
    std::size_t k = 0;
    for (std::size_t c : component) k = std::max(k, ++sizes[c]);
    return k;
  }
};

struct SeparationCheck {
  bool holds = true;
  // i has duplicate j and non-duplicate k with d(i, j) >= d(i, k).
  std::optional<std::array<std::size_t, 3>> violation;
};

// Brute-force check that for every point with a duplicate, its farthest
// duplicate is strictly closer than its nearest non-duplicate.
inline SeparationCheck VerifySeparation(const EmbeddingMatrix& embeddings,
                                          const std::vector<std::size_t>& component) {
  Require(component.size() == embeddings.rows(), ErrorKind::kContract,
          "partition size does not match the embeddings");
  const std::size_t n = embeddings.rows();
  SeparationCheck check;
  for (std::size_t i = 0; i < n; ++i) {
    double far_dup = -1.0, near_other = INFINITY;
    std::size_t j_star = i, k_star = i;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = embeddings.SquaredDistance(i, j);
      if (component[j] == component[i]) {
        if (d > far_dup) far_dup = d, j_star = j;
      } else if (d < near_other) {
        near_other = d, k_star = j;
      }
    }
    if (far_dup >= 0.0 && k_star != i && far_dup >= near_other) {
      check.holds = false;
      check.violation = std::array<std::size_t, 3>{i, j_star, k_star};
      return check;
    }
  }
  return check;
}

// Relabels component ids in order of first appearance.
inline std::vector<std::size_t> CanonicalPartition(const std::vector<std::size_t>& raw) {
  std::map<std::size_t, std::size_t> remap;
  std::vector<std::size_t> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    out[i] = remap.emplace(raw[i], remap.size()).first->second;
  return out;
}

inline CliqueWorld PlantCliques(std::size_t n_items, const SizeDistribution& sizes,
                                std::size_t dim, double margin, std::uint64_t seed,
                                double radius = 1.0) {
  Require(dim >= 1 && n_items >= 1, ErrorKind::kContract,
          "need at least one item and one dimension");
  Require(margin > 0.0 && radius > 0.0, ErrorKind::kContract,
          "margin and radius must be positive");
  std::vector<std::size_t> group_sizes;
  std::size_t in_groups = 0;
  for (auto [size, count] : sizes) {
    Require(size >= 2, ErrorKind::kContract, "component sizes must be >= 2");
    for (std::size_t c = 0; c < count; ++c) group_sizes.push_back(size);
    in_groups += size * count;
  }
  Require(in_groups <= n_items, ErrorKind::kPlacement,
          "size distribution needs " + std::to_string(in_groups) +
              " items but only " + std::to_string(n_items) + " requested");
  for (std::size_t s = in_groups; s < n_items; ++s) group_sizes.push_back(1);

  const std::size_t groups = group_sizes.size();
  const double separation = (2.0 + margin) * radius;
  // Cube side so that random centers are rarely closer than `separation`.
  const double side =
      2.0 * separation *
      std::max(2.0, std::pow(static_cast<double>(groups), 1.0 / static_cast<double>(dim)));

  Rng rng(seed);
  for (int attempt = 0; attempt < 8; ++attempt) {
    std::vector<std::vector<double>> centers;
    centers.reserve(groups);
    bool placed = true;
    for (std::size_t g = 0; g < groups && placed; ++g) {
      bool ok = false;
      for (int tries = 0; tries < 2000 && !ok; ++tries) {
        std::vector<double> c(dim);
        for (auto& x : c) x = rng.Uniform(0.0, side);
        ok = true;
        for (const auto& other : centers) {
          double d2 = 0.0;
          for (std::size_t k = 0; k < dim; ++k) d2 += (c[k] - other[k]) * (c[k] - other[k]);
          if (d2 < separation * separation) {
            ok = false;
            break;
          }
        }
        if (ok) centers.push_back(std::move(c));
      }
      placed = ok;
    }
    if (!placed) continue;

    // Shuffle which rows belong to which group.
    std::vector<std::size_t> row_group;
    for (std::size_t g = 0; g < groups; ++g)
      row_group.insert(row_group.end(), group_sizes[g], g);
    rng.Shuffle(row_group);

    std::vector<double> values(n_items * dim);
    for (std::size_t r = 0; r < n_items; ++r) {
      const auto& c = centers[row_group[r]];
      // uniform point in the ball of `radius` around the center
      std::vector<double> dir(dim);
      double norm = 0.0;
      for (auto& x : dir) {
        x = rng.Normal();
        norm += x * x;
      }
      norm = std::sqrt(norm);
      const double rho =
          group_sizes[row_group[r]] == 1
              ? 0.0
              : radius * std::pow(rng.UniformOpen(), 1.0 / static_cast<double>(dim));
      for (std::size_t k = 0; k < dim; ++k)
        values[r * dim + k] = c[k] + (norm > 0.0 ? rho * dir[k] / norm : 0.0);
    }
    std::vector<std::string> ids(n_items);
    for (std::size_t r = 0; r < n_items; ++r) ids[r] = ItemId(r, n_items);

    CliqueWorld world{EmbeddingMatrix(std::move(ids), dim, std::move(values)),
                      CanonicalPartition(row_group), radius, margin, seed};
    if (VerifySeparation(world.embeddings, world.component).holds) return world;
  }
  throw Error(ErrorKind::kPlacement,
              "could not place " + std::to_string(groups) + " components in " +
                  std::to_string(dim) +
                  " dimensions; use a larger dim, a larger margin or smaller sizes");
}

}  // namespace dqaudit::simulate
