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

#include <cstddef>
#include <map>
#include <numeric>
#include <utility>
#include <vector>

#include "dqaudit/core/error.hpp"

namespace dqaudit::fastdup {

// Union-find over dense item indices that remembers every successful merge.
class ComponentForest {
 public:
  ComponentForest() = default;
  explicit ComponentForest(std::size_t n) : parent_(n), rank_(n, 0), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  static ComponentForest Replay(std::size_t n,
                                const std::vector<std::pair<std::size_t, std::size_t>>& log) {
    ComponentForest f(n);
    for (auto [a, b] : log) f.Union(a, b);
    return f;
  }

  std::size_t size() const { return parent_.size(); }

  std::size_t Find(std::size_t x) const {
    Require(x < parent_.size(), ErrorKind::kContract, "item index out of range");
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];  // path halving
      x = parent_[x];
    }
    return x;
  }

  bool Connected(std::size_t a, std::size_t b) const { return Find(a) == Find(b); }

  // Returns false when a and b were already in one component.
  bool Union(std::size_t a, std::size_t b) {
    std::size_t ra = Find(a), rb = Find(b);
    if (ra == rb) return false;
    if (rank_[ra] < rank_[rb]) std::swap(ra, rb);
    parent_[rb] = ra;
    size_[ra] += size_[rb];
    if (rank_[ra] == rank_[rb]) ++rank_[ra];
    merge_log_.emplace_back(a, b);
    return true;
  }

  std::size_t ComponentSize(std::size_t x) const { return size_[Find(x)]; }
  std::size_t component_count() const { return parent_.size() - merge_log_.size(); }
  const std::vector<std::pair<std::size_t, std::size_t>>& merge_log() const {
    return merge_log_;
  }

  // Component label per item, numbered by first appearance.
  std::vector<std::size_t> Labels() const {
    std::map<std::size_t, std::size_t> label_of_root;
    std::vector<std::size_t> out(parent_.size());
    for (std::size_t i = 0; i < parent_.size(); ++i)
      out[i] = label_of_root.emplace(Find(i), label_of_root.size()).first->second;
    return out;
  }

  // Members of each component, components ordered by first member.
  std::vector<std::vector<std::size_t>> Components() const {
    const auto labels = Labels();
    std::size_t count = 0;
    for (std::size_t l : labels) count = std::max(count, l + 1);
    std::vector<std::vector<std::size_t>> out(count);
    for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i]].push_back(i);
    return out;
  }

 private:
  mutable std::vector<std::size_t> parent_;
  std::vector<std::size_t> rank_;
  std::vector<std::size_t> size_;
  std::vector<std::pair<std::size_t, std::size_t>> merge_log_;
};

}  // namespace dqaudit::fastdup
