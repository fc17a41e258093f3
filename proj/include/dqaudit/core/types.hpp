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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dqaudit/core/error.hpp"

namespace dqaudit {

struct VoteRecord {
  std::string annotator_id;
  std::string item_id;
  int vote = 0;
};

enum class DedupPolicy { kKeepLast, kKeepFirst, kError };

// A vote in dense-index form, as consumed by the inference code.
struct DenseVote {
  std::uint32_t annotator;
  std::uint32_t item;
  std::uint8_t value;
};

// Sparse binary annotation table. Dense indices follow first appearance.
class VoteTable {
 public:
  VoteTable() = default;

  // `lines` optionally gives the source line of each record for error text.
  static VoteTable Build(const std::vector<VoteRecord>& records,
                         DedupPolicy policy = DedupPolicy::kKeepLast,
                         const std::vector<std::size_t>* lines = nullptr) {
    VoteTable table;
    std::unordered_map<std::uint64_t, std::size_t> slot_of_pair;
    for (std::size_t r = 0; r < records.size(); ++r) {
      const VoteRecord& rec = records[r];
      const std::string where =
          lines ? " (line " + std::to_string((*lines)[r]) + ")" : "";
      Require(!rec.annotator_id.empty() && !rec.item_id.empty(),
              ErrorKind::kData, "empty annotator or item id" + where);
      Require(rec.vote == 0 || rec.vote == 1, ErrorKind::kData,
              "vote must be 0 or 1" + where);
      const auto a = table.InternAnnotator(rec.annotator_id);
      const auto i = table.InternItem(rec.item_id);
      const std::uint64_t key = (static_cast<std::uint64_t>(a) << 32) | i;
      auto [it, inserted] = slot_of_pair.emplace(key, table.records_.size());
      if (inserted) {
        table.records_.push_back(rec);
        table.dense_.push_back({a, i, static_cast<std::uint8_t>(rec.vote)});
        continue;
      }
      switch (policy) {
        case DedupPolicy::kKeepFirst:
          break;
        case DedupPolicy::kKeepLast:
          table.records_[it->second].vote = rec.vote;
          table.dense_[it->second].value = static_cast<std::uint8_t>(rec.vote);
          break;
        case DedupPolicy::kError:
          throw Error(ErrorKind::kConflict,
                      "duplicate vote by '" + rec.annotator_id + "' on '" +
                          rec.item_id + "'" + where);
      }
    }
    return table;
  }

  const std::vector<VoteRecord>& records() const { return records_; }
  const std::vector<DenseVote>& dense() const { return dense_; }
  const std::vector<std::string>& annotator_ids() const { return annotators_; }
  const std::vector<std::string>& item_ids() const { return items_; }

  std::size_t num_votes() const { return records_.size(); }
  std::size_t num_annotators() const { return annotators_.size(); }
  std::size_t num_items() const { return items_.size(); }
  bool empty() const { return records_.empty(); }

  std::optional<std::size_t> ItemIndex(const std::string& id) const {
    auto it = item_index_.find(id);
    if (it == item_index_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<std::size_t> AnnotatorIndex(const std::string& id) const {
    auto it = annotator_index_.find(id);
    if (it == annotator_index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::uint32_t InternAnnotator(const std::string& id) {
    auto [it, inserted] = annotator_index_.emplace(id, annotators_.size());
    if (inserted) annotators_.push_back(id);
    return static_cast<std::uint32_t>(it->second);
  }
  std::uint32_t InternItem(const std::string& id) {
    auto [it, inserted] = item_index_.emplace(id, items_.size());
    if (inserted) items_.push_back(id);
    return static_cast<std::uint32_t>(it->second);
  }

  std::vector<VoteRecord> records_;
  std::vector<DenseVote> dense_;
  std::vector<std::string> annotators_;
  std::vector<std::string> items_;
  std::unordered_map<std::string, std::size_t> annotator_index_;
  std::unordered_map<std::string, std::size_t> item_index_;
};

// I x d row-major feature matrix. Values are held as doubles but rounded to
// float precision on construction, so that what is in memory is exactly what
// the 32-bit file formats can store.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;

  EmbeddingMatrix(std::vector<std::string> ids, std::size_t dim,
                  std::vector<double> values)
      : ids_(std::move(ids)), dim_(dim), values_(std::move(values)) {
    Require(dim_ > 0, ErrorKind::kData, "embedding dimension must be positive");
    Require(values_.size() == ids_.size() * dim_, ErrorKind::kFormat,
            "embedding payload has " + std::to_string(values_.size()) +
                " values, expected " + std::to_string(ids_.size() * dim_));
    for (std::size_t k = 0; k < values_.size(); ++k) {
      Require(std::isfinite(values_[k]), ErrorKind::kData,
              "non-finite embedding value in row " +
                  std::to_string(k / dim_));
      const float f = static_cast<float>(values_[k]);
      Require(std::isfinite(f), ErrorKind::kData,
              "embedding value overflows 32-bit float in row " +
                  std::to_string(k / dim_));
      values_[k] = f;
    }
    for (std::size_t r = 0; r < ids_.size(); ++r) {
      Require(!ids_[r].empty(), ErrorKind::kData, "empty item id");
      Require(index_.emplace(ids_[r], r).second, ErrorKind::kData,
              "duplicate item id '" + ids_[r] + "'");
    }
  }

  std::size_t rows() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<double>& values() const { return values_; }

  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * dim_, dim_};
  }

  std::optional<std::size_t> IndexOf(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  double SquaredDistance(std::size_t a, std::size_t b) const {
    const double* x = values_.data() + a * dim_;
    const double* y = values_.data() + b * dim_;
    double s = 0.0;
    for (std::size_t k = 0; k < dim_; ++k) {
      const double d = x[k] - y[k];
      s += d * d;
    }
    return s;
  }

  double Distance(std::size_t a, std::size_t b) const {
    return std::sqrt(SquaredDistance(a, b));
  }

 private:
  std::vector<std::string> ids_;
  std::size_t dim_ = 0;
  std::vector<double> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(std::size_t w, std::size_t h, std::vector<std::uint8_t> px)
      : width(w), height(h), pixels(std::move(px)) {
    Require(w > 0 && h > 0, ErrorKind::kData, "image dimensions must be positive");
    Require(pixels.size() == w * h, ErrorKind::kFormat,
            "pixel count does not match width*height");
  }
  GrayImage(std::size_t w, std::size_t h, std::uint8_t fill)
      : GrayImage(w, h, std::vector<std::uint8_t>(w * h, fill)) {}

  std::uint8_t at(std::size_t x, std::size_t y) const {
    return pixels[y * width + x];
  }
  std::uint8_t& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
};

inline std::string PairKey(const std::string& a, const std::string& b) {
  return a < b ? a + "|" + b : b + "|" + a;
}

// Unordered item pair, stored with the lexicographically smaller id first.
struct PairRecord {
  std::string item_a;
  std::string item_b;
  std::optional<int> label;

  PairRecord() = default;
  PairRecord(std::string a, std::string b, std::optional<int> l = std::nullopt)
      : label(l) {
    Require(a != b, ErrorKind::kData, "pair endpoints must differ: '" + a + "'");
    if (b < a) std::swap(a, b);
    item_a = std::move(a);
    item_b = std::move(b);
  }

  std::string key() const { return item_a + "|" + item_b; }

  friend bool operator==(const PairRecord& x, const PairRecord& y) {
    return x.item_a == y.item_a && x.item_b == y.item_b;
  }
};

struct RankedEntry {
  std::string key;
  double score = 0.0;
  int label = 0;
};

class LabeledRanking {
 public:
  LabeledRanking() = default;
  explicit LabeledRanking(std::vector<RankedEntry> entries)
      : entries_(std::move(entries)) {
    Require(!entries_.empty(), ErrorKind::kContract, "ranking has no entries");
    for (const auto& e : entries_) {
      Require(std::isfinite(e.score), ErrorKind::kData,
              "non-finite score for '" + e.key + "'");
      Require(e.label == 0 || e.label == 1, ErrorKind::kData,
              "label must be 0 or 1 for '" + e.key + "'");
    }
  }

  // Convenience for tests and simulations; keys are zero-padded positions.
  static LabeledRanking FromScores(std::span<const double> scores,
                                   std::span<const int> labels) {
    Require(scores.size() == labels.size(), ErrorKind::kContract,
            "scores and labels differ in length");
    std::vector<RankedEntry> entries;
    entries.reserve(scores.size());
    const std::size_t width = std::to_string(scores.size()).size();
    for (std::size_t i = 0; i < scores.size(); ++i) {
      std::string key = std::to_string(i);
      key.insert(0, width - key.size(), '0');
      entries.push_back({std::move(key), scores[i], labels[i]});
    }
    return LabeledRanking(std::move(entries));
  }

  const std::vector<RankedEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::size_t positives() const {
    std::size_t p = 0;
    for (const auto& e : entries_) p += static_cast<std::size_t>(e.label);
    return p;
  }

 private:
  std::vector<RankedEntry> entries_;
};

}  // namespace dqaudit
