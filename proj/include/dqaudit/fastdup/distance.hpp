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
#include <string>
#include <utility>
#include <vector>

#include "dqaudit/core/types.hpp"

namespace dqaudit::fastdup {

// Symmetric, non-negative dissimilarity over a fixed set of items addressed by
// dense index. Ties are broken by item id, so every argmin is unique.
class DistanceSource {
 public:
  virtual ~DistanceSource() = default;
  virtual std::size_t size() const = 0;
  virtual const std::string& id(std::size_t i) const = 0;
  virtual double distance(std::size_t i, std::size_t j) const = 0;
};

// Euclidean distance between rows of an embedding matrix. The matrix must
// outlive this object.
class EuclideanDistance final : public DistanceSource {
 public:
  explicit EuclideanDistance(const EmbeddingMatrix& embeddings)
      : embeddings_(&embeddings) {}

  std::size_t size() const override { return embeddings_->rows(); }
  const std::string& id(std::size_t i) const override {
    return embeddings_->ids()[i];
  }
  double distance(std::size_t i, std::size_t j) const override {
    return i == j ? 0.0 : embeddings_->Distance(i, j);
  }

  const EmbeddingMatrix& embeddings() const { return *embeddings_; }

 private:
  const EmbeddingMatrix* embeddings_;
};

// Precomputed distances, handy for small hand-built examples.
class MatrixDistance final : public DistanceSource {
 public:
  MatrixDistance(std::vector<std::string> ids, std::vector<double> row_major)
      : ids_(std::move(ids)), d_(std::move(row_major)) {
    Require(d_.size() == ids_.size() * ids_.size(), ErrorKind::kContract,
            "distance matrix must be n x n");
  }

  std::size_t size() const override { return ids_.size(); }
  const std::string& id(std::size_t i) const override { return ids_[i]; }
  double distance(std::size_t i, std::size_t j) const override {
    return d_[i * ids_.size() + j];
  }

 private:
  std::vector<std::string> ids_;
  std::vector<double> d_;
};

}  // namespace dqaudit::fastdup
