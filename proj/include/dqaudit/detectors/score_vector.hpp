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
#include <string>
#include <utility>
#include <vector>

#include "dqaudit/core/error.hpp"

namespace dqaudit::detectors {

// One score per key; larger means more suspicious (or more similar, for pairs).
struct ScoreVector {
  ScoreVector() = default;
  ScoreVector(std::vector<std::string> k, std::vector<double> s)
      : keys(std::move(k)), scores(std::move(s)) {}

  std::vector<std::string> keys;
  std::vector<double> scores;
  // Set when the input gave the detector nothing to separate (e.g. constant data).
  bool degenerate = false;
  // Keys scored with a fallback rule, e.g. members of singleton classes.
  std::vector<std::string> flagged;

  std::size_t size() const { return keys.size(); }

  void Validate() const {
    Require(keys.size() == scores.size(), ErrorKind::kContract,
            "score vector has mismatched keys and scores");
    for (std::size_t i = 0; i < scores.size(); ++i)
      Require(std::isfinite(scores[i]), ErrorKind::kNumeric,
              "non-finite score for '" + keys[i] + "'");
  }
};

}  // namespace dqaudit::detectors
