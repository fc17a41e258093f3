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
#include <string>
#include <vector>

#include "dqaudit/aggregation/glad.hpp"
#include "dqaudit/core/error.hpp"
#include "dqaudit/core/rng.hpp"
#include "dqaudit/core/types.hpp"

namespace dqaudit::simulate {

struct GladWorldConfig {
  std::size_t annotators = 50;
  std::size_t items = 300;
  double ability_mean = 1.0;
  double ability_sd = 0.5;
  double difficulty_magnitude = 2.0;
  double positive_fraction = 0.5;
  // Redraw abilities until positive (a truncated normal).
  bool truncate_positive = false;
  // Fraction of annotators whose ability is negated after drawing.
  double adversarial_fraction = 0.0;
  std::uint64_t seed = 1;
};

struct GladWorld {
  GladWorldConfig config;
  std::vector<double> abilities;
  std::vector<double> difficulties;  // sign is the true class

  std::vector<int> TrueClasses() const {
    std::vector<int> out(difficulties.size());
    for (std::size_t i = 0; i < difficulties.size(); ++i)
      out[i] = difficulties[i] > 0.0 ? 1 : 0;
    return out;
  }
};

inline std::string PaddedId(const char* prefix, std::size_t index,
                            std::size_t count) {
  std::string digits = std::to_string(index);
  const std::size_t width = std::to_string(count > 0 ? count - 1 : 0).size();
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

inline std::string AnnotatorId(std::size_t a, std::size_t count) {
  return PaddedId("ann", a, count);
}
inline std::string ItemId(std::size_t i, std::size_t count) {
  return PaddedId("item", i, count);
}

inline GladWorld SampleGladWorld(const GladWorldConfig& cfg) {
  Require(cfg.annotators >= 1 && cfg.items >= 1, ErrorKind::kContract,
          "world needs at least one annotator and one item");
  Require(cfg.ability_sd >= 0.0 && cfg.difficulty_magnitude >= 0.0,
          ErrorKind::kContract, "ability_sd and difficulty_magnitude must be >= 0");
  Require(cfg.positive_fraction >= 0.0 && cfg.positive_fraction <= 1.0 &&
              cfg.adversarial_fraction >= 0.0 && cfg.adversarial_fraction <= 1.0,
          ErrorKind::kContract, "fractions must lie in [0, 1]");
  Require(!cfg.truncate_positive || cfg.ability_mean > 0.0 || cfg.ability_sd > 0.0,
          ErrorKind::kContract, "truncation to positive abilities is infeasible");
  GladWorld world;
  world.config = cfg;
  Rng ability_rng = Rng(cfg.seed).Split(10);
  Rng class_rng = Rng(cfg.seed).Split(11);
  Rng adversary_rng = Rng(cfg.seed).Split(12);

  world.abilities.resize(cfg.annotators);
  for (auto& c : world.abilities) {
    do {
      c = ability_rng.Normal(cfg.ability_mean, cfg.ability_sd);
    } while (cfg.truncate_positive && c <= 0.0);
  }
  const auto n_adv = static_cast<std::size_t>(
      std::llround(cfg.adversarial_fraction * static_cast<double>(cfg.annotators)));
  for (std::size_t a : adversary_rng.SampleWithoutReplacement(cfg.annotators, n_adv))
    world.abilities[a] = -world.abilities[a];

  world.difficulties.resize(cfg.items);
  for (auto& b : world.difficulties)
    b = class_rng.Bernoulli(cfg.positive_fraction) ? cfg.difficulty_magnitude
                                                   : -cfg.difficulty_magnitude;
  return world;
}

enum class AssignmentMode {
  kUniform,
  // Annotator activity follows a power law with exponent 1.5.
  kHeavyTail,
};

inline VoteTable GenerateVotes(const GladWorld& world, std::size_t votes_per_item,
                               std::uint64_t seed,
                               AssignmentMode mode = AssignmentMode::kUniform) {
  const std::size_t A = world.abilities.size();
  const std::size_t I = world.difficulties.size();
  Require(votes_per_item <= A, ErrorKind::kContract,
          "votes_per_item exceeds the number of annotators");
  Rng assign_rng = Rng(seed).Split(20);
  Rng vote_rng = Rng(seed).Split(21);

  std::vector<double> weight;
  if (mode == AssignmentMode::kHeavyTail) {
    std::vector<std::size_t> rank(A);
    for (std::size_t a = 0; a < A; ++a) rank[a] = a;
    assign_rng.Shuffle(rank);
    weight.resize(A);
    for (std::size_t a = 0; a < A; ++a)
      weight[a] = std::pow(static_cast<double>(rank[a] + 1), -1.5);
  }

  std::vector<VoteRecord> records;
  records.reserve(I * votes_per_item);
  for (std::size_t i = 0; i < I; ++i) {
    std::vector<std::size_t> chosen;
    if (mode == AssignmentMode::kUniform) {
      chosen = assign_rng.SampleWithoutReplacement(A, votes_per_item);
    } else {
      std::vector<double> w = weight;
      for (std::size_t k = 0; k < votes_per_item; ++k) {
        double total = 0.0;
        for (double x : w) total += x;
        double u = assign_rng.Uniform() * total;
        std::size_t pick = 0;
        while (pick + 1 < A && (u -= w[pick]) >= 0.0) ++pick;
        while (w[pick] == 0.0) pick = (pick + 1) % A;
        chosen.push_back(pick);
        w[pick] = 0.0;
      }
    }
    for (std::size_t a : chosen) {
      const double p = aggregation::Sigmoid(world.abilities[a] * world.difficulties[i]);
      records.push_back({AnnotatorId(a, A), ItemId(i, I), vote_rng.Bernoulli(p) ? 1 : 0});
    }
  }
  return VoteTable::Build(records, DedupPolicy::kError);
}

}  // namespace dqaudit::simulate
