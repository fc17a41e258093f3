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

// Budget-bounded near-duplicate discovery.
//
// Round 0 asks about every item's nearest neighbour. Each later round looks
// only at the clusters that grew in the round before, and for each of them
// asks about the closest cross pair to any other cluster (single linkage).
// The campaign stops after a round without positive verdicts. When the
// distance ranks every true duplicate of an item ahead of all its
// non-duplicates, this recovers the duplicate components exactly with at
// most N annotations in at most floor(log2 K) + 1 rounds with positives,
// K being the largest component.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dqaudit/core/error.hpp"
#include "dqaudit/core/types.hpp"
#include "dqaudit/fastdup/distance.hpp"
#include "dqaudit/fastdup/forest.hpp"

namespace dqaudit::fastdup {

struct RoundPlan {
  std::size_t round_index = 0;
  std::vector<PairRecord> pairs;  // canonical order, unlabeled, sorted by key
};

struct BudgetLedger {
  std::size_t annotations_used = 0;
  std::size_t rounds_with_positives = 0;
  std::size_t rounds_total = 0;
  std::vector<std::size_t> per_round_counts;
  std::vector<std::size_t> per_round_positives;

  nlohmann::json ToJson() const {
    return {{"annotations_used", annotations_used},
            {"rounds_with_positives", rounds_with_positives},
            {"rounds_total", rounds_total},
            {"per_round_counts", per_round_counts},
            {"per_round_positives", per_round_positives}};
  }
  static BudgetLedger FromJson(const nlohmann::json& j) {
    BudgetLedger l;
    l.annotations_used = j.at("annotations_used").get<std::size_t>();
    l.rounds_with_positives = j.at("rounds_with_positives").get<std::size_t>();
    l.rounds_total = j.at("rounds_total").get<std::size_t>();
    l.per_round_counts = j.at("per_round_counts").get<std::vector<std::size_t>>();
    l.per_round_positives = j.at("per_round_positives").get<std::vector<std::size_t>>();
    return l;
  }
};

namespace internal {

// Pair of dense indices ordered so that id(first) < id(second).
struct DensePair {
  std::size_t first;
  std::size_t second;
};

inline DensePair Canonical(const DistanceSource& d, std::size_t i, std::size_t j) {
  return d.id(i) < d.id(j) ? DensePair{i, j} : DensePair{j, i};
}

inline std::uint64_t PairCode(std::size_t i, std::size_t j) {
  if (i > j) std::swap(i, j);
  return (static_cast<std::uint64_t>(i) << 32) | static_cast<std::uint64_t>(j);
}

// (distance, id) lexicographic comparison used for every argmin.
inline bool CloserItem(double d1, const std::string& id1, double d2,
                       const std::string& id2) {
  return d1 < d2 || (d1 == d2 && id1 < id2);
}

inline bool CloserPair(const DistanceSource& d, double d1, DensePair p1, double d2,
                       DensePair p2) {
  if (d1 != d2) return d1 < d2;
  const auto& a1 = d.id(p1.first);
  const auto& a2 = d.id(p2.first);
  if (a1 != a2) return a1 < a2;
  return d.id(p1.second) < d.id(p2.second);
}

struct NeighborResult {
  std::size_t index;
  bool tied;  // another item sits at exactly the same distance
};

inline NeighborResult NearestNeighbor(const DistanceSource& d, std::size_t i) {
  const std::size_t n = d.size();
  std::size_t best = n;
  double best_d = std::numeric_limits<double>::infinity();
  bool tied = false;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) continue;
    const double dij = d.distance(i, j);
    if (best == n || CloserItem(dij, d.id(j), best_d, d.id(best))) {
      tied = best != n && dij == best_d;
      best = j;
      best_d = dij;
    } else if (dij == best_d) {
      tied = true;
    }
  }
  return {best, tied};
}

inline std::vector<DensePair> NearestNeighborEdges(const DistanceSource& d,
                                                   bool* any_tie = nullptr) {
  Require(d.size() >= 2, ErrorKind::kContract,
          "nearest-neighbour pairs need at least 2 items");
  std::unordered_set<std::uint64_t> seen;
  std::vector<DensePair> edges;
  if (any_tie) *any_tie = false;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto nn = NearestNeighbor(d, i);
    if (any_tie && nn.tied) *any_tie = true;
    if (seen.insert(PairCode(i, nn.index)).second) edges.push_back(Canonical(d, i, nn.index));
  }
  return edges;
}

inline RoundPlan ToPlan(const DistanceSource& d, std::size_t round,
                        const std::vector<DensePair>& edges) {
  RoundPlan plan;
  plan.round_index = round;
  plan.pairs.reserve(edges.size());
  for (const auto& e : edges) plan.pairs.emplace_back(d.id(e.first), d.id(e.second));
  std::sort(plan.pairs.begin(), plan.pairs.end(), [](const auto& x, const auto& y) {
    return std::tie(x.item_a, x.item_b) < std::tie(y.item_a, y.item_b);
  });
  return plan;
}

}  // namespace internal

// Maps item ids back to dense indices of a distance source.
class ItemIndex {
 public:
  explicit ItemIndex(const DistanceSource& d) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      Require(index_.emplace(d.id(i), i).second, ErrorKind::kData,
              "duplicate item id '" + d.id(i) + "'");
    }
  }
  std::size_t at(const std::string& id) const {
    auto it = index_.find(id);
    Require(it != index_.end(), ErrorKind::kContract, "unknown item id '" + id + "'");
    return it->second;
  }
  bool contains(const std::string& id) const { return index_.count(id) > 0; }

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

// Round 0: the distinct pairs {i, nn(i)}.
inline RoundPlan NearestNeighborPairs(const DistanceSource& distance) {
  return internal::ToPlan(distance, 0, internal::NearestNeighborEdges(distance));
}

struct NnIdentity {
  std::size_t component_count = 0;
  std::size_t pair_count = 0;
  bool holds = false;
};

// Components of the nearest-neighbour graph versus N - |distinct NN pairs|.
inline NnIdentity NnComponentIdentity(const DistanceSource& distance) {
  bool tie = false;
  const auto edges = internal::NearestNeighborEdges(distance, &tie);
  if (tie) throw Error(ErrorKind::kTie, "nearest-neighbour distances contain ties");
  ComponentForest forest(distance.size());
  for (const auto& e : edges) forest.Union(e.first, e.second);
  NnIdentity out;
  out.component_count = forest.component_count();
  out.pair_count = edges.size();
  out.holds = out.component_count == distance.size() - edges.size();
  return out;
}

using NegativeSet = std::unordered_set<std::uint64_t>;

// For every cluster containing an item from `grown_items`, the closest cross
// pair to any other cluster. Clusters whose closest pair is already known to
// be negative contribute nothing. Returns nullopt when no pair is left.
inline std::optional<RoundPlan> PlanNextRound(const ComponentForest& forest,
                                              const DistanceSource& distance,
                                              const std::vector<std::size_t>& grown_items,
                                              const NegativeSet& negatives,
                                              std::size_t round_index) {
  if (grown_items.empty()) return std::nullopt;
  const std::size_t n = distance.size();
  std::vector<std::size_t> root(n);
  for (std::size_t i = 0; i < n; ++i) root[i] = forest.Find(i);
  std::map<std::size_t, std::vector<std::size_t>> members;
  std::set<std::size_t> grown_roots;
  for (std::size_t i : grown_items) grown_roots.insert(root[i]);
  for (std::size_t i = 0; i < n; ++i)
    if (grown_roots.count(root[i])) members[root[i]].push_back(i);

  std::unordered_set<std::uint64_t> emitted;
  std::vector<internal::DensePair> edges;
  for (const auto& [r, inside] : members) {
    bool found = false;
    double best_d = 0.0;
    internal::DensePair best{0, 0};
    for (std::size_t x : inside) {
      for (std::size_t y = 0; y < n; ++y) {
        if (root[y] == r) continue;
        const double d = distance.distance(x, y);
        const auto cand = internal::Canonical(distance, x, y);
        if (!found || internal::CloserPair(distance, d, cand, best_d, best)) {
          found = true;
          best_d = d;
          best = cand;
        }
      }
    }
    if (!found) continue;  // a single cluster holds every item
    const auto code = internal::PairCode(best.first, best.second);
    if (negatives.count(code)) continue;
    if (emitted.insert(code).second) edges.push_back(best);
  }
  if (edges.empty()) return std::nullopt;
  return internal::ToPlan(distance, round_index, edges);
}

// Union for every positive verdict; negatives are remembered. Returns the
// dense indices touched by positive verdicts.
inline std::vector<std::size_t> ApplyVerdicts(ComponentForest& forest, const ItemIndex& index,
                                              const std::vector<PairRecord>& verdicts,
                                              NegativeSet& negatives) {
  std::vector<std::size_t> touched;
  for (const auto& v : verdicts) {
    Require(v.label.has_value(), ErrorKind::kContract,
            "verdict for '" + v.key() + "' has no label");
    const std::size_t a = index.at(v.item_a);
    const std::size_t b = index.at(v.item_b);
    if (*v.label == 1) {
      forest.Union(a, b);
      touched.push_back(a);
      touched.push_back(b);
    } else {
      negatives.insert(internal::PairCode(a, b));
    }
  }
  return touched;
}

// Answers a batch of pairs, 1 meaning near duplicate.
class AnnotationOracle {
 public:
  virtual ~AnnotationOracle() = default;
  virtual std::vector<int> Answer(const std::vector<PairRecord>& batch) = 0;
};

// Truthful oracle backed by a known partition (item id -> component id).
class PartitionOracle final : public AnnotationOracle {
 public:
  explicit PartitionOracle(std::unordered_map<std::string, std::size_t> component)
      : component_(std::move(component)) {}

  std::vector<int> Answer(const std::vector<PairRecord>& batch) override {
    std::vector<int> out;
    out.reserve(batch.size());
    for (const auto& p : batch) {
      auto a = component_.find(p.item_a);
      auto b = component_.find(p.item_b);
      Require(a != component_.end() && b != component_.end(), ErrorKind::kData,
              "oracle has no ground truth for pair '" + p.key() + "'");
      out.push_back(a->second == b->second ? 1 : 0);
      ++asked_;
    }
    return out;
  }

  std::size_t asked() const { return asked_; }

 private:
  std::unordered_map<std::string, std::size_t> component_;
  std::size_t asked_ = 0;
};

// Round-by-round engine. Verdicts may arrive one at a time and with any
// delay; the next round is planned once every pair of the current one has
// been answered. The distance source must outlive the campaign.
class Campaign {
 public:
  static std::size_t DefaultMaxRounds(std::size_t n) {
    return static_cast<std::size_t>(std::floor(std::log2(static_cast<double>(std::max<std::size_t>(n, 1))))) + 2;
  }

  explicit Campaign(const DistanceSource& distance, std::size_t max_rounds = 0)
      : distance_(&distance),
        index_(distance),
        forest_(distance.size()),
        max_rounds_(max_rounds ? max_rounds : DefaultMaxRounds(distance.size())) {
    SetPlan(NearestNeighborPairs(distance));
  }

  bool done() const { return done_; }
  bool truncated() const { return truncated_; }
  bool complete() const { return done_ && !truncated_; }
  std::size_t round() const { return plan_.round_index; }
  std::size_t max_rounds() const { return max_rounds_; }
  std::size_t budget_bound() const { return distance_->size(); }
  const RoundPlan& plan() const { return plan_; }
  const ComponentForest& forest() const { return forest_; }
  const BudgetLedger& ledger() const { return ledger_; }
  const DistanceSource& distance() const { return *distance_; }
  const std::vector<RoundPlan>& history() const { return history_; }
  const std::vector<std::vector<PairRecord>>& verdict_history() const {
    return verdict_history_;
  }

  bool InCurrentPlan(const std::string& key) const { return plan_slot_.count(key) > 0; }
  bool Answered(const std::string& key) const { return received_.count(key) > 0; }

  bool KnownNegative(const std::string& a, const std::string& b) const {
    return negatives_.count(internal::PairCode(index_.at(a), index_.at(b))) > 0;
  }

  std::vector<PairRecord> Pending() const {
    std::vector<PairRecord> out;
    if (done_) return out;
    for (const auto& p : plan_.pairs)
      if (!received_.count(p.key())) out.push_back(p);
    return out;
  }

  // Records verdicts for pairs of the current round; repeats of an already
  // answered pair are ignored. Returns how many verdicts were new.
  std::size_t Submit(const std::vector<PairRecord>& verdicts) {
    Require(!done_, ErrorKind::kContract, "campaign is finished");
    std::size_t fresh = 0;
    for (const auto& v : verdicts) {
      Require(v.label.has_value() && (*v.label == 0 || *v.label == 1),
              ErrorKind::kContract, "verdict for '" + v.key() + "' needs label 0 or 1");
      Require(plan_slot_.count(v.key()) > 0, ErrorKind::kContract,
              "pair '" + v.key() + "' is not part of round " +
                  std::to_string(plan_.round_index));
      if (received_.emplace(v.key(), *v.label).second) ++fresh;
    }
    if (received_.size() == plan_.pairs.size()) AdvanceRound();
    return fresh;
  }

  std::size_t Submit(const PairRecord& verdict) { return Submit(std::vector<PairRecord>{verdict}); }

  // Labels per item (first-appearance numbering).
  std::vector<std::size_t> ComponentLabels() const { return forest_.Labels(); }

  nlohmann::json ToJson() const {
    nlohmann::json merge = nlohmann::json::array();
    for (auto [a, b] : forest_.merge_log())
      merge.push_back({distance_->id(a), distance_->id(b)});
    std::vector<std::string> neg;
    neg.reserve(negatives_.size());
    for (auto code : negatives_) {
      const auto a = static_cast<std::size_t>(code >> 32);
      const auto b = static_cast<std::size_t>(code & 0xffffffffULL);
      neg.push_back(PairKey(distance_->id(a), distance_->id(b)));
    }
    std::sort(neg.begin(), neg.end());
    nlohmann::json plan = nlohmann::json::array();
    for (const auto& p : plan_.pairs) plan.push_back({p.item_a, p.item_b});
    nlohmann::json received = nlohmann::json::object();
    for (const auto& [k, v] : received_) received[k] = v;
    nlohmann::json history = nlohmann::json::array();
    for (const auto& round : verdict_history_) {
      nlohmann::json r = nlohmann::json::array();
      for (const auto& p : round) r.push_back({p.item_a, p.item_b, *p.label});
      history.push_back(std::move(r));
    }
    return {{"format", "dqaudit-campaign-1"},
            {"items", distance_->size()},
            {"round", plan_.round_index},
            {"max_rounds", max_rounds_},
            {"done", done_},
            {"truncated", truncated_},
            {"merge_log", merge},
            {"negatives", neg},
            {"plan", plan},
            {"received", received},
            {"verdict_history", history},
            {"ledger", ledger_.ToJson()}};
  }

  static Campaign FromJson(const nlohmann::json& j, const DistanceSource& distance) {
    try {
      Require(j.at("format") == "dqaudit-campaign-1", ErrorKind::kFormat,
              "unknown campaign state format");
      Require(j.at("items").get<std::size_t>() == distance.size(), ErrorKind::kData,
              "campaign state was written for a different item set");
      Campaign c(distance, j.at("max_rounds").get<std::size_t>());
      c.forest_ = ComponentForest(distance.size());
      for (const auto& m : j.at("merge_log"))
        c.forest_.Union(c.index_.at(m.at(0).get<std::string>()),
                        c.index_.at(m.at(1).get<std::string>()));
      c.negatives_.clear();
      for (const auto& key : j.at("negatives")) {
        const auto s = key.get<std::string>();
        const auto bar = s.find('|');
        Require(bar != std::string::npos, ErrorKind::kFormat, "bad negative key '" + s + "'");
        c.negatives_.insert(internal::PairCode(c.index_.at(s.substr(0, bar)),
                                               c.index_.at(s.substr(bar + 1))));
      }
      RoundPlan plan;
      plan.round_index = j.at("round").get<std::size_t>();
      for (const auto& p : j.at("plan"))
        plan.pairs.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
      c.history_.clear();
      c.verdict_history_.clear();
      for (const auto& round : j.at("verdict_history")) {
        std::vector<PairRecord> verdicts;
        RoundPlan past;
        past.round_index = c.history_.size();
        for (const auto& v : round) {
          verdicts.emplace_back(v.at(0).get<std::string>(), v.at(1).get<std::string>(),
                                v.at(2).get<int>());
          past.pairs.emplace_back(verdicts.back().item_a, verdicts.back().item_b);
        }
        c.history_.push_back(std::move(past));
        c.verdict_history_.push_back(std::move(verdicts));
      }
      c.done_ = j.at("done").get<bool>();
      c.truncated_ = j.at("truncated").get<bool>();
      c.ledger_ = BudgetLedger::FromJson(j.at("ledger"));
      c.SetPlan(std::move(plan));
      for (const auto& [k, v] : j.at("received").items()) {
        Require(c.plan_slot_.count(k) > 0, ErrorKind::kFormat,
                "received verdict '" + k + "' is not in the pending plan");
        c.received_.emplace(k, v.get<int>());
      }
      return c;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kFormat, std::string("bad campaign state: ") + e.what());
    }
  }

 private:
  void SetPlan(RoundPlan plan) {
    plan_ = std::move(plan);
    plan_slot_.clear();
    received_.clear();
    for (std::size_t k = 0; k < plan_.pairs.size(); ++k) plan_slot_.emplace(plan_.pairs[k].key(), k);
  }

  void AdvanceRound() {
    std::vector<PairRecord> verdicts;
    verdicts.reserve(plan_.pairs.size());
    for (const auto& p : plan_.pairs) verdicts.emplace_back(p.item_a, p.item_b, received_.at(p.key()));
    const auto touched = ApplyVerdicts(forest_, index_, verdicts, negatives_);
    const std::size_t positives = touched.size() / 2;

    ledger_.annotations_used += verdicts.size();
    ledger_.per_round_counts.push_back(verdicts.size());
    ledger_.per_round_positives.push_back(positives);
    ledger_.rounds_total += 1;
    if (positives > 0) ledger_.rounds_with_positives += 1;
    history_.push_back(plan_);
    verdict_history_.push_back(std::move(verdicts));

    const std::size_t next_round = plan_.round_index + 1;
    std::optional<RoundPlan> next;
    if (positives > 0)
      next = PlanNextRound(forest_, *distance_, touched, negatives_, next_round);
    if (!next) {
      done_ = true;
      SetPlan(RoundPlan{next_round, {}});
      return;
    }
    if (ledger_.rounds_total >= max_rounds_) {
      done_ = true;
      truncated_ = true;
    }
    SetPlan(std::move(*next));
  }

  const DistanceSource* distance_;
  ItemIndex index_;
  ComponentForest forest_;
  std::size_t max_rounds_;
  NegativeSet negatives_;
  RoundPlan plan_;
  std::unordered_map<std::string, std::size_t> plan_slot_;
  std::map<std::string, int> received_;
  BudgetLedger ledger_;
  std::vector<RoundPlan> history_;
  std::vector<std::vector<PairRecord>> verdict_history_;
  bool done_ = false;
  bool truncated_ = false;
};

struct CampaignResult {
  ComponentForest forest;
  BudgetLedger ledger;
  bool complete = false;
  std::vector<RoundPlan> rounds;
  std::vector<std::vector<PairRecord>> verdicts;
};

inline CampaignResult RunCampaign(const DistanceSource& distance, AnnotationOracle& oracle,
                                  std::size_t max_rounds = 0) {
  Campaign campaign(distance, max_rounds);
  while (!campaign.done()) {
    const auto pending = campaign.Pending();
    const auto answers = oracle.Answer(pending);
    Require(answers.size() == pending.size(), ErrorKind::kContract,
            "oracle must answer every pair exactly once");
    std::vector<PairRecord> verdicts;
    verdicts.reserve(pending.size());
    for (std::size_t k = 0; k < pending.size(); ++k)
      verdicts.emplace_back(pending[k].item_a, pending[k].item_b, answers[k]);
    campaign.Submit(verdicts);
  }
  return {campaign.forest(), campaign.ledger(), campaign.complete(), campaign.history(),
          campaign.verdict_history()};
}

struct ComponentHistogram {
  std::map<std::size_t, std::size_t> by_size;  // sizes >= 2 only
  std::size_t singletons = 0;

  std::size_t components() const {
    std::size_t c = 0;
    for (auto [s, n] : by_size) c += n;
    return c;
  }
};

inline ComponentHistogram ComponentStats(const ComponentForest& forest) {
  ComponentHistogram h;
  for (const auto& members : forest.Components()) {
    if (members.size() == 1)
      ++h.singletons;
    else
      ++h.by_size[members.size()];
  }
  return h;
}

}  // namespace dqaudit::fastdup
