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

// Per-task metric tables: JSON plus a fixed-width text rendering.

#include <cstddef>
#include <cstdio>
#include <algorithm>
#include <utility>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dqaudit/core/error.hpp"
#include "dqaudit/core/types.hpp"
#include "dqaudit/eval/ranking.hpp"

namespace dqaudit::eval {

inline const std::vector<std::size_t>& DefaultKs() {
  static const std::vector<std::size_t> ks = {100, 500, 1000};
  return ks;
}

// A metric value, or the reason it is undefined.
struct MaybeMetric {
  std::optional<double> value;
  std::string reason;

  nlohmann::json ToJson() const {
    if (value) return *value;
    return nullptr;
  }
};

struct TaskMetrics {
  std::string task;
  std::size_t n = 0;
  std::size_t positives = 0;
  double p_plus = 0.0;
  MaybeMetric auroc;
  MaybeMetric ap;
  std::map<std::size_t, AtK> precision_at;
  std::map<std::size_t, MaybeMetric> recall_at;
  std::vector<std::size_t> clipped_ks;
};

template <typename F>
MaybeMetric Guarded(F&& f) {
  try {
    return {f(), ""};
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kUndefinedMetric) throw;
    return {std::nullopt, e.what()};
  }
}

inline TaskMetrics EvaluateTask(const std::string& task, const LabeledRanking& r,
                                const std::vector<std::size_t>& ks = DefaultKs()) {
  TaskMetrics m;
  m.task = task;
  m.n = r.size();
  m.positives = r.positives();
  m.p_plus = BaselinePPlus(r);
  m.auroc = Guarded([&] { return Auroc(r); });
  m.ap = Guarded([&] { return AveragePrecision(r); });
  for (std::size_t k : ks) {
    m.precision_at[k] = PrecisionAtK(r, k);
    if (m.precision_at[k].clipped) m.clipped_ks.push_back(k);
    m.recall_at[k] = Guarded([&] { return RecallAtK(r, k).value; });
  }
  return m;
}

struct MetricReport {
  std::vector<TaskMetrics> tasks;
  std::vector<std::size_t> ks = DefaultKs();

  nlohmann::json ToJson() const {
    nlohmann::json out;
    out["tie_policy"] =
        "AUROC gives half credit to tied scores; rank metrics order ties by ascending key";
    out["ap_variant"] = "non-interpolated";
    out["columns"] = Columns();
    out["tasks"] = nlohmann::json::array();
    for (const auto& t : tasks) {
      nlohmann::json j;
      j["task"] = t.task;
      j["n"] = t.n;
      j["positives"] = t.positives;
      j["p_plus"] = t.p_plus;
      j["auroc"] = t.auroc.ToJson();
      j["ap"] = t.ap.ToJson();
      nlohmann::json reasons = nlohmann::json::object();
      if (!t.auroc.value) reasons["auroc"] = t.auroc.reason;
      if (!t.ap.value) reasons["ap"] = t.ap.reason;
      for (const auto& [k, v] : t.precision_at) j["precision_at"][std::to_string(k)] = v.value;
      for (const auto& [k, v] : t.recall_at) {
        j["recall_at"][std::to_string(k)] = v.ToJson();
        if (!v.value) reasons["recall_at_" + std::to_string(k)] = v.reason;
      }
      j["clipped_ks"] = t.clipped_ks;
      if (!reasons.empty()) j["undefined"] = reasons;
      out["tasks"].push_back(std::move(j));
    }
    return out;
  }

  std::vector<std::string> Columns() const {
    std::vector<std::string> cols = {"p+"};
    for (std::size_t k : ks) cols.push_back("P@" + std::to_string(k));
    for (std::size_t k : ks) cols.push_back("R@" + std::to_string(k));
    cols.push_back("AUROC");
    cols.push_back("AP");
    return cols;
  }

  // Values in percent with one decimal; "n/a" for undefined metrics.
  std::string FormatTable() const {
    auto cell = [](std::optional<double> v) {
      if (!v) return std::string("n/a");
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.1f", 100.0 * *v);
      return std::string(buf);
    };
    std::size_t task_width = 4;
    for (const auto& t : tasks) task_width = std::max(task_width, t.task.size());
    std::string out;
    auto pad = [](std::string s, std::size_t w, bool left) {
      if (s.size() < w) s = left ? s + std::string(w - s.size(), ' ') : std::string(w - s.size(), ' ') + s;
      return s;
    };
    out += pad("task", task_width, true);
    for (const auto& c : Columns()) out += "  " + pad(c, 7, false);
    out += '\n';
    for (const auto& t : tasks) {
      out += pad(t.task, task_width, true);
      std::vector<std::optional<double>> row = {t.p_plus};
      for (std::size_t k : ks) row.push_back(t.precision_at.at(k).value);
      for (std::size_t k : ks) row.push_back(t.recall_at.at(k).value);
      row.push_back(t.auroc.value);
      row.push_back(t.ap.value);
      for (const auto& v : row) out += "  " + pad(cell(v), 7, false);
      out += '\n';
    }
    return out;
  }
};

inline MetricReport BenchmarkReport(const std::vector<std::pair<std::string, LabeledRanking>>& rankings,
                                    const std::vector<std::size_t>& ks = DefaultKs()) {
  MetricReport report;
  report.ks = ks;
  for (const auto& [task, r] : rankings) report.tasks.push_back(EvaluateTask(task, r, ks));
  return report;
}

}  // namespace dqaudit::eval
