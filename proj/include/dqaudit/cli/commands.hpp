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

// Subcommand bodies. Each takes parsed options, writes its outputs and
// returns normally, or throws dqaudit::Error.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "dqaudit/aggregation/calibration.hpp"
#include "dqaudit/aggregation/glad.hpp"
#include "dqaudit/core/error.hpp"
#include "dqaudit/core/io.hpp"
#include "dqaudit/core/types.hpp"
#include "dqaudit/detectors/image.hpp"
#include "dqaudit/detectors/labels.hpp"
#include "dqaudit/detectors/outliers.hpp"
#include "dqaudit/eval/agreement.hpp"
#include "dqaudit/eval/ranking.hpp"
#include "dqaudit/eval/report.hpp"
#include "dqaudit/fastdup/campaign.hpp"
#include "dqaudit/fastdup/distance.hpp"
#include "dqaudit/simulate/cliques.hpp"
#include "dqaudit/simulate/glad_world.hpp"

namespace dqaudit::cli {

namespace fs = std::filesystem;

inline nlohmann::json NullIfNan(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

// ---------------------------------------------------------------------------
// aggregate

struct AggregateOptions {
  fs::path votes;
  fs::path out;
  std::uint64_t seed = 0;
  std::size_t steps = 10000;
  double lr = 0.1;
  double sigma_b = 1000.0;
  std::size_t draws = 1000;
  std::size_t batch = 0;
  std::size_t mc_samples = 1;
  std::string dedup = "keep-last";
};

inline DedupPolicy ParseDedup(const std::string& s) {
  if (s == "keep-last") return DedupPolicy::kKeepLast;
  if (s == "keep-first") return DedupPolicy::kKeepFirst;
  if (s == "error") return DedupPolicy::kError;
  throw Error(ErrorKind::kUsage, "unknown dedup policy '" + s + "'");
}

inline void RunAggregate(const AggregateOptions& o) {
  const VoteTable votes = io::LoadVotes(o.votes, ParseDedup(o.dedup));
  aggregation::PriorConfig priors;
  priors.difficulty_prior_sd = o.sigma_b;
  aggregation::VIConfig cfg;
  cfg.learning_rate = o.lr;
  cfg.steps = o.steps;
  cfg.seed = o.seed;
  cfg.posterior_draws = o.draws;
  cfg.batch_size = o.batch;
  cfg.mc_samples_per_step = o.mc_samples;
  const auto fit = aggregation::FitWithTrace(votes, priors, cfg);
  const auto summary = aggregation::Summarize(votes, fit.params, cfg);
  const double elbo = aggregation::ElboEstimate(fit.params, votes, priors, 1000, o.seed);

  nlohmann::json items = nlohmann::json::array();
  for (std::size_t i = 0; i < summary.item_ids.size(); ++i)
    items.push_back({{"item_id", summary.item_ids[i]},
                     {"p_bar", summary.p_bar[i]},
                     {"difficulty_mag", summary.difficulty_magnitude[i]},
                     {"difficulty_mean", fit.params.difficulty_mean[i]},
                     {"difficulty_sd", std::exp(fit.params.difficulty_log_sd[i])}});
  nlohmann::json annotators = nlohmann::json::array();
  for (std::size_t a = 0; a < summary.annotator_ids.size(); ++a)
    annotators.push_back({{"annotator_id", summary.annotator_ids[a]},
                          {"ability", summary.ability[a]},
                          {"ability_sd", std::exp(fit.params.ability_log_sd[a])}});
  io::WriteJson(o.out, {{"format", "dqaudit-aggregate-1"},
                        {"config",
                         {{"seed", o.seed},
                          {"steps", o.steps},
                          {"lr", o.lr},
                          {"sigma_b", o.sigma_b},
                          {"draws", o.draws},
                          {"batch", o.batch},
                          {"mc_samples", o.mc_samples},
                          {"dedup", o.dedup}}},
                        {"votes", votes.num_votes()},
                        {"final_elbo", elbo},
                        {"orientation_flipped", fit.flipped},
                        {"items", items},
                        {"annotators", annotators}});
}

// ---------------------------------------------------------------------------
// calibrate

struct CalibrateOptions {
  fs::path pbar;
  std::optional<fs::path> expert;
  std::optional<fs::path> sample_out;
  std::optional<fs::path> out;
  std::size_t bins = 20;
  std::size_t per_bin = 20;
  std::uint64_t seed = 0;
  bool equal_width = false;
};

struct PbarTable {
  std::vector<std::string> ids;
  std::vector<double> p_bar;
};

inline PbarTable LoadPbar(const fs::path& path) {
  const auto j = io::ReadJson(path);
  PbarTable t;
  try {
    for (const auto& item : j.at("items")) {
      t.ids.push_back(item.at("item_id").get<std::string>());
      t.p_bar.push_back(item.at("p_bar").get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, "'" + path.string() + "' is not aggregate output: " + e.what());
  }
  Require(!t.ids.empty(), ErrorKind::kData, "no items in '" + path.string() + "'");
  return t;
}

inline void RunCalibrate(const CalibrateOptions& o) {
  Require(o.expert || o.sample_out, ErrorKind::kUsage,
          "calibrate needs --expert (threshold) or --sample-out (draw the expert sample)");
  Require(!o.expert || o.out, ErrorKind::kUsage, "--expert requires --out");
  const auto pb = LoadPbar(o.pbar);
  const auto mode =
      o.equal_width ? aggregation::BinningMode::kEqualWidth : aggregation::BinningMode::kQuantile;
  const auto sample = aggregation::StratifiedSampleItems(pb.p_bar, o.bins, o.per_bin, o.seed, mode);
  if (o.sample_out) {
    auto f = io::OpenForWrite(*o.sample_out);
    f << "item_id,p_bar,bin\n";
    for (std::size_t s = 0; s < sample.items.size(); ++s)
      f << io::CsvField(pb.ids[sample.items[s]]) << ',' << io::FormatDouble(pb.p_bar[sample.items[s]])
        << ',' << sample.sample_bin[s] << '\n';
  }
  if (!o.expert) return;

  const auto expert = io::LoadBinaryLabels(*o.expert);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < pb.ids.size(); ++i) index.emplace(pb.ids[i], i);
  const auto bin = aggregation::AssignBins(pb.p_bar, o.bins, mode);
  std::vector<double> sp;
  std::vector<int> sl;
  std::vector<std::size_t> sb;
  for (const auto& [id, label] : expert) {
    auto it = index.find(id);
    Require(it != index.end(), ErrorKind::kData, "expert label for unknown item '" + id + "'");
    sp.push_back(pb.p_bar[it->second]);
    sl.push_back(label);
    sb.push_back(bin[it->second]);
  }
  const auto cal = aggregation::CalibrateThreshold(sp, sl, sb, o.bins, sample.bin_edges);
  const auto labels = aggregation::FinalizeLabels(pb.p_bar, cal.threshold);

  nlohmann::json fractions = nlohmann::json::array();
  for (double f : cal.positive_fraction_per_bin) fractions.push_back(NullIfNan(f));
  nlohmann::json items = nlohmann::json::array();
  std::size_t positives = 0;
  for (std::size_t i = 0; i < pb.ids.size(); ++i) {
    items.push_back({{"item_id", pb.ids[i]}, {"p_bar", pb.p_bar[i]}, {"label", labels[i]}});
    positives += static_cast<std::size_t>(labels[i]);
  }
  io::WriteJson(*o.out, {{"format", "dqaudit-calibration-1"},
                         {"binning", o.equal_width ? "equal-width" : "quantile"},
                         {"bins", o.bins},
                         {"bin_edges", cal.bin_edges},
                         {"positive_fraction_per_bin", fractions},
                         {"samples_per_bin", cal.samples_per_bin},
                         {"chosen_bin", cal.chosen_bin},
                         {"threshold", cal.threshold},
                         {"positives", positives},
                         {"expected_mislabel_rate", aggregation::UncertaintySummary(pb.p_bar, labels)},
                         {"items", items}});
}

// ---------------------------------------------------------------------------
// detect

struct DetectOptions {
  std::string task;    // offtopic | duplicates | labelerrors
  std::string method;
  std::optional<fs::path> embeddings;
  std::optional<fs::path> images;
  std::optional<fs::path> pairs;
  std::optional<fs::path> labels;
  std::optional<fs::path> probs;
  fs::path out;
  std::size_t k = 0;  // 0 picks the method default
  std::size_t trees = 100;
  std::size_t subsample = 256;
  std::size_t bins = 10;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  bool sliding = false;
};

inline EmbeddingMatrix NeedEmbeddings(const DetectOptions& o) {
  Require(o.embeddings.has_value(), ErrorKind::kUsage,
          "method '" + o.method + "' needs --embeddings");
  return io::LoadEmbeddings(*o.embeddings);
}

inline void WriteScoreVector(const fs::path& out, const detectors::ScoreVector& s) {
  s.Validate();
  io::SaveScores(out, s.keys, s.scores);
  if (s.degenerate) std::cerr << "warning: scores are degenerate (all inputs identical)\n";
  if (!s.flagged.empty())
    std::cerr << "warning: " << s.flagged.size() << " items scored with incomplete neighbourhoods\n";
}

inline detectors::ScoreVector DetectOfftopic(const DetectOptions& o) {
  const auto x = NeedEmbeddings(o);
  if (o.method == "knn") return detectors::KnnOutlierScore(x, o.k ? o.k : 5);
  if (o.method == "iforest")
    return detectors::IForestScore(detectors::IForestFit(x, o.trees, o.subsample, o.seed), x);
  if (o.method == "hbos") return detectors::HbosScore(x, o.bins);
  if (o.method == "ecod") return detectors::EcodScore(x);
  throw Error(ErrorKind::kUsage, "unknown offtopic method '" + o.method + "'");
}

inline detectors::ScoreVector DetectDuplicates(const DetectOptions& o) {
  Require(o.pairs.has_value(), ErrorKind::kUsage, "duplicates needs --pairs");
  const auto pairs = io::LoadPairs(*o.pairs);
  if (o.method == "embed") return detectors::EmbedPairSimilarity(NeedEmbeddings(o), pairs);
  Require(o.method == "phash" || o.method == "ssim", ErrorKind::kUsage,
          "unknown duplicates method '" + o.method + "'");
  Require(o.images.has_value(), ErrorKind::kUsage, "method '" + o.method + "' needs --images");
  std::map<std::string, GrayImage> cache;
  auto image = [&](const std::string& id) -> const GrayImage& {
    auto it = cache.find(id);
    if (it != cache.end()) return it->second;
    const auto path = *o.images / (id + ".pgm");
    Require(fs::exists(path), ErrorKind::kData, "no image '" + path.string() + "'");
    return cache.emplace(id, io::LoadPgm(path)).first->second;
  };
  detectors::ScoreVector s;
  for (const auto& p : pairs) {
    const auto& a = image(p.item_a);
    const auto& b = image(p.item_b);
    s.keys.push_back(p.key());
    s.scores.push_back(o.method == "phash"
                           ? detectors::HashSimilarity(detectors::PHash(a), detectors::PHash(b))
                           : detectors::SsimPair(a, b,
                                                 o.sliding ? detectors::SsimWindowing::kSliding
                                                           : detectors::SsimWindowing::kNonOverlapping));
  }
  return s;
}

// Class names are mapped to ids in sorted order.
inline detectors::ScoreVector DetectLabelErrors(const DetectOptions& o) {
  Require(o.labels.has_value(), ErrorKind::kUsage, "labelerrors needs --labels");
  const auto names = io::LoadClassLabels(*o.labels);
  std::map<std::string, int> class_id;
  for (const auto& [item, name] : names) class_id.emplace(name, 0);
  int next = 0;
  for (auto& [name, id] : class_id) id = next++;

  if (o.method == "cl" && o.probs) {
    const auto table = io::ReadCsv(*o.probs);
    Require(table.header.size() == class_id.size() + 1 && table.header[0] == "item_id",
            ErrorKind::kFormat, "probability CSV header must be item_id followed by one column per class");
    std::vector<int> column_class;
    for (std::size_t c = 1; c < table.header.size(); ++c) {
      auto it = class_id.find(table.header[c]);
      Require(it != class_id.end(), ErrorKind::kFormat, "unknown class column '" + table.header[c] + "'");
      column_class.push_back(it->second);
    }
    std::vector<std::vector<double>> probs;
    std::vector<int> given;
    std::vector<std::string> keys;
    for (const auto& row : table.rows) {
      if (row.fields.size() != table.header.size()) throw ParseError(row.line, "wrong field count");
      auto it = names.find(row.fields[0]);
      Require(it != names.end(), ErrorKind::kData, "no label for item '" + row.fields[0] + "'");
      std::vector<double> p(class_id.size());
      for (std::size_t c = 1; c < row.fields.size(); ++c)
        if (!io::ParseNumber(row.fields[c], p[static_cast<std::size_t>(column_class[c - 1])]))
          throw ParseError(row.line, "bad probability '" + row.fields[c] + "'");
      probs.push_back(std::move(p));
      given.push_back(class_id.at(it->second));
      keys.push_back(row.fields[0]);
    }
    const auto r = detectors::ConfidentLearning(probs, given);
    return detectors::ScoreVector(keys, r.scores);
  }

  const auto x = NeedEmbeddings(o);
  std::vector<int> labels(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto it = names.find(x.ids()[i]);
    Require(it != names.end(), ErrorKind::kData, "no label for item '" + x.ids()[i] + "'");
    labels[i] = class_id.at(it->second);
  }
  const std::size_t k = o.k ? o.k : 10;
  if (o.method == "embed") return detectors::EmbedLabelErrorScore(x, labels, k);
  Require(o.method == "cl", ErrorKind::kUsage, "unknown labelerrors method '" + o.method + "'");
  const auto probs = detectors::KnnProbEstimator(x, labels, k, o.folds, o.seed);
  return detectors::ScoreVector(x.ids(), detectors::ConfidentLearning(probs, labels).scores);
}

inline void RunDetect(const DetectOptions& o) {
  if (o.task == "offtopic") return WriteScoreVector(o.out, DetectOfftopic(o));
  if (o.task == "duplicates") return WriteScoreVector(o.out, DetectDuplicates(o));
  if (o.task == "labelerrors") return WriteScoreVector(o.out, DetectLabelErrors(o));
  throw Error(ErrorKind::kUsage, "unknown detect task '" + o.task + "'");
}

// ---------------------------------------------------------------------------
// eval and report

// Joins scores to labels; only labeled keys are ranked.
inline LabeledRanking JoinScoresAndLabels(const fs::path& scores_path, const fs::path& labels_path) {
  std::map<std::string, double> scores;
  for (const auto& s : io::LoadScores(scores_path))
    Require(scores.emplace(s.key, s.value).second, ErrorKind::kData,
            "duplicate score key '" + s.key + "'");
  std::vector<RankedEntry> entries;
  for (const auto& [key, label] : io::LoadBinaryLabels(labels_path)) {
    auto it = scores.find(key);
    Require(it != scores.end(), ErrorKind::kData, "labeled key '" + key + "' has no score");
    entries.push_back({key, it->second, label});
  }
  Require(!entries.empty(), ErrorKind::kData, "no labeled keys in '" + labels_path.string() + "'");
  return LabeledRanking(std::move(entries));
}

struct EvalOptions {
  fs::path scores;
  fs::path labels;
  std::vector<std::size_t> ks = eval::DefaultKs();
  fs::path out;
  std::optional<fs::path> table;
  std::string task;
};

inline void WriteReport(const eval::MetricReport& report, const fs::path& out,
                        const std::optional<fs::path>& table) {
  for (const auto& t : report.tasks)
    if (!t.clipped_ks.empty())
      std::cerr << "warning: task '" << t.task << "' has " << t.n << " ranked keys; larger k clipped\n";
  io::WriteJson(out, report.ToJson());
  if (table) io::OpenForWrite(*table) << report.FormatTable();
}

inline void RunEval(const EvalOptions& o) {
  const std::string task = o.task.empty() ? o.scores.stem().string() : o.task;
  WriteReport(eval::BenchmarkReport({{task, JoinScoresAndLabels(o.scores, o.labels)}}, o.ks), o.out,
              o.table);
}

struct ReportOptions {
  fs::path in;
  std::vector<std::size_t> ks = eval::DefaultKs();
  fs::path out;
  std::optional<fs::path> table;
};

// Every `<task>.scores.csv` in the directory with a `<task>.labels.csv` next to it.
inline void RunReport(const ReportOptions& o) {
  Require(fs::is_directory(o.in), ErrorKind::kData, "'" + o.in.string() + "' is not a directory");
  const std::string suffix = ".scores.csv";
  std::vector<std::string> tasks;
  for (const auto& e : fs::directory_iterator(o.in)) {
    const auto name = e.path().filename().string();
    if (name.size() > suffix.size() && name.ends_with(suffix))
      tasks.push_back(name.substr(0, name.size() - suffix.size()));
  }
  std::sort(tasks.begin(), tasks.end());
  std::vector<std::pair<std::string, LabeledRanking>> rankings;
  for (const auto& t : tasks) {
    const auto labels = o.in / (t + ".labels.csv");
    if (!fs::exists(labels)) {
      std::cerr << "warning: skipping '" << t << "': no " << labels.filename().string() << '\n';
      continue;
    }
    rankings.emplace_back(t, JoinScoresAndLabels(o.in / (t + suffix), labels));
  }
  Require(!rankings.empty(), ErrorKind::kData,
          "no <task>.scores.csv with matching <task>.labels.csv in '" + o.in.string() + "'");
  WriteReport(eval::BenchmarkReport(rankings, o.ks), o.out, o.table);
}

// ---------------------------------------------------------------------------
// agreement

struct AgreementOptions {
  fs::path raters;
  std::size_t bootstrap = 2000;
  double level = 0.95;
  std::uint64_t seed = 0;
  fs::path out;
};

inline std::vector<eval::RaterRecord> LoadRaterRecords(const fs::path& path) {
  const auto table = io::ReadCsv(path);
  io::ExpectHeader(table, {"rater_id", "item_id", "label"});
  std::vector<eval::RaterRecord> out;
  for (const auto& row : table.rows) {
    if (row.fields.size() != 3) throw ParseError(row.line, "expected 3 fields");
    out.push_back({row.fields[0], row.fields[1], io::ParseBinaryField(row, 2, "label")});
  }
  return out;
}

inline nlohmann::json MetricWithCi(const std::function<double(std::span<const std::size_t>)>& stat,
                                   std::size_t n, const AgreementOptions& o, std::uint64_t stream) {
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  const auto point = eval::Guarded([&] { return stat(all); });
  if (!point.value) return {{"value", nullptr}, {"reason", point.reason}};
  nlohmann::json j = {{"value", *point.value}};
  if (o.bootstrap > 0) {
    const auto ci = eval::BootstrapCi(n, stat, o.bootstrap, o.level,
                                      Rng(o.seed).Split(stream).NextU64(), *point.value);
    j["ci"] = {ci.low, ci.high};
    j["resamples_used"] = ci.resamples_used;
  }
  return j;
}

inline void RunAgreement(const AgreementOptions& o) {
  const auto records = LoadRaterRecords(o.raters);
  const auto units = eval::GroupByItem(records);
  std::set<std::string> raters;
  for (const auto& r : records) raters.insert(r.rater);

  nlohmann::json out = {{"format", "dqaudit-agreement-1"},
                        {"raters", raters.size()},
                        {"items", units.size()},
                        {"bootstrap", o.bootstrap},
                        {"level", o.level},
                        {"seed", o.seed}};
  out["krippendorff_alpha"] = MetricWithCi(
      [&](std::span<const std::size_t> idx) {
        eval::RatingUnits sample;
        sample.reserve(idx.size());
        for (auto i : idx) sample.push_back(units[i]);
        return eval::KrippendorffAlpha(sample);
      },
      units.size(), o, 0);
  nlohmann::json kappa = nlohmann::json::object();
  std::uint64_t stream = 1;
  for (auto a = raters.begin(); a != raters.end(); ++a) {
    for (auto b = std::next(a); b != raters.end(); ++b, ++stream) {
      const auto [la, lb] = eval::PairedLabels(records, *a, *b);
      const std::string name = *a + "|" + *b;
      if (la.size() < 2) {
        kappa[name] = {{"value", nullptr}, {"reason", "fewer than two items rated by both"}, {"n", la.size()}};
        continue;
      }
      kappa[name] = MetricWithCi(
          [&la = la, &lb = lb](std::span<const std::size_t> idx) {
            std::vector<int> x, y;
            for (auto i : idx) {
              x.push_back(la[i]);
              y.push_back(lb[i]);
            }
            return eval::CohenKappa(x, y);
          },
          la.size(), o, stream);
      kappa[name]["n"] = la.size();
    }
  }
  out["cohen_kappa"] = kappa;
  io::WriteJson(o.out, out);
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateGladOptions {
  std::size_t annotators = 50;
  std::size_t items = 300;
  std::size_t votes = 10;
  double ability_mean = 1.0;
  double ability_sd = 0.5;
  double difficulty = 2.0;
  double positive_fraction = 0.5;
  double adversarial = 0.0;
  bool heavy_tail = false;
  std::uint64_t seed = 1;
  fs::path out;
  std::optional<fs::path> truth;
};

inline void RunSimulateGlad(const SimulateGladOptions& o) {
  simulate::GladWorldConfig cfg;
  cfg.annotators = o.annotators;
  cfg.items = o.items;
  cfg.ability_mean = o.ability_mean;
  cfg.ability_sd = o.ability_sd;
  cfg.difficulty_magnitude = o.difficulty;
  cfg.positive_fraction = o.positive_fraction;
  cfg.truncate_positive = true;
  cfg.adversarial_fraction = o.adversarial;
  cfg.seed = o.seed;
  const auto world = simulate::SampleGladWorld(cfg);
  const auto votes = simulate::GenerateVotes(
      world, o.votes, o.seed,
      o.heavy_tail ? simulate::AssignmentMode::kHeavyTail : simulate::AssignmentMode::kUniform);
  io::SaveVotes(o.out, votes);
  if (o.truth) {
    auto f = io::OpenForWrite(*o.truth);
    f << "item_id,label\n";
    const auto classes = world.TrueClasses();
    for (std::size_t i = 0; i < classes.size(); ++i)
      f << simulate::ItemId(i, classes.size()) << ',' << classes[i] << '\n';
  }
}

struct SimulateCliquesOptions {
  std::size_t n = 200;
  std::size_t dim = 16;
  std::string preset = "table2";
  std::size_t max_clique = 30;
  double duplicate_fraction = 0.34;
  double margin = 3.0;
  std::uint64_t seed = 1;
  fs::path out;
  std::optional<fs::path> truth;
  std::optional<fs::path> world;
};

inline void RunSimulateCliques(const SimulateCliquesOptions& o) {
  simulate::SizeDistribution sizes;
  if (o.preset == "table2") {
    Rng rng = Rng(o.seed).Split(1);
    sizes = simulate::ReleasedSizePreset(o.n, rng, o.duplicate_fraction, o.max_clique);
  } else {
    Require(o.preset == "none", ErrorKind::kUsage, "unknown preset '" + o.preset + "'");
  }
  const auto w = simulate::PlantCliques(o.n, sizes, o.dim, o.margin, o.seed);
  io::SaveEmbeddings(o.out, w.embeddings);
  if (o.truth) {
    auto f = io::OpenForWrite(*o.truth);
    f << "item_id,component_id\n";
    for (std::size_t i = 0; i < w.component.size(); ++i)
      f << io::CsvField(w.embeddings.ids()[i]) << ',' << w.component[i] << '\n';
  }
  if (o.world) {
    nlohmann::json partition = nlohmann::json::object();
    for (std::size_t i = 0; i < w.component.size(); ++i) partition[w.embeddings.ids()[i]] = w.component[i];
    io::WriteJson(*o.world, {{"format", "dqaudit-world-1"},
                             {"seed", o.seed},
                             {"margin", w.margin},
                             {"radius", w.radius},
                             {"largest_component", w.LargestComponent()},
                             {"partition", partition}});
  }
}

// ---------------------------------------------------------------------------
// fastdup run

// item_id -> component from a world JSON or an item_id,component_id CSV.
inline std::unordered_map<std::string, std::size_t> LoadPartition(const fs::path& path) {
  std::unordered_map<std::string, std::size_t> out;
  if (path.extension() == ".csv") {
    const auto table = io::ReadCsv(path);
    io::ExpectHeader(table, {"item_id", "component_id"});
    for (const auto& row : table.rows) {
      std::size_t c = 0;
      if (row.fields.size() != 2 || !io::ParseNumber(row.fields[1], c))
        throw ParseError(row.line, "expected item_id,component_id");
      out.emplace(row.fields[0], c);
    }
    return out;
  }
  const auto j = io::ReadJson(path);
  try {
    for (const auto& [id, c] : j.at("partition").items()) out.emplace(id, c.get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, "world file needs a 'partition' object: " + std::string(e.what()));
  }
  return out;
}

struct FastdupRunOptions {
  fs::path embeddings;
  std::string oracle;  // file:<pairs.csv> | simulate:<world.json>
  fs::path out;
  std::size_t max_rounds = 0;
  bool resume = false;
};

struct FastdupRunOutcome {
  bool awaiting = false;
  std::size_t awaiting_pairs = 0;
  bool complete = false;
};

inline std::string RoundTag(std::size_t r) {
  std::string s = std::to_string(r);
  if (s.size() < 2) s.insert(0, 2 - s.size(), '0');
  return "round_" + s;
}

inline void WriteCampaignOutputs(const fastdup::Campaign& c, const fs::path& out) {
  for (std::size_t r = 0; r < c.history().size(); ++r) {
    io::SavePairs(out / (RoundTag(r) + "_plan.csv"), c.history()[r].pairs);
    io::SavePairs(out / (RoundTag(r) + "_verdicts.csv"), c.verdict_history()[r]);
  }
  if (!c.done()) io::SavePairs(out / (RoundTag(c.round()) + "_plan.csv"), c.plan().pairs);
  const auto labels = c.ComponentLabels();
  {
    auto f = io::OpenForWrite(out / "components.csv");
    f << "item_id,component_id\n";
    for (std::size_t i = 0; i < labels.size(); ++i)
      f << io::CsvField(c.distance().id(i)) << ',' << labels[i] << '\n';
  }
  const auto hist = fastdup::ComponentStats(c.forest());
  nlohmann::json by_size = nlohmann::json::object();
  for (auto [size, count] : hist.by_size) by_size[std::to_string(size)] = count;
  nlohmann::json ledger = c.ledger().ToJson();
  ledger["budget_bound"] = c.budget_bound();
  ledger["max_rounds"] = c.max_rounds();
  ledger["done"] = c.done();
  ledger["complete"] = c.complete();
  ledger["truncated"] = c.truncated();
  ledger["components_by_size"] = by_size;
  ledger["duplicate_components"] = hist.components();
  ledger["singletons"] = hist.singletons;
  io::WriteJson(out / "ledger.json", ledger);
  io::WriteJson(out / "state.json", c.ToJson());
}

inline FastdupRunOutcome RunFastdup(const FastdupRunOptions& o) {
  const auto colon = o.oracle.find(':');
  Require(colon != std::string::npos, ErrorKind::kUsage,
          "--oracle must be file:<pairs.csv> or simulate:<world.json>");
  const std::string kind = o.oracle.substr(0, colon);
  const fs::path source = o.oracle.substr(colon + 1);
  Require(kind == "file" || kind == "simulate", ErrorKind::kUsage,
          "unknown oracle kind '" + kind + "'");

  const auto emb = io::LoadEmbeddings(o.embeddings);
  const fastdup::EuclideanDistance distance(emb);
  const auto state_path = o.out / "state.json";
  std::optional<fastdup::Campaign> campaign;
  if (o.resume && fs::exists(state_path)) {
    campaign.emplace(fastdup::Campaign::FromJson(io::ReadJson(state_path), distance));
  } else {
    // fresh run: drop artifacts of an earlier one
    if (fs::exists(o.out))
      for (const auto& e : fs::directory_iterator(o.out)) {
        const auto name = e.path().filename().string();
        if (name.starts_with("round_") || name == "awaiting.csv" || name == "state.json")
          fs::remove(e.path());
      }
    campaign.emplace(distance, o.max_rounds);
  }

  FastdupRunOutcome outcome;
  if (kind == "simulate") {
    fastdup::PartitionOracle oracle(LoadPartition(source));
    while (!campaign->done()) {
      const auto pending = campaign->Pending();
      const auto answers = oracle.Answer(pending);
      std::vector<PairRecord> verdicts;
      for (std::size_t k = 0; k < pending.size(); ++k)
        verdicts.emplace_back(pending[k].item_a, pending[k].item_b, answers[k]);
      campaign->Submit(verdicts);
    }
  } else {
    std::map<std::string, int> known;
    if (fs::exists(source)) {
      for (const auto& p : io::LoadPairs(source)) {
        if (!p.label) continue;
        auto [it, inserted] = known.emplace(p.key(), *p.label);
        Require(inserted || it->second == *p.label, ErrorKind::kConflict,
                "conflicting verdicts for '" + p.key() + "' in '" + source.string() + "'");
      }
    }
    while (!campaign->done()) {
      std::vector<PairRecord> verdicts, missing;
      for (const auto& p : campaign->Pending()) {
        auto it = known.find(p.key());
        if (it == known.end())
          missing.push_back(p);
        else
          verdicts.emplace_back(p.item_a, p.item_b, it->second);
      }
      if (!verdicts.empty()) campaign->Submit(verdicts);
      if (!missing.empty()) {
        io::SavePairs(o.out / "awaiting.csv", missing);
        outcome.awaiting = true;
        outcome.awaiting_pairs = missing.size();
        break;
      }
    }
  }
  if (!outcome.awaiting && fs::exists(o.out / "awaiting.csv")) fs::remove(o.out / "awaiting.csv");
  WriteCampaignOutputs(*campaign, o.out);
  outcome.complete = campaign->complete();
  return outcome;
}

}  // namespace dqaudit::cli
