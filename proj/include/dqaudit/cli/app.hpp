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

// Argument grammar and dispatch. Exit codes: 0 success, 1 usage error,
// 2 data or contract error, 3 numeric error.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "dqaudit/cli/commands.hpp"
#include "dqaudit/cli/manifest.hpp"
#include "dqaudit/cli/serve.hpp"
#include "dqaudit/core/error.hpp"
#include "dqaudit/core/io.hpp"

namespace dqaudit::cli {

inline std::size_t EditDistance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

// Closest long option or subcommand name of the deepest parsed command.
inline std::string Suggest(const CLI::App& app, const std::string& token) {
  const CLI::App* deepest = &app;
  for (bool descended = true; descended;) {
    descended = false;
    for (const auto* sub : deepest->get_subcommands()) {
      deepest = sub;
      descended = true;
      break;
    }
  }
  std::vector<std::string> names;
  for (const auto* opt : deepest->get_options())
    for (const auto& l : opt->get_lnames()) names.push_back("--" + l);
  for (const auto* sub : deepest->get_subcommands({})) names.push_back(sub->get_name());
  std::string best;
  std::size_t best_d = 3;  // suggest only close matches
  for (const auto& n : names) {
    const std::size_t d = EditDistance(token, n);
    if (d < best_d) {
      best_d = d;
      best = n;
    }
  }
  return best;
}

struct Invocation {
  RunManifest manifest;
  std::function<void()> run;
};

inline std::vector<std::size_t> ParseKs(const std::string& s) {
  std::vector<std::size_t> ks;
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, ',')) {
    std::size_t k = 0;
    Require(io::ParseNumber(part, k) && k >= 1, ErrorKind::kUsage, "bad k '" + part + "' in --ks");
    ks.push_back(k);
  }
  Require(!ks.empty(), ErrorKind::kUsage, "--ks is empty");
  return ks;
}

// Records every option that was given (or has a default) into the manifest.
inline void RecordFlags(const CLI::App& sub, RunManifest& m) {
  for (const auto* opt : sub.get_options()) {
    if (opt->get_lnames().empty() || opt->get_lnames()[0] == "help") continue;
    const std::string name = opt->get_lnames()[0];
    if (opt->count() > 0) {
      std::string joined;
      for (const auto& r : opt->results()) joined += (joined.empty() ? "" : ",") + r;
      m.flags[name] = opt->get_type_size() == 0 ? "true" : joined;
    } else if (!opt->get_default_str().empty()) {
      m.flags[name] = opt->get_default_str();
    }
  }
}

inline int Dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"Data-quality audit toolkit: near-duplicate campaigns, crowd-label "
               "aggregation, issue detectors and ranking evaluation.",
               "dqaudit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  std::vector<std::string> inputs;  // flag names whose values are input paths
  std::string subcommand;

  // aggregate
  AggregateOptions agg;
  auto* c_agg = app.add_subcommand("aggregate", "fit the crowd-label model and write p_bar per item");
  c_agg->add_option("--votes", agg.votes, "vote CSV: annotator_id,item_id,vote")->required()->check(CLI::ExistingFile);
  c_agg->add_option("--out", agg.out, "output JSON")->required();
  c_agg->add_option("--seed", agg.seed)->capture_default_str();
  c_agg->add_option("--steps", agg.steps)->capture_default_str();
  c_agg->add_option("--lr", agg.lr)->capture_default_str();
  c_agg->add_option("--sigma-b", agg.sigma_b, "difficulty prior sd")->capture_default_str();
  c_agg->add_option("--draws", agg.draws, "posterior draws for p_bar")->capture_default_str();
  c_agg->add_option("--batch", agg.batch, "votes per step, 0 = all")->capture_default_str();
  c_agg->add_option("--mc-samples", agg.mc_samples)->capture_default_str();
  c_agg->add_option("--dedup", agg.dedup, "keep-last | keep-first | error")
      ->capture_default_str()
      ->check(CLI::IsMember({"keep-last", "keep-first", "error"}));

  // calibrate
  CalibrateOptions cal;
  std::string cal_expert, cal_sample, cal_out;
  auto* c_cal = app.add_subcommand("calibrate", "draw the expert sample or choose the threshold");
  c_cal->add_option("--pbar", cal.pbar, "aggregate output JSON")->required()->check(CLI::ExistingFile);
  c_cal->add_option("--expert", cal_expert, "expert labels CSV: item_id,label")->check(CLI::ExistingFile);
  c_cal->add_option("--sample-out", cal_sample, "write the stratified sample CSV");
  c_cal->add_option("--out", cal_out, "calibration JSON");
  c_cal->add_option("--bins", cal.bins)->capture_default_str();
  c_cal->add_option("--per-bin", cal.per_bin)->capture_default_str();
  c_cal->add_option("--seed", cal.seed)->capture_default_str();
  c_cal->add_flag("--equal-width", cal.equal_width, "equal-width bins instead of quantile bins");

  // fastdup
  auto* c_fd = app.add_subcommand("fastdup", "near-duplicate annotation campaigns");
  c_fd->require_subcommand(1);
  FastdupRunOptions fd;
  auto* c_run = c_fd->add_subcommand("run", "run a campaign against a file or simulated oracle");
  c_run->add_option("--embeddings", fd.embeddings)->required()->check(CLI::ExistingFile);
  c_run->add_option("--oracle", fd.oracle, "file:<pairs.csv> | simulate:<world.json>")->required();
  c_run->add_option("--out", fd.out, "output directory")->required();
  c_run->add_option("--max-rounds", fd.max_rounds, "0 = floor(log2 N) + 2")->capture_default_str();
  c_run->add_flag("--resume", fd.resume, "continue from <out>/state.json");
  std::string sv_embeddings, sv_images, sv_state, sv_host = "127.0.0.1";
  int sv_port = 8080;
  std::size_t sv_max_rounds = 0;
  auto* c_serve = c_fd->add_subcommand("serve", "serve a live campaign over HTTP");
  c_serve->add_option("--embeddings", sv_embeddings)->required()->check(CLI::ExistingFile);
  c_serve->add_option("--images", sv_images, "directory of <item_id>.pgm")->check(CLI::ExistingDirectory);
  c_serve->add_option("--port", sv_port, "0 picks a free port")->capture_default_str();
  c_serve->add_option("--host", sv_host)->capture_default_str();
  c_serve->add_option("--state", sv_state, "state directory")->required();
  c_serve->add_option("--max-rounds", sv_max_rounds)->capture_default_str();

  // detect
  auto* c_det = app.add_subcommand("detect", "score items or pairs for one issue type");
  c_det->require_subcommand(1);
  DetectOptions det;
  std::string det_emb, det_img, det_pairs, det_labels, det_probs;
  auto detect_common = [&](CLI::App* c, const std::string& task) {
    c->add_option("--method", det.method)->required();
    c->add_option("--out", det.out, "scores CSV (key,score)")->required();
    c->add_option("--seed", det.seed)->capture_default_str();
    c->final_callback([&det, task] { det.task = task; });
  };
  auto* c_off = c_det->add_subcommand("offtopic", "anomaly scores on embeddings");
  detect_common(c_off, "offtopic");
  c_off->get_option("--method")->check(CLI::IsMember({"knn", "iforest", "hbos", "ecod"}));
  c_off->add_option("--embeddings", det_emb)->required()->check(CLI::ExistingFile);
  c_off->add_option("--k", det.k, "kNN k (default 5)");
  c_off->add_option("--trees", det.trees)->capture_default_str();
  c_off->add_option("--subsample", det.subsample)->capture_default_str();
  c_off->add_option("--bins", det.bins)->capture_default_str();
  auto* c_dup = c_det->add_subcommand("duplicates", "similarity scores for pairs");
  detect_common(c_dup, "duplicates");
  c_dup->get_option("--method")->check(CLI::IsMember({"phash", "ssim", "embed"}));
  c_dup->add_option("--pairs", det_pairs)->required()->check(CLI::ExistingFile);
  c_dup->add_option("--images", det_img)->check(CLI::ExistingDirectory);
  c_dup->add_option("--embeddings", det_emb)->check(CLI::ExistingFile);
  c_dup->add_flag("--sliding", det.sliding, "SSIM over sliding windows");
  auto* c_lab = c_det->add_subcommand("labelerrors", "label-error scores");
  detect_common(c_lab, "labelerrors");
  c_lab->get_option("--method")->check(CLI::IsMember({"cl", "embed"}));
  c_lab->add_option("--labels", det_labels, "item_id,label CSV")->required()->check(CLI::ExistingFile);
  c_lab->add_option("--embeddings", det_emb)->check(CLI::ExistingFile);
  c_lab->add_option("--probs", det_probs, "item_id,<class...> probability CSV")->check(CLI::ExistingFile);
  c_lab->add_option("--k", det.k, "neighbours (default 10)");
  c_lab->add_option("--folds", det.folds)->capture_default_str();

  // eval
  EvalOptions ev;
  std::string ev_ks = "100,500,1000", ev_table;
  auto* c_eval = app.add_subcommand("eval", "ranking metrics for one score file");
  c_eval->add_option("--scores", ev.scores)->required()->check(CLI::ExistingFile);
  c_eval->add_option("--labels", ev.labels)->required()->check(CLI::ExistingFile);
  c_eval->add_option("--ks", ev_ks)->capture_default_str();
  c_eval->add_option("--out", ev.out)->required();
  c_eval->add_option("--table", ev_table);
  c_eval->add_option("--task", ev.task, "task name (default: scores file stem)");

  // agreement
  AgreementOptions ag;
  auto* c_ag = app.add_subcommand("agreement", "Krippendorff alpha and pairwise Cohen kappa");
  c_ag->add_option("--raters", ag.raters, "rater_id,item_id,label CSV")->required()->check(CLI::ExistingFile);
  c_ag->add_option("--bootstrap", ag.bootstrap, "resamples, 0 = no intervals")->capture_default_str();
  c_ag->add_option("--level", ag.level)->capture_default_str();
  c_ag->add_option("--seed", ag.seed)->capture_default_str();
  c_ag->add_option("--out", ag.out)->required();

  // simulate
  auto* c_sim = app.add_subcommand("simulate", "synthetic worlds");
  c_sim->require_subcommand(1);
  SimulateGladOptions sg;
  std::string sg_truth;
  auto* c_sg = c_sim->add_subcommand("glad", "crowd votes from the generative model");
  c_sg->add_option("--a", sg.annotators)->capture_default_str();
  c_sg->add_option("--i", sg.items)->capture_default_str();
  c_sg->add_option("--votes", sg.votes, "votes per item")->capture_default_str();
  c_sg->add_option("--ability-mean", sg.ability_mean)->capture_default_str();
  c_sg->add_option("--ability-sd", sg.ability_sd)->capture_default_str();
  c_sg->add_option("--difficulty", sg.difficulty, "|b|")->capture_default_str();
  c_sg->add_option("--positive-fraction", sg.positive_fraction)->capture_default_str();
  c_sg->add_option("--adversarial", sg.adversarial, "fraction with negated ability")->capture_default_str();
  c_sg->add_flag("--heavy-tail", sg.heavy_tail, "power-law annotator activity");
  c_sg->add_option("--seed", sg.seed)->capture_default_str();
  c_sg->add_option("--out", sg.out, "vote CSV")->required();
  c_sg->add_option("--truth", sg_truth, "item_id,label CSV");
  SimulateCliquesOptions sc;
  std::string sc_truth, sc_world;
  auto* c_sc = c_sim->add_subcommand("cliques", "planted near-duplicate embedding world");
  c_sc->add_option("--n", sc.n)->capture_default_str();
  c_sc->add_option("--dim", sc.dim)->capture_default_str();
  c_sc->add_option("--preset", sc.preset, "table2 | none")
      ->capture_default_str()
      ->check(CLI::IsMember({"table2", "none"}));
  c_sc->add_option("--max-clique", sc.max_clique)->capture_default_str();
  c_sc->add_option("--duplicate-fraction", sc.duplicate_fraction)->capture_default_str();
  c_sc->add_option("--margin", sc.margin)->capture_default_str();
  c_sc->add_option("--seed", sc.seed)->capture_default_str();
  c_sc->add_option("--out", sc.out, "embeddings (.bin binary, else CSV)")->required();
  c_sc->add_option("--truth", sc_truth, "item_id,component_id CSV");
  c_sc->add_option("--world", sc_world, "world JSON for the simulate: oracle");

  // report
  ReportOptions rp;
  std::string rp_ks = "100,500,1000", rp_table;
  auto* c_rep = app.add_subcommand("report", "collate <task>.scores.csv + <task>.labels.csv files");
  c_rep->add_option("--in", rp.in)->required()->check(CLI::ExistingDirectory);
  c_rep->add_option("--ks", rp_ks)->capture_default_str();
  c_rep->add_option("--out", rp.out)->required();
  c_rep->add_option("--table", rp_table);

  std::vector<std::string> args;
  for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    if (argc > 1 && argv[1][0] != '-' && app.get_subcommands().empty()) {
      const auto s = Suggest(app, argv[1]);
      err << "unknown subcommand '" << argv[1] << "'";
      if (!s.empty()) err << "; did you mean '" << s << "'?";
      err << '\n';
    } else if (dynamic_cast<const CLI::ExtrasError*>(&e)) {
      for (int i = 1; i < argc; ++i) {
        const std::string token = argv[i];
        if (!token.starts_with("--")) continue;
        const std::string name = token.substr(0, token.find('='));
        const auto s = Suggest(app, name);
        if (!s.empty() && s != name) err << "did you mean '" << s << "' instead of '" << name << "'?\n";
      }
    }
    return 1;
  }

  auto opt = [](const std::string& s) -> std::optional<std::filesystem::path> {
    if (s.empty()) return std::nullopt;
    return std::filesystem::path(s);
  };
  RunManifest manifest;
  std::filesystem::path manifest_at;
  bool manifest_dir = false;
  std::function<void()> run;
  const CLI::App* chosen = nullptr;

  if (c_agg->parsed()) {
    chosen = c_agg;
    manifest.subcommand = "aggregate";
    manifest.AddInput("votes", agg.votes);
    manifest.seeds["seed"] = agg.seed;
    manifest_at = agg.out;
    run = [&] { RunAggregate(agg); };
  } else if (c_cal->parsed()) {
    chosen = c_cal;
    manifest.subcommand = "calibrate";
    cal.expert = opt(cal_expert);
    cal.sample_out = opt(cal_sample);
    cal.out = opt(cal_out);
    manifest.AddInput("pbar", cal.pbar);
    if (cal.expert) manifest.AddInput("expert", *cal.expert);
    manifest.seeds["seed"] = cal.seed;
    manifest_at = cal.out ? *cal.out : cal.sample_out.value_or("calibration");
    run = [&] { RunCalibrate(cal); };
  } else if (c_run->parsed()) {
    chosen = c_run;
    manifest.subcommand = "fastdup run";
    manifest.AddInput("embeddings", fd.embeddings);
    const auto colon = fd.oracle.find(':');
    if (colon != std::string::npos) manifest.AddInput("oracle", fd.oracle.substr(colon + 1));
    manifest_at = fd.out;
    manifest_dir = true;
    run = [&] {
      const auto r = RunFastdup(fd);
      if (r.awaiting) {
        manifest.status = "awaiting-verdicts";
        out << "awaiting " << r.awaiting_pairs << " verdicts: label the pairs in "
            << (fd.out / "awaiting.csv").string() << ", add them to the oracle file and rerun with --resume\n";
      } else if (!r.complete) {
        manifest.status = "truncated";
        err << "warning: stopped at --max-rounds before the campaign finished\n";
      }
    };
  } else if (c_serve->parsed()) {
    chosen = c_serve;
    manifest.subcommand = "fastdup serve";
    manifest.AddInput("embeddings", sv_embeddings);
    if (!sv_images.empty()) manifest.AddInput("images", sv_images);
    manifest_at = sv_state;
    manifest_dir = true;
    run = [&] {
      std::filesystem::create_directories(sv_state);
      manifest.Write(sv_state, true);
      ServeSession session(io::LoadEmbeddings(sv_embeddings), opt(sv_images), sv_state, sv_max_rounds);
      httplib::Server server;
      MountRoutes(server, session);
      const int port = sv_port == 0 ? server.bind_to_any_port(sv_host) : sv_port;
      if (sv_port != 0) Require(server.bind_to_port(sv_host, sv_port), ErrorKind::kData,
                                "cannot bind " + sv_host + ":" + std::to_string(sv_port));
      Require(port > 0, ErrorKind::kData, "cannot bind a port on " + sv_host);
      out << "serving campaign on http://" << sv_host << ':' << port
          << (session.resumed() ? " (resumed)" : "") << std::endl;
      server.listen_after_bind();
    };
  } else if (c_det->parsed()) {
    for (auto* c : {c_off, c_dup, c_lab})
      if (c->parsed()) chosen = c;
    det.embeddings = opt(det_emb);
    det.images = opt(det_img);
    det.pairs = opt(det_pairs);
    det.labels = opt(det_labels);
    det.probs = opt(det_probs);
    manifest.subcommand = "detect " + det.task;
    for (const auto& [flag, value] : std::map<std::string, std::string>{
             {"embeddings", det_emb}, {"images", det_img}, {"pairs", det_pairs},
             {"labels", det_labels}, {"probs", det_probs}})
      if (!value.empty()) manifest.AddInput(flag, value);
    manifest.seeds["seed"] = det.seed;
    manifest_at = det.out;
    run = [&] { RunDetect(det); };
  } else if (c_eval->parsed()) {
    chosen = c_eval;
    manifest.subcommand = "eval";
    manifest.AddInput("scores", ev.scores);
    manifest.AddInput("labels", ev.labels);
    ev.table = opt(ev_table);
    manifest_at = ev.out;
    run = [&] {
      ev.ks = ParseKs(ev_ks);
      RunEval(ev);
    };
  } else if (c_ag->parsed()) {
    chosen = c_ag;
    manifest.subcommand = "agreement";
    manifest.AddInput("raters", ag.raters);
    manifest.seeds["seed"] = ag.seed;
    manifest_at = ag.out;
    run = [&] { RunAgreement(ag); };
  } else if (c_sg->parsed()) {
    chosen = c_sg;
    manifest.subcommand = "simulate glad";
    sg.truth = opt(sg_truth);
    manifest.seeds["seed"] = sg.seed;
    manifest_at = sg.out;
    run = [&] { RunSimulateGlad(sg); };
  } else if (c_sc->parsed()) {
    chosen = c_sc;
    manifest.subcommand = "simulate cliques";
    sc.truth = opt(sc_truth);
    sc.world = opt(sc_world);
    manifest.seeds["seed"] = sc.seed;
    manifest_at = sc.out;
    run = [&] { RunSimulateCliques(sc); };
  } else if (c_rep->parsed()) {
    chosen = c_rep;
    manifest.subcommand = "report";
    manifest.AddInput("in", rp.in);
    rp.table = opt(rp_table);
    manifest_at = rp.out;
    run = [&] {
      rp.ks = ParseKs(rp_ks);
      RunReport(rp);
    };
  }

  try {
    Require(static_cast<bool>(run), ErrorKind::kUsage, "no command given");
    RecordFlags(*chosen, manifest);
    run();
    manifest.Write(manifest_at, manifest_dir);
    return 0;
  } catch (const CalibrationError& e) {
    err << "error: " << e.what() << "\npositive fraction per bin:";
    for (double f : e.fractions()) err << ' ' << (std::isnan(f) ? std::string("-") : io::FormatDouble(f));
    err << '\n';
    return ExitCodeFor(e.kind());
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return ExitCodeFor(e.kind());
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed JSON input: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace dqaudit::cli
