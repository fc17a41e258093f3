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

// Serve mode: a live near-duplicate campaign behind a small HTTP JSON API.
// One mutex serializes verdicts and gives reads a consistent snapshot; the
// campaign is written to disk after every accepted verdict.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "dqaudit/core/error.hpp"
#include "dqaudit/core/io.hpp"
#include "dqaudit/core/types.hpp"
#include "dqaudit/fastdup/campaign.hpp"
#include "dqaudit/fastdup/distance.hpp"

namespace dqaudit::cli {

inline constexpr std::size_t kMaxImageBytes = 2u << 20;

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

class ServeSession {
 public:
  using Clock = std::chrono::steady_clock;

  // Resumes from `state_dir/state.json` when present.
  ServeSession(EmbeddingMatrix embeddings, std::optional<std::filesystem::path> images,
               std::filesystem::path state_dir, std::size_t max_rounds = 0,
               Clock::duration lease = std::chrono::seconds(60))
      : embeddings_(std::move(embeddings)),
        distance_(std::make_unique<fastdup::EuclideanDistance>(embeddings_)),
        images_(std::move(images)),
        state_dir_(std::move(state_dir)),
        lease_(lease) {
    std::filesystem::create_directories(state_dir_);
    if (std::filesystem::exists(StatePath())) {
      campaign_.emplace(fastdup::Campaign::FromJson(io::ReadJson(StatePath()), *distance_));
      resumed_ = true;
    } else {
      campaign_.emplace(*distance_, max_rounds);
    }
    for (const auto& round : campaign_->verdict_history())
      for (const auto& v : round) answered_.insert(v.key());
    for (const auto& p : campaign_->plan().pairs)
      if (campaign_->Answered(p.key())) answered_.insert(p.key());
    Persist();
  }

  std::filesystem::path StatePath() const { return state_dir_ / "state.json"; }
  bool resumed() const { return resumed_; }

  nlohmann::json State() const {
    std::lock_guard lock(mu_);
    return StateLocked();
  }

  nlohmann::json Next() {
    std::lock_guard lock(mu_);
    if (campaign_->done())
      return {{"done", true},
              {"complete", campaign_->complete()},
              {"components_found", ComponentsFound()}};
    const auto pending = campaign_->Pending();
    const auto now = Clock::now();
    // Hand out a pair nobody holds a live lease on, else the stalest lease.
    const PairRecord* pick = nullptr;
    Clock::time_point oldest = Clock::time_point::max();
    for (const auto& p : pending) {
      auto it = leases_.find(p.key());
      if (it == leases_.end() || now - it->second >= lease_) {
        pick = &p;
        break;
      }
      if (it->second < oldest) {
        oldest = it->second;
        pick = &p;
      }
    }
    leases_[pick->key()] = now;
    return {{"pair_id", pick->key()},
            {"item_a", pick->item_a},
            {"item_b", pick->item_b},
            {"round", campaign_->round()},
            {"image_a", "/api/image/" + pick->item_a},
            {"image_b", "/api/image/" + pick->item_b}};
  }

  ApiResponse Verdict(const std::string& body) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
      return {400, {{"accepted", false}, {"error", "body is not JSON"}}};
    }
    if (!j.is_object() || !j.contains("pair_id") || !j["pair_id"].is_string() ||
        !j.contains("label") || !j["label"].is_number_integer())
      return {400, {{"accepted", false}, {"error", "expected {pair_id: string, label: 0|1}"}}};
    const int label = j["label"].get<int>();
    if (label != 0 && label != 1)
      return {400, {{"accepted", false}, {"error", "label must be 0 or 1"}}};
    const auto id = j["pair_id"].get<std::string>();
    const auto bar = id.find('|');
    if (bar == std::string::npos || bar == 0 || bar + 1 == id.size() ||
        id.substr(0, bar) == id.substr(bar + 1))
      return {400, {{"accepted", false}, {"error", "pair_id must be 'item_a|item_b'"}}};
    const PairRecord pair(id.substr(0, bar), id.substr(bar + 1), label);

    std::lock_guard lock(mu_);
    if (answered_.count(pair.key()))
      return {200, {{"accepted", true}, {"duplicate", true}}};
    if (campaign_->done())
      return {409, {{"accepted", false}, {"error", "campaign is finished"}}};
    if (!campaign_->InCurrentPlan(pair.key()))
      return {409, {{"accepted", false},
                    {"error", "pair '" + pair.key() + "' is not pending in this round"}}};
    campaign_->Submit(pair);
    answered_.insert(pair.key());
    leases_.erase(pair.key());
    Persist();
    return {200, {{"accepted", true}, {"duplicate", false}, {"round", campaign_->round()}}};
  }

  nlohmann::json Components() const {
    std::lock_guard lock(mu_);
    const auto& forest = campaign_->forest();
    nlohmann::json partition = nlohmann::json::object();
    const auto labels = forest.Labels();
    for (std::size_t i = 0; i < labels.size(); ++i) partition[distance_->id(i)] = labels[i];
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& members : forest.Components()) {
      if (members.size() < 2) continue;
      nlohmann::json g = nlohmann::json::array();
      for (auto m : members) g.push_back(distance_->id(m));
      groups.push_back(std::move(g));
    }
    return {{"partition", partition},
            {"components", groups},
            {"done", campaign_->done()},
            {"complete", campaign_->complete()},
            {"ledger", campaign_->ledger().ToJson()}};
  }

  // PGM bytes for a known item, or an error status.
  std::pair<int, std::string> Image(const std::string& item_id) const {
    if (!images_) return {404, "no image directory configured"};
    if (!embeddings_.IndexOf(item_id)) return {404, "unknown item"};
    const auto path = *images_ / (item_id + ".pgm");
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) return {404, "no image for item"};
    if (size > kMaxImageBytes) return {413, "image exceeds 2 MB"};
    auto in = io::OpenForRead(path, /*binary=*/true);
    std::string bytes(size, '\0');
    in.read(bytes.data(), static_cast<std::streamsize>(size));
    return {200, bytes};
  }

  // Copy of the campaign for callers that need library-level access.
  fastdup::Campaign Snapshot() const {
    std::lock_guard lock(mu_);
    return *campaign_;
  }

 private:
  std::size_t ComponentsFound() const {
    return fastdup::ComponentStats(campaign_->forest()).components();
  }

  nlohmann::json StateLocked() const {
    const std::size_t pending = campaign_->Pending().size();
    const std::size_t answered_this_round = campaign_->done() ? 0 : campaign_->plan().pairs.size() - pending;
    return {{"round", campaign_->round()},
            {"pairs_pending", pending},
            {"annotations_used", campaign_->ledger().annotations_used + answered_this_round},
            {"budget_bound", campaign_->budget_bound()},
            {"components_found", ComponentsFound()},
            {"done", campaign_->done()},
            {"complete", campaign_->complete()},
            {"truncated", campaign_->truncated()}};
  }

  // Write-then-rename so a crash never leaves a torn state file.
  void Persist() const {
    const auto tmp = state_dir_ / "state.json.tmp";
    io::WriteJson(tmp, campaign_->ToJson());
    std::filesystem::rename(tmp, StatePath());
  }

  EmbeddingMatrix embeddings_;
  std::unique_ptr<fastdup::EuclideanDistance> distance_;
  std::optional<std::filesystem::path> images_;
  std::filesystem::path state_dir_;
  Clock::duration lease_;
  mutable std::mutex mu_;
  std::optional<fastdup::Campaign> campaign_;
  std::unordered_set<std::string> answered_;
  std::map<std::string, Clock::time_point> leases_;
  bool resumed_ = false;
};

inline void MountRoutes(httplib::Server& server, ServeSession& session) {
  auto send = [](httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  server.Get("/api/state", [&session, send](const httplib::Request&, httplib::Response& res) {
    send(res, 200, session.State());
  });
  server.Get("/api/next", [&session, send](const httplib::Request&, httplib::Response& res) {
    send(res, 200, session.Next());
  });
  server.Post("/api/verdict", [&session, send](const httplib::Request& req, httplib::Response& res) {
    try {
      const auto r = session.Verdict(req.body);
      send(res, r.status, r.body);
    } catch (const Error& e) {
      send(res, 400, {{"accepted", false}, {"error", e.what()}});
    }
  });
  server.Get("/api/components", [&session, send](const httplib::Request&, httplib::Response& res) {
    send(res, 200, session.Components());
  });
  server.Get(R"(/api/image/([^/]+))", [&session, send](const httplib::Request& req,
                                                        httplib::Response& res) {
    const auto [status, bytes] = session.Image(req.matches[1].str());
    if (status != 200) return send(res, status, {{"error", bytes}});
    res.status = 200;
    res.set_content(bytes, "image/x-portable-graymap");
  });
}

}  // namespace dqaudit::cli
