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

// Run manifests: what was invoked, with which flags and seeds, on which input
// bytes. Directory outputs get `manifest.json`; file outputs get a
// `<file>.manifest.json` sidecar.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "dqaudit/core/error.hpp"
#include "dqaudit/core/io.hpp"

namespace dqaudit::cli {

inline constexpr const char* kToolVersion = "0.1.0";

inline std::string HexDigest(const unsigned char* bytes, unsigned int len) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[bytes[i] >> 4];
    out += kHex[bytes[i] & 15];
  }
  return out;
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
    Require(ctx_ && EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) == 1,
            ErrorKind::kData, "SHA-256 unavailable");
  }
  void Update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_.get(), data, n); }
  void Update(const std::string& s) { Update(s.data(), s.size()); }
  std::string Hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), md, &len);
    return HexDigest(md, len);
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

inline std::string Sha256File(const std::filesystem::path& path) {
  auto in = io::OpenForRead(path, /*binary=*/true);
  Sha256 h;
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    h.Update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.Hex();
}

// Digest over (relative name, file digest) of every regular file, sorted.
inline std::string Sha256Directory(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  Sha256 h;
  for (const auto& f : files) {
    h.Update(std::filesystem::relative(f, dir).generic_string());
    h.Update("\n");
    h.Update(Sha256File(f));
    h.Update("\n");
  }
  return h.Hex();
}

inline std::string UtcNow() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunManifest {
  std::string subcommand;
  std::map<std::string, std::string> flags;
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, std::string> input_digests;  // flag -> sha256
  std::string started_at = UtcNow();
  std::string finished_at;
  std::string status = "ok";

  // Records a digest when `value` names an existing file or directory.
  void AddInput(const std::string& flag, const std::filesystem::path& value) {
    if (std::filesystem::is_regular_file(value))
      input_digests[flag] = Sha256File(value);
    else if (std::filesystem::is_directory(value))
      input_digests[flag] = Sha256Directory(value);
  }

  nlohmann::json ToJson() const {
    return {{"tool", "dqaudit"},
            {"tool_version", kToolVersion},
            {"subcommand", subcommand},
            {"flags", flags},
            {"seeds", seeds},
            {"input_sha256", input_digests},
            {"status", status},
            {"started_at", started_at},
            {"finished_at", finished_at}};
  }

  static std::filesystem::path PathFor(const std::filesystem::path& out, bool is_directory) {
    if (is_directory) return out / "manifest.json";
    return std::filesystem::path(out.string() + ".manifest.json");
  }

  void Write(const std::filesystem::path& out, bool is_directory) {
    finished_at = UtcNow();
    io::WriteJson(PathFor(out, is_directory), ToJson());
  }
};

}  // namespace dqaudit::cli
