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

#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "dqaudit/core/error.hpp"
#include "dqaudit/core/types.hpp"

namespace dqaudit::io {

inline constexpr std::string_view kEmbeddingMagic = "CPEMB01\n";

// ---------------------------------------------------------------------------
// Number formatting and parsing. Shortest round-trip representations.

inline std::string FormatDouble(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

inline std::string FormatFloat(float v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

template <typename T>
bool ParseNumber(std::string_view text, T& out) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t'))
    text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t'))
    text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

// ---------------------------------------------------------------------------
// CSV

// Splits one CSV record. Double-quoted fields may contain commas and "".
inline std::vector<std::string> SplitCsvLine(std::string_view line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          field.push_back('"');
          ++k;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

inline std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

struct CsvRow {
  std::size_t line;
  std::vector<std::string> fields;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<CsvRow> rows;
};

inline std::ifstream OpenForRead(const std::filesystem::path& path,
                                 bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  Require(static_cast<bool>(in), ErrorKind::kData,
          "cannot open '" + path.string() + "'");
  return in;
}

inline std::ofstream OpenForWrite(const std::filesystem::path& path,
                                  bool binary = false) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc
                                 : std::ios::out | std::ios::trunc);
  Require(static_cast<bool>(out), ErrorKind::kData,
          "cannot open '" + path.string() + "' for writing");
  return out;
}

inline CsvTable ReadCsv(std::istream& in) {
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (line.empty()) continue;
    auto fields = SplitCsvLine(line);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
    } else {
      table.rows.push_back({line_no, std::move(fields)});
    }
  }
  if (!have_header) throw ParseError(1, "missing CSV header");
  return table;
}

inline CsvTable ReadCsv(const std::filesystem::path& path) {
  auto in = OpenForRead(path);
  return ReadCsv(in);
}

inline void ExpectHeader(const CsvTable& table,
                         const std::vector<std::string>& expected) {
  if (table.header != expected) {
    std::string want;
    for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
    throw ParseError(1, "expected header '" + want + "'");
  }
}

inline int ParseBinaryField(const CsvRow& row, std::size_t col,
                            const char* what) {
  const std::string& f = row.fields[col];
  if (f == "0") return 0;
  if (f == "1") return 1;
  throw ParseError(row.line, std::string(what) + " must be 0 or 1, got '" +
                                 f + "'");
}

// ---------------------------------------------------------------------------
// Votes: annotator_id,item_id,vote

inline VoteTable ReadVotes(std::istream& in,
                           DedupPolicy policy = DedupPolicy::kKeepLast) {
  const CsvTable table = ReadCsv(in);
  ExpectHeader(table, {"annotator_id", "item_id", "vote"});
  std::vector<VoteRecord> records;
  std::vector<std::size_t> lines;
  records.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    if (row.fields.size() != 3)
      throw ParseError(row.line, "expected 3 fields, got " +
                                     std::to_string(row.fields.size()));
    if (row.fields[0].empty() || row.fields[1].empty())
      throw ParseError(row.line, "empty annotator or item id");
    records.push_back(
        {row.fields[0], row.fields[1], ParseBinaryField(row, 2, "vote")});
    lines.push_back(row.line);
  }
  return VoteTable::Build(records, policy, &lines);
}

inline VoteTable LoadVotes(const std::filesystem::path& path,
                           DedupPolicy policy = DedupPolicy::kKeepLast) {
  auto in = OpenForRead(path);
  return ReadVotes(in, policy);
}

inline void SaveVotes(const std::filesystem::path& path,
                      const VoteTable& votes) {
  auto out = OpenForWrite(path);
  out << "annotator_id,item_id,vote\n";
  for (const auto& r : votes.records())
    out << CsvField(r.annotator_id) << ',' << CsvField(r.item_id) << ','
        << r.vote << '\n';
}

// ---------------------------------------------------------------------------
// Pairs: item_a,item_b,label (label may be empty)

inline std::vector<PairRecord> LoadPairs(const std::filesystem::path& path) {
  const CsvTable table = ReadCsv(path);
  ExpectHeader(table, {"item_a", "item_b", "label"});
  std::vector<PairRecord> pairs;
  for (const auto& row : table.rows) {
    if (row.fields.size() != 3)
      throw ParseError(row.line, "expected 3 fields");
    std::optional<int> label;
    if (!row.fields[2].empty()) label = ParseBinaryField(row, 2, "label");
    if (row.fields[0].empty() || row.fields[1].empty() ||
        row.fields[0] == row.fields[1])
      throw ParseError(row.line, "invalid pair endpoints");
    pairs.emplace_back(row.fields[0], row.fields[1], label);
  }
  return pairs;
}

inline void SavePairs(const std::filesystem::path& path,
                      const std::vector<PairRecord>& pairs) {
  auto out = OpenForWrite(path);
  out << "item_a,item_b,label\n";
  for (const auto& p : pairs) {
    out << CsvField(p.item_a) << ',' << CsvField(p.item_b) << ',';
    if (p.label) out << *p.label;
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Embeddings: CSV (item_id,f0,...) or binary (magic, JSON sidecar, ids, f32)

inline EmbeddingMatrix ReadEmbeddingsCsv(std::istream& in) {
  const CsvTable table = ReadCsv(in);
  Require(table.header.size() >= 2 && table.header[0] == "item_id",
          ErrorKind::kFormat, "embedding CSV header must be item_id,f0,...");
  const std::size_t dim = table.header.size() - 1;
  std::vector<std::string> ids;
  std::vector<double> values;
  ids.reserve(table.rows.size());
  values.reserve(table.rows.size() * dim);
  for (const auto& row : table.rows) {
    if (row.fields.size() != dim + 1)
      throw ParseError(row.line, "expected " + std::to_string(dim + 1) +
                                     " fields, got " +
                                     std::to_string(row.fields.size()));
    ids.push_back(row.fields[0]);
    for (std::size_t k = 1; k <= dim; ++k) {
      float v = 0.0f;
      if (!ParseNumber(row.fields[k], v))
        throw ParseError(row.line, "bad number '" + row.fields[k] + "'");
      if (!std::isfinite(v))
        throw Error(ErrorKind::kData, "non-finite value on line " +
                                          std::to_string(row.line));
      values.push_back(v);
    }
  }
  return EmbeddingMatrix(std::move(ids), dim, std::move(values));
}

inline EmbeddingMatrix ReadEmbeddingsBinary(std::istream& in) {
  std::string magic(kEmbeddingMagic.size(), '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  Require(in && magic == kEmbeddingMagic, ErrorKind::kFormat,
          "bad embedding magic");
  std::string sidecar;
  Require(static_cast<bool>(std::getline(in, sidecar)), ErrorKind::kFormat,
          "missing embedding header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(sidecar);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("bad embedding header: ") + e.what());
  }
  Require(header.contains("n") && header.contains("d") &&
              header.contains("ids_bytes"),
          ErrorKind::kFormat, "embedding header needs n, d and ids_bytes");
  const auto n = header["n"].get<std::size_t>();
  const auto d = header["d"].get<std::size_t>();
  const auto ids_bytes = header["ids_bytes"].get<std::size_t>();
  Require(d > 0, ErrorKind::kFormat, "embedding dimension must be positive");

  std::string id_block(ids_bytes, '\0');
  in.read(id_block.data(), static_cast<std::streamsize>(ids_bytes));
  Require(static_cast<std::size_t>(in.gcount()) == ids_bytes,
          ErrorKind::kFormat, "truncated id block");
  std::vector<std::string> ids;
  std::size_t start = 0;
  while (start < id_block.size()) {
    const std::size_t nl = id_block.find('\n', start);
    Require(nl != std::string::npos, ErrorKind::kFormat,
            "id block must end with a newline");
    ids.push_back(id_block.substr(start, nl - start));
    start = nl + 1;
  }
  Require(ids.size() == n, ErrorKind::kFormat,
          "id block holds " + std::to_string(ids.size()) + " ids, header says " +
              std::to_string(n));

  const std::size_t count = n * d;
  std::vector<unsigned char> raw(count * 4);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  Require(static_cast<std::size_t>(in.gcount()) == raw.size(),
          ErrorKind::kFormat,
          "payload length mismatch: expected " + std::to_string(raw.size()) +
              " bytes");
  in.peek();
  Require(in.eof(), ErrorKind::kFormat, "trailing bytes after payload");

  std::vector<double> values(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::uint32_t bits = static_cast<std::uint32_t>(raw[4 * k]) |
                         static_cast<std::uint32_t>(raw[4 * k + 1]) << 8 |
                         static_cast<std::uint32_t>(raw[4 * k + 2]) << 16 |
                         static_cast<std::uint32_t>(raw[4 * k + 3]) << 24;
    const float v = std::bit_cast<float>(bits);
    Require(std::isfinite(v), ErrorKind::kData,
            "non-finite value in row " + std::to_string(k / d));
    values[k] = v;
  }
  return EmbeddingMatrix(std::move(ids), d, std::move(values));
}

inline EmbeddingMatrix LoadEmbeddings(const std::filesystem::path& path) {
  auto in = OpenForRead(path, /*binary=*/true);
  std::string head(kEmbeddingMagic.size(), '\0');
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  const bool is_binary = in.gcount() == static_cast<std::streamsize>(head.size()) &&
                         head == kEmbeddingMagic;
  in.clear();
  in.seekg(0);
  return is_binary ? ReadEmbeddingsBinary(in) : ReadEmbeddingsCsv(in);
}

inline void SaveEmbeddingsCsv(const std::filesystem::path& path,
                              const EmbeddingMatrix& m) {
  auto out = OpenForWrite(path);
  out << "item_id";
  for (std::size_t k = 0; k < m.dim(); ++k) out << ",f" << k;
  out << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out << CsvField(m.ids()[r]);
    for (double v : m.row(r)) out << ',' << FormatFloat(static_cast<float>(v));
    out << '\n';
  }
}

inline void SaveEmbeddingsBinary(const std::filesystem::path& path,
                                 const EmbeddingMatrix& m) {
  std::string id_block;
  for (const auto& id : m.ids()) {
    Require(id.find('\n') == std::string::npos, ErrorKind::kData,
            "item id contains a newline");
    id_block += id;
    id_block += '\n';
  }
  nlohmann::json header = {
      {"n", m.rows()}, {"d", m.dim()}, {"ids_bytes", id_block.size()}};
  auto out = OpenForWrite(path, /*binary=*/true);
  out << kEmbeddingMagic << header.dump() << '\n' << id_block;
  for (double v : m.values()) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    const char bytes[4] = {static_cast<char>(bits & 0xff),
                           static_cast<char>((bits >> 8) & 0xff),
                           static_cast<char>((bits >> 16) & 0xff),
                           static_cast<char>((bits >> 24) & 0xff)};
    out.write(bytes, 4);
  }
}

// Binary when the extension is .bin, CSV otherwise.
inline void SaveEmbeddings(const std::filesystem::path& path,
                           const EmbeddingMatrix& m) {
  if (path.extension() == ".bin")
    SaveEmbeddingsBinary(path, m);
  else
    SaveEmbeddingsCsv(path, m);
}

// ---------------------------------------------------------------------------
// PGM (P5, maxval 255)

inline GrayImage ReadPgm(std::istream& in) {
  auto next_token = [&in]() {
    std::string tok;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string ignored;
        std::getline(in, ignored);
        if (!tok.empty()) break;
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(c);
    }
    return tok;
  };
  Require(next_token() == "P5", ErrorKind::kFormat, "only P5 PGM is supported");
  std::size_t w = 0, h = 0;
  int maxval = 0;
  Require(ParseNumber(next_token(), w) && ParseNumber(next_token(), h) &&
              ParseNumber(next_token(), maxval),
          ErrorKind::kFormat, "bad PGM header");
  Require(maxval == 255, ErrorKind::kFormat, "PGM maxval must be 255");
  Require(w > 0 && h > 0, ErrorKind::kFormat, "PGM dimensions must be positive");
  std::vector<std::uint8_t> px(w * h);
  in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
  Require(static_cast<std::size_t>(in.gcount()) == px.size(), ErrorKind::kFormat,
          "truncated PGM payload");
  return GrayImage(w, h, std::move(px));
}

inline GrayImage LoadPgm(const std::filesystem::path& path) {
  auto in = OpenForRead(path, /*binary=*/true);
  return ReadPgm(in);
}

inline std::string EncodePgm(const GrayImage& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " +
                    std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  return out;
}

inline void SavePgm(const std::filesystem::path& path, const GrayImage& img) {
  auto out = OpenForWrite(path, /*binary=*/true);
  out << EncodePgm(img);
}

// ---------------------------------------------------------------------------
// Scores (key,score) and labels (key,label). Pair keys are canonicalized.

inline std::string CanonicalKey(const std::string& key) {
  const auto bar = key.find('|');
  if (bar == std::string::npos) return key;
  return PairKey(key.substr(0, bar), key.substr(bar + 1));
}

struct KeyedValue {
  std::string key;
  double value;
};

inline std::vector<KeyedValue> LoadScores(const std::filesystem::path& path) {
  const CsvTable table = ReadCsv(path);
  ExpectHeader(table, {"key", "score"});
  std::vector<KeyedValue> out;
  for (const auto& row : table.rows) {
    if (row.fields.size() != 2) throw ParseError(row.line, "expected 2 fields");
    double v = 0.0;
    if (!ParseNumber(row.fields[1], v) || !std::isfinite(v))
      throw ParseError(row.line, "bad score '" + row.fields[1] + "'");
    out.push_back({CanonicalKey(row.fields[0]), v});
  }
  return out;
}

inline void SaveScores(const std::filesystem::path& path,
                       const std::vector<std::string>& keys,
                       const std::vector<double>& scores) {
  Require(keys.size() == scores.size(), ErrorKind::kContract,
          "keys and scores differ in length");
  auto out = OpenForWrite(path);
  out << "key,score\n";
  for (std::size_t i = 0; i < keys.size(); ++i)
    out << CsvField(keys[i]) << ',' << FormatDouble(scores[i]) << '\n';
}

// Binary labels keyed by item or pair key. Accepts header key,label or
// item_id,label.
inline std::map<std::string, int> LoadBinaryLabels(
    const std::filesystem::path& path) {
  const CsvTable table = ReadCsv(path);
  Require(table.header.size() == 2 && table.header[1] == "label",
          ErrorKind::kFormat, "label CSV header must be key,label");
  std::map<std::string, int> out;
  for (const auto& row : table.rows) {
    if (row.fields.size() != 2) throw ParseError(row.line, "expected 2 fields");
    const int label = ParseBinaryField(row, 1, "label");
    if (!out.emplace(CanonicalKey(row.fields[0]), label).second)
      throw ParseError(row.line, "duplicate key '" + row.fields[0] + "'");
  }
  return out;
}

// Class labels (arbitrary strings) per item: item_id,label.
inline std::map<std::string, std::string> LoadClassLabels(
    const std::filesystem::path& path) {
  const CsvTable table = ReadCsv(path);
  Require(table.header.size() == 2, ErrorKind::kFormat,
          "class label CSV must have two columns");
  std::map<std::string, std::string> out;
  for (const auto& row : table.rows) {
    if (row.fields.size() != 2) throw ParseError(row.line, "expected 2 fields");
    if (!out.emplace(row.fields[0], row.fields[1]).second)
      throw ParseError(row.line, "duplicate item '" + row.fields[0] + "'");
  }
  return out;
}

inline void WriteJson(const std::filesystem::path& path,
                      const nlohmann::json& j) {
  auto out = OpenForWrite(path);
  out << j.dump(2) << '\n';
}

inline nlohmann::json ReadJson(const std::filesystem::path& path) {
  auto in = OpenForRead(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat,
                "bad JSON in '" + path.string() + "': " + e.what());
  }
}

}  // namespace dqaudit::io
