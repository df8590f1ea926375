// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0

#include "veridex/embedding.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "veridex/checksum.hpp"

namespace veridex {

using nlohmann::json;

EmbedderBackend parse_embedder_backend(std::string_view name) {
  if (name == "file-lookup") return EmbedderBackend::kFileLookup;
  if (name == "deterministic-hash") return EmbedderBackend::kDeterministicHash;
  throw ConfigError("unknown embedder backend '" + std::string(name) +
                    "' (expected file-lookup or deterministic-hash)");
}

std::string_view embedder_backend_name(EmbedderBackend backend) {
  return backend == EmbedderBackend::kFileLookup ? "file-lookup" : "deterministic-hash";
}

// ---------------------------------------------------------------------------

HashEmbedder::HashEmbedder(std::size_t d, std::uint64_t seed) : d_(d), seed_(seed) {
  if (d == 0) throw ConfigError("embedding dimension must be positive");
}

std::vector<double> HashEmbedder::embed(std::string_view /*key*/, std::string_view text) const {
  if (text.empty()) throw DataError("cannot embed empty text");
  std::string salted(8, '\0');
  for (int i = 0; i < 8; ++i) salted[i] = static_cast<char>((seed_ >> (8 * i)) & 0xff);
  salted.append(text);
  const auto digest = sha256(salted);
  std::uint64_t state = 0;
  for (int i = 0; i < 8; ++i) state |= static_cast<std::uint64_t>(digest[i]) << (8 * i);
  // Fold in the rest of the digest so every byte matters.
  for (int w = 1; w < 4; ++w) {
    std::uint64_t word = 0;
    for (int i = 0; i < 8; ++i) word |= static_cast<std::uint64_t>(digest[w * 8 + i]) << (8 * i);
    state = mix_seed(state ^ word);
  }
  std::vector<double> v(d_);
  double norm2 = 0.0;
  for (std::size_t i = 0; i < d_; ++i) {
    state += 0x9e3779b97f4a7c15ULL;
    const std::uint64_t bits = mix_seed(state);
    v[i] = static_cast<double>(bits >> 11) * 0x1.0p-52 - 1.0;
    norm2 += v[i] * v[i];
  }
  if (norm2 == 0.0) v[0] = norm2 = 1.0;
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
  return v;
}

// ---------------------------------------------------------------------------

void EmbeddingTable::add(std::string id, std::vector<double> vector) {
  if (vector.size() != d) {
    throw DimensionError("embedding '" + id + "' has " + std::to_string(vector.size()) +
                         " components, table dimension is " + std::to_string(d));
  }
  for (double x : vector) {
    if (!std::isfinite(x)) throw DataError("embedding '" + id + "' has a non-finite component");
  }
  if (index.contains(id)) throw DataError("duplicate embedding id '" + id + "'");
  index.emplace(id, ids.size());
  ids.push_back(std::move(id));
  vectors.push_back(std::move(vector));
}

const std::vector<double>* EmbeddingTable::find(std::string_view id) const {
  auto it = index.find(std::string(id));
  return it == index.end() ? nullptr : &vectors[it->second];
}

EmbeddingTable load_embedding_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding table " + path.string());
  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  std::size_t expected = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where + "malformed JSON (" + e.what() + ")");
    }
    try {
      if (!have_header) {
        table.d = j.at("d").get<std::size_t>();
        expected = j.at("count").get<std::size_t>();
        if (table.d == 0) throw DataError(where + "dimension must be positive");
        have_header = true;
        continue;
      }
      table.add(j.at("id").get<std::string>(), j.at("vector").get<std::vector<double>>());
    } catch (const json::exception& e) {
      throw DataError(where + e.what());
    } catch (const Error& e) {
      throw DataError(where + e.what());
    }
  }
  if (!have_header) throw DataError("embedding table " + path.string() + " has no header line");
  if (table.ids.size() != expected) {
    throw DataError("embedding table " + path.string() + " declares " + std::to_string(expected) +
                    " records but holds " + std::to_string(table.ids.size()));
  }
  return table;
}

void write_embedding_table(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << json{{"d", table.d}, {"count", table.ids.size()}}.dump() << '\n';
  for (std::size_t i = 0; i < table.ids.size(); ++i) {
    out << json{{"id", table.ids[i]}, {"vector", table.vectors[i]}}.dump() << '\n';
  }
}

FileLookupEmbedder::FileLookupEmbedder(EmbeddingTable table) : table_(std::move(table)) {}

FileLookupEmbedder FileLookupEmbedder::open(const std::filesystem::path& path) {
  return FileLookupEmbedder(load_embedding_table(path));
}

std::vector<double> FileLookupEmbedder::embed(std::string_view key, std::string_view text) const {
  if (text.empty()) throw DataError("cannot embed empty text (id '" + std::string(key) + "')");
  const std::vector<double>* v = table_.find(key);
  if (!v) throw DataError("embedding not found for id '" + std::string(key) + "'");
  return *v;
}

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& cfg) {
  if (cfg.backend == EmbedderBackend::kDeterministicHash) {
    return std::make_unique<HashEmbedder>(cfg.d, cfg.seed);
  }
  auto embedder = std::make_unique<FileLookupEmbedder>(FileLookupEmbedder::open(cfg.source));
  if (embedder->dimension() != cfg.d) {
    throw ConfigError("embedding table " + cfg.source.string() + " has d=" +
                      std::to_string(embedder->dimension()) + " but configuration expects d=" +
                      std::to_string(cfg.d));
  }
  return embedder;
}

std::vector<double> embed_text(std::string_view text, const EmbedderConfig& cfg, std::string_view key) {
  if (text.empty()) throw DataError("cannot embed empty text");
  return make_embedder(cfg)->embed(key.empty() ? text : key, text);
}

// ---------------------------------------------------------------------------

std::vector<ClaimRecord> parse_dataset(std::string_view contents, std::size_t num_classes,
                                       std::string_view source_name) {
  std::vector<ClaimRecord> records;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= contents.size()) {
    std::size_t end = contents.find('\n', start);
    if (end == std::string_view::npos) end = contents.size();
    std::string_view line = contents.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      if (end == contents.size()) break;
      continue;
    }
    const std::string where = std::string(source_name) + ":" + std::to_string(line_no) + ": ";
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where + "malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object()) throw DataError(where + "expected a JSON object");
    for (const char* field : {"id", "text", "label", "domain"}) {
      if (!j.contains(field)) throw DataError(where + "missing field \"" + field + "\"");
    }
    ClaimRecord rec;
    if (!j["id"].is_string() || !j["text"].is_string() || !j["domain"].is_string()) {
      throw DataError(where + "fields id, text and domain must be strings");
    }
    rec.id = j["id"].get<std::string>();
    rec.text = j["text"].get<std::string>();
    rec.domain = j["domain"].get<std::string>();
    if (!j["label"].is_number_integer()) throw DataError(where + "label must be an integer");
    const auto label = j["label"].get<long long>();
    if (label < 0 || static_cast<std::size_t>(label) >= num_classes) {
      throw DataError(where + "unknown label " + std::to_string(label) + " (expected 0.." +
                      std::to_string(num_classes - 1) + ")");
    }
    rec.label = static_cast<std::size_t>(label);
    if (rec.text.empty()) throw DataError(where + "empty text");
    if (j.contains("evidence")) {
      if (!j["evidence"].is_array()) throw DataError(where + "evidence must be an array of strings");
      for (const auto& e : j["evidence"]) {
        if (!e.is_string()) throw DataError(where + "evidence must be an array of strings");
        rec.evidence.push_back(e.get<std::string>());
      }
    }
    if (!seen.insert(rec.id).second) throw DataError(where + "duplicate id '" + rec.id + "'");
    records.push_back(std::move(rec));
    if (end == contents.size()) break;
  }
  return records;
}

std::vector<ClaimRecord> load_dataset(const std::filesystem::path& path, std::size_t num_classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), num_classes, path.string());
}

void write_dataset(const std::vector<ClaimRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : records) {
    json j{{"id", r.id}, {"text", r.text}, {"label", r.label}, {"domain", r.domain}};
    if (!r.evidence.empty()) j["evidence"] = r.evidence;
    out << j.dump() << '\n';
  }
}

std::map<std::string, std::size_t> domain_counts(const std::vector<ClaimRecord>& records) {
  std::map<std::string, std::size_t> counts;
  for (const auto& r : records) ++counts[r.domain];
  return counts;
}

std::vector<EmbeddedClaim> embed_dataset(const std::vector<ClaimRecord>& records, const Embedder& embedder) {
  std::vector<EmbeddedClaim> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back(EmbeddedClaim{r, embedder.embed(r.id, r.text)});
  }
  return out;
}

}  // namespace veridex
