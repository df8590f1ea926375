// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0

#include "veridex/knowledge_store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "binary_io.hpp"
#include "veridex/errors.hpp"

namespace veridex {

namespace {

constexpr std::string_view kMagic = "VRDXKSTR";

// Byte length of the UTF-8 sequence starting at s[i]; throws on malformed input.
std::size_t sequence_length(std::string_view s, std::size_t i) {
  const auto lead = static_cast<unsigned char>(s[i]);
  std::size_t len = 0;
  std::uint32_t cp = 0;
  if (lead < 0x80) return 1;
  if ((lead & 0xE0) == 0xC0) {
    len = 2;
    cp = lead & 0x1F;
  } else if ((lead & 0xF0) == 0xE0) {
    len = 3;
    cp = lead & 0x0F;
  } else if ((lead & 0xF8) == 0xF0) {
    len = 4;
    cp = lead & 0x07;
  } else {
    throw DataError("invalid UTF-8 lead byte at offset " + std::to_string(i));
  }
  if (i + len > s.size()) throw DataError("truncated UTF-8 sequence at offset " + std::to_string(i));
  for (std::size_t k = 1; k < len; ++k) {
    const auto c = static_cast<unsigned char>(s[i + k]);
    if ((c & 0xC0) != 0x80) throw DataError("invalid UTF-8 continuation at offset " + std::to_string(i + k));
    cp = (cp << 6) | (c & 0x3F);
  }
  static constexpr std::uint32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
  if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
    throw DataError("invalid UTF-8 code point at offset " + std::to_string(i));
  }
  return len;
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

std::size_t codepoint_count(std::string_view utf8) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < utf8.size(); i += sequence_length(utf8, i)) ++n;
  return n;
}

std::vector<std::string> chunk_text(std::string_view doc, std::size_t chunk_size) {
  if (chunk_size == 0) throw ConfigError("chunk_size must be at least 1");
  std::vector<std::string> out;
  std::size_t start = 0, i = 0, count = 0;
  while (i < doc.size()) {
    i += sequence_length(doc, i);
    if (++count == chunk_size) {
      out.emplace_back(doc.substr(start, i - start));
      start = i;
      count = 0;
    }
  }
  if (start < doc.size()) out.emplace_back(doc.substr(start));
  return out;
}

std::vector<KnowledgeChunk> chunk_document(std::string_view doc, const std::string& source_id,
                                           std::size_t chunk_size) {
  std::vector<KnowledgeChunk> out;
  std::size_t k = 0;
  for (auto& text : chunk_text(doc, chunk_size)) {
    out.push_back(KnowledgeChunk{source_id + "#" + std::to_string(k++), source_id, std::move(text), {}});
  }
  return out;
}

nlohmann::ordered_json RetrievalResult::to_json() const {
  nlohmann::ordered_json j;
  j["chunk_id"] = chunk.chunk_id;
  j["source_id"] = chunk.source_id;
  j["text"] = chunk.text;
  if (std::isfinite(score)) {
    j["score"] = score;
  } else {
    j["score"] = nullptr;
  }
  return j;
}

// ---------------------------------------------------------------------------

VectorStore::VectorStore(std::size_t d) : d_(d) {
  if (d == 0) throw ConfigError("vector store dimension must be positive");
}

VectorStore::VectorStore(VectorStore&& other) noexcept {
  std::unique_lock lock(other.mutex_);
  d_ = other.d_;
  chunks_ = std::move(other.chunks_);
  norms_ = std::move(other.norms_);
  index_ = std::move(other.index_);
}

VectorStore& VectorStore::operator=(VectorStore&& other) noexcept {
  if (this != &other) {
    std::scoped_lock lock(mutex_, other.mutex_);
    d_ = other.d_;
    chunks_ = std::move(other.chunks_);
    norms_ = std::move(other.norms_);
    index_ = std::move(other.index_);
  }
  return *this;
}

std::size_t VectorStore::size() const {
  std::shared_lock lock(mutex_);
  return chunks_.size();
}

void VectorStore::add(std::vector<KnowledgeChunk> chunks) {
  std::vector<double> norms;
  norms.reserve(chunks.size());
  for (const auto& c : chunks) {
    if (c.text.empty()) throw DataError("chunk '" + c.chunk_id + "' has empty text");
    if (c.vector.size() != d_) {
      throw DimensionError("chunk '" + c.chunk_id + "' has " + std::to_string(c.vector.size()) +
                           " components, store expects d=" + std::to_string(d_));
    }
    for (double x : c.vector) {
      if (!std::isfinite(x)) throw DataError("chunk '" + c.chunk_id + "' has a non-finite component");
    }
    norms.push_back(l2_norm(c.vector));
  }
  std::unique_lock lock(mutex_);
  std::unordered_set<std::string_view> batch;
  for (const auto& c : chunks) {
    if (index_.count(c.chunk_id) || !batch.insert(c.chunk_id).second) {
      throw DataError("duplicate chunk id '" + c.chunk_id + "'");
    }
  }
  chunks_.reserve(chunks_.size() + chunks.size());
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    index_.emplace(chunks[i].chunk_id, chunks_.size());
    chunks_.push_back(std::move(chunks[i]));
    norms_.push_back(norms[i]);
  }
}

std::vector<RetrievalResult> VectorStore::search(std::span<const double> query, std::size_t top_n) const {
  if (top_n == 0) throw ConfigError("top_n must be at least 1");
  if (query.size() != d_) {
    throw DimensionError("query has " + std::to_string(query.size()) + " components, store expects d=" +
                         std::to_string(d_));
  }
  const double qn = l2_norm(query);
  if (!(qn > 0.0) || !std::isfinite(qn)) throw DataError("query vector has zero or non-finite norm");

  std::shared_lock lock(mutex_);
  if (chunks_.empty()) throw DataError("search on an empty knowledge store");
  std::vector<double> scores(chunks_.size());
  for (std::size_t i = 0; i < chunks_.size(); ++i) {
    if (norms_[i] == 0.0) {
      scores[i] = -std::numeric_limits<double>::infinity();
      continue;
    }
    const auto& v = chunks_[i].vector;
    double dot = 0.0;
    for (std::size_t k = 0; k < d_; ++k) dot += query[k] * v[k];
    scores[i] = std::clamp(dot / (qn * norms_[i]), -1.0, 1.0);
  }
  std::vector<std::size_t> order(chunks_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t n = std::min(top_n, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](std::size_t a, std::size_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); });
  std::vector<RetrievalResult> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(RetrievalResult{chunks_[order[i]], scores[order[i]]});
  return out;
}

std::vector<KnowledgeChunk> VectorStore::chunks() const {
  std::shared_lock lock(mutex_);
  return chunks_;
}

std::vector<double> VectorStore::norms() const {
  std::shared_lock lock(mutex_);
  return norms_;
}

void VectorStore::save(const std::filesystem::path& path) const {
  detail::BinaryWriter out;
  {
    std::shared_lock lock(mutex_);
    out.bytes(kMagic.data(), kMagic.size());
    out.u32(kStoreFormatVersion);
    out.u64(d_);
    out.u64(chunks_.size());
    for (const auto& c : chunks_) {
      out.str(c.chunk_id);
      out.str(c.source_id);
      out.str(c.text);
      out.f64s(c.vector);
    }
  }
  out.finish(path);
}

VectorStore VectorStore::open(const std::filesystem::path& path) {
  detail::BinaryReader in(path, kMagic, "knowledge store");
  const std::uint32_t version = in.u32();
  if (version != kStoreFormatVersion) {
    throw DataError("unsupported knowledge store version " + std::to_string(version) + " in " + path.string());
  }
  const std::uint64_t d = in.u64();
  if (d == 0) throw DataError("knowledge store " + path.string() + " has dimension 0");
  const std::uint64_t count = in.u64();
  std::vector<KnowledgeChunk> chunks;
  for (std::uint64_t i = 0; i < count; ++i) {
    KnowledgeChunk c;
    c.chunk_id = in.str();
    c.source_id = in.str();
    c.text = in.str();
    c.vector = in.f64s(d);
    chunks.push_back(std::move(c));
  }
  if (!in.at_end()) throw DataError("knowledge store " + path.string() + ": trailing bytes");
  VectorStore store(d);
  store.add(std::move(chunks));
  return store;
}

// ---------------------------------------------------------------------------

std::vector<KnowledgeDocument> parse_knowledge_documents(std::string_view contents, std::string_view source_name) {
  std::vector<KnowledgeDocument> docs;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0, start = 0;
  while (start <= contents.size()) {
    std::size_t end = contents.find('\n', start);
    if (end == std::string_view::npos) end = contents.size();
    std::string_view line = contents.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (end == contents.size()) break;
      continue;
    }
    const std::string where = std::string(source_name) + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!j.is_object()) throw DataError(where + ": expected a JSON object");
    for (const char* key : {"source_id", "text"}) {
      if (!j.contains(key) || !j[key].is_string()) throw DataError(where + ": missing string field '" + key + "'");
    }
    KnowledgeDocument doc{j["source_id"].get<std::string>(), j["text"].get<std::string>()};
    if (doc.source_id.empty()) throw DataError(where + ": empty source_id");
    if (!seen.insert(doc.source_id).second) throw DataError(where + ": duplicate source_id '" + doc.source_id + "'");
    docs.push_back(std::move(doc));
    if (end == contents.size()) break;
  }
  return docs;
}

std::vector<KnowledgeDocument> load_knowledge_documents(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open knowledge documents " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_knowledge_documents(ss.str(), path.string());
}

std::size_t ingest_documents(VectorStore& store, const std::vector<KnowledgeDocument>& docs,
                             const Embedder& embedder, std::size_t chunk_size) {
  if (embedder.dimension() != store.dimension()) {
    throw DimensionError("embedder dimension " + std::to_string(embedder.dimension()) +
                         " does not match store dimension " + std::to_string(store.dimension()));
  }
  std::vector<KnowledgeChunk> batch;
  for (const auto& doc : docs) {
    std::vector<KnowledgeChunk> chunks;
    try {
      chunks = chunk_document(doc.text, doc.source_id, chunk_size);
    } catch (const DataError& e) {
      throw DataError("document '" + doc.source_id + "': " + e.what());
    }
    for (auto& c : chunks) {
      c.vector = embedder.embed(c.chunk_id, c.text);
      batch.push_back(std::move(c));
    }
  }
  const std::size_t n = batch.size();
  store.add(std::move(batch));
  return n;
}

}  // namespace veridex
