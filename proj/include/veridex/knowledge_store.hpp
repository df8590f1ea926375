// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0
//
// Debunking knowledge base: fixed-size code point chunks, embedded and kept
// in an exact cosine-similarity store.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "veridex/embedding.hpp"

namespace veridex {

inline constexpr std::uint32_t kStoreFormatVersion = 1;
inline constexpr std::size_t kDefaultChunkSize = 100;

struct KnowledgeChunk {
  std::string chunk_id;  // "<source_id>#<k>"
  std::string source_id;
  std::string text;
  std::vector<double> vector;
};

struct RetrievalResult {
  KnowledgeChunk chunk;
  double score = 0.0;  // cosine; -inf for a zero-norm chunk

  // {"chunk_id", "source_id", "text", "score"}; a -inf score becomes null.
  nlohmann::ordered_json to_json() const;
};

// Number of code points in valid UTF-8; throws DataError otherwise.
std::size_t codepoint_count(std::string_view utf8);

// Consecutive spans of `chunk_size` code points, the last possibly shorter.
// An empty document gives no chunks.
std::vector<std::string> chunk_text(std::string_view doc, std::size_t chunk_size = kDefaultChunkSize);

// chunk_text() with ids "<source_id>#0", "#1", ... and empty vectors.
std::vector<KnowledgeChunk> chunk_document(std::string_view doc, const std::string& source_id,
                                           std::size_t chunk_size = kDefaultChunkSize);

// Many readers or one writer. A search never observes part of a batch.
class VectorStore {
 public:
  explicit VectorStore(std::size_t d);
  VectorStore(VectorStore&& other) noexcept;
  VectorStore& operator=(VectorStore&& other) noexcept;
  VectorStore(const VectorStore&) = delete;
  VectorStore& operator=(const VectorStore&) = delete;

  std::size_t dimension() const noexcept { return d_; }
  std::size_t size() const;
  bool empty() const { return size() == 0; }

  // All-or-nothing: on a duplicate id (against the store or within the
  // batch), a wrong vector length or a non-finite component, nothing is added.
  void add(std::vector<KnowledgeChunk> chunks);

  // Exact linear scan; descending score, ties by insertion order.
  std::vector<RetrievalResult> search(std::span<const double> query, std::size_t top_n = 1) const;

  std::vector<KnowledgeChunk> chunks() const;
  std::vector<double> norms() const;

  void save(const std::filesystem::path& path) const;
  // Throws DataError on bad magic, version, checksum or truncation.
  static VectorStore open(const std::filesystem::path& path);

 private:
  std::size_t d_;
  std::vector<KnowledgeChunk> chunks_;
  std::vector<double> norms_;
  std::unordered_map<std::string, std::size_t> index_;
  mutable std::shared_mutex mutex_;
};

struct KnowledgeDocument {
  std::string source_id;
  std::string text;
};

// JSONL {"source_id": str, "text": str}; errors name the 1-based line.
std::vector<KnowledgeDocument> load_knowledge_documents(const std::filesystem::path& path);
std::vector<KnowledgeDocument> parse_knowledge_documents(std::string_view contents,
                                                         std::string_view source_name = "<memory>");

// Chunks and embeds every document (chunk ids are the embedder keys), then
// adds them as one batch. Returns the number of chunks added.
std::size_t ingest_documents(VectorStore& store, const std::vector<KnowledgeDocument>& docs,
                             const Embedder& embedder, std::size_t chunk_size = kDefaultChunkSize);

}  // namespace veridex
