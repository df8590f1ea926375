// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0
//
// Claim datasets and the text -> vector step that feeds the classifier and
// the knowledge store.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "veridex/errors.hpp"
#include "veridex/random.hpp"

namespace veridex {

struct ClaimRecord {
  std::string id;
  std::string text;
  std::size_t label = 0;
  std::string domain;
  std::vector<std::string> evidence;
};

struct EmbeddedClaim {
  ClaimRecord record;
  std::vector<double> vector;
};

enum class EmbedderBackend { kFileLookup, kDeterministicHash };

struct EmbedderConfig {
  EmbedderBackend backend = EmbedderBackend::kDeterministicHash;
  std::size_t d = 768;
  // Embedding table for the file-lookup backend.
  std::filesystem::path source;
  // Salt for the deterministic-hash backend.
  std::uint64_t seed = 0;
};

EmbedderBackend parse_embedder_backend(std::string_view name);
std::string_view embedder_backend_name(EmbedderBackend backend);

// Read-only after construction; safe to share across threads.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dimension() const = 0;
  // `key` identifies the text for table-backed embedders (record id, chunk id);
  // content-based embedders ignore it.
  virtual std::vector<double> embed(std::string_view key, std::string_view text) const = 0;
};

// Stand-in for a pretrained encoder: SHA-256 of (seed, text) seeds a
// SplitMix64 stream whose uniform [-1, 1) draws are L2-normalized. The
// expansion is fixed, so vectors are identical on every platform.
class HashEmbedder final : public Embedder {
 public:
  HashEmbedder(std::size_t d, std::uint64_t seed);
  std::size_t dimension() const override { return d_; }
  std::vector<double> embed(std::string_view key, std::string_view text) const override;

 private:
  std::size_t d_;
  std::uint64_t seed_;
};

// Precomputed embeddings, JSONL: a header line {"d": int, "count": int}
// followed by `count` lines {"id": str, "vector": [float; d]}.
struct EmbeddingTable {
  std::size_t d = 0;
  std::vector<std::string> ids;
  std::vector<std::vector<double>> vectors;
  std::unordered_map<std::string, std::size_t> index;

  void add(std::string id, std::vector<double> vector);
  const std::vector<double>* find(std::string_view id) const;
};

EmbeddingTable load_embedding_table(const std::filesystem::path& path);
void write_embedding_table(const EmbeddingTable& table, const std::filesystem::path& path);

class FileLookupEmbedder final : public Embedder {
 public:
  explicit FileLookupEmbedder(EmbeddingTable table);
  static FileLookupEmbedder open(const std::filesystem::path& path);

  std::size_t dimension() const override { return table_.d; }
  // Exact match on `key`; throws DataError("embedding not found ...") on a miss.
  std::vector<double> embed(std::string_view key, std::string_view text) const override;

 private:
  EmbeddingTable table_;
};

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& cfg);

// One-shot convenience; the table is keyed by `key`, which defaults to the
// text itself.
std::vector<double> embed_text(std::string_view text, const EmbedderConfig& cfg,
                               std::string_view key = {});

// Line-delimited JSON: {"id", "text", "label", "domain", "evidence"?}.
// Validation failures name the 1-based line number.
std::vector<ClaimRecord> load_dataset(const std::filesystem::path& path, std::size_t num_classes = 2);
std::vector<ClaimRecord> parse_dataset(std::string_view contents, std::size_t num_classes = 2,
                                       std::string_view source_name = "<memory>");
void write_dataset(const std::vector<ClaimRecord>& records, const std::filesystem::path& path);

// Record count per domain tag, ordered by tag.
std::map<std::string, std::size_t> domain_counts(const std::vector<ClaimRecord>& records);

std::vector<EmbeddedClaim> embed_dataset(const std::vector<ClaimRecord>& records, const Embedder& embedder);

template <typename T>
struct Split {
  std::vector<T> train;
  std::vector<T> test;
};

// Seeded shuffle, then the first round(fraction * N) items train.
template <typename T>
Split<T> split_dataset(const std::vector<T>& records, double train_fraction, std::uint64_t seed) {
  if (records.empty()) throw DataError("split_dataset: empty input");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw ConfigError("split_dataset: train fraction must be in (0, 1]");
  }
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  const auto n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(records.size())));
  Split<T> out;
  out.train.reserve(n_train);
  out.test.reserve(records.size() - n_train);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? out.train : out.test).push_back(records[order[i]]);
  }
  return out;
}

}  // namespace veridex
