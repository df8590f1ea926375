// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end commands behind the `veridex` CLI: ingest, train, eval, ablate,
// sweep and debunk.

#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "veridex/embedding.hpp"
#include "veridex/knowledge_store.hpp"
#include "veridex/prompt.hpp"
#include "veridex/trainer.hpp"

namespace veridex {

enum class BackendKind { kMock, kHttp, kUnavailable };

BackendKind parse_backend_kind(std::string_view name);
std::string_view backend_kind_name(BackendKind kind);

struct PipelinePaths {
  std::filesystem::path dataset;         // claims JSONL
  std::filesystem::path knowledge;       // documents JSONL for ingest
  std::filesystem::path store;           // knowledge store file
  std::filesystem::path model;           // model file
  std::filesystem::path reports;         // directory for CSV/JSON reports
  std::filesystem::path templates;       // empty: built-in templates
  std::filesystem::path exemplars;       // few-shot pool JSONL
  std::filesystem::path mock_responses;  // mock backend replies
};

struct GenerationSettings {
  BackendKind backend = BackendKind::kMock;
  std::string model = "gpt-4";
  double temperature = 0.0;
  std::size_t max_tokens = 512;
  std::string url;  // overridden by VERIDEX_API_URL
  std::size_t timeout_ms = 30000;
  int attempts = 3;
  std::size_t max_in_flight = 4;
};

struct PipelineConfig {
  PipelinePaths paths;
  EmbedderConfig embedder;
  // Embedder for knowledge chunks and retrieval queries; defaults to `embedder`.
  std::optional<EmbedderConfig> knowledge_embedder;
  TrainConfig train;
  std::size_t top_n = 1;
  std::size_t chunk_size = kDefaultChunkSize;
  PromptMode mode = PromptMode::kZeroShot;
  bool rag = true;
  std::size_t exemplar_count = 2;
  GenerationSettings generation;

  const EmbedderConfig& knowledge_embedder_config() const { return knowledge_embedder ? *knowledge_embedder : embedder; }
  void validate() const;
  // Relative paths are resolved against `base_dir`.
  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static PipelineConfig load(const std::filesystem::path& path);
};

EmbedderConfig embedder_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

struct IngestSummary {
  std::size_t documents = 0;
  std::size_t chunks = 0;
  std::size_t dimension = 0;
};

struct TrainSummary {
  std::size_t train_samples = 0;
  std::size_t test_samples = 0;
  std::vector<double> epoch_losses;
  bool early_stopped = false;
  double train_accuracy = 0.0;  // percent
};

// Documents -> chunks -> vectors -> a fresh store at paths.store.
IngestSummary cmd_ingest(const PipelineConfig& cfg);
// Embeds the dataset, splits it, trains on the training part and saves the
// model together with the split settings.
TrainSummary cmd_train(const PipelineConfig& cfg);
// Re-creates the split recorded in the model file and evaluates on its test
// part; writes eval.csv / eval.json under paths.reports.
MetricsReport cmd_eval(const PipelineConfig& cfg);
// Writes ablation.csv / ablation.json.
AblationTable cmd_ablate(const PipelineConfig& cfg);
// Writes sweep.csv.
SweepGrid cmd_sweep(const PipelineConfig& cfg, const std::vector<std::size_t>& experts,
                    const std::vector<std::size_t>& citizens);

struct DebunkOptions {
  std::string claim;
  std::string claim_id;  // embedding key for table-backed embedders; defaults to the claim text
  bool dry_run = false;
};

struct DebunkResult {
  nlohmann::ordered_json json;
  bool backend_failed = false;
  std::string error;
};

// Verdict, retrieval (RAG only), prompt and, unless dry-run, the generated
// explanation. A backend failure still yields verdict and retrieval, with
// the explanation marked failed.
DebunkResult cmd_debunk(const PipelineConfig& cfg, const DebunkOptions& options);

std::unique_ptr<GenerationBackend> make_backend(const PipelineConfig& cfg);

// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 generation backend error. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace veridex
