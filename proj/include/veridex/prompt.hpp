// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0
//
// Explanation prompts built from a verdict, retrieved knowledge and the
// user's claim, plus the text-generation backends that answer them.

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "veridex/decision.hpp"
#include "veridex/knowledge_store.hpp"

namespace veridex {

enum class PromptMode { kZeroShot, kFewShot, kCot };

inline constexpr PromptMode kAllPromptModes[] = {PromptMode::kZeroShot, PromptMode::kFewShot, PromptMode::kCot};

std::string_view prompt_mode_name(PromptMode mode);  // zero_shot, few_shot, cot
PromptMode parse_prompt_mode(std::string_view name);

struct Exemplar {
  std::string claim;
  std::string verdict;
  std::string explanation;
};

struct PromptBundle {
  Verdict verdict;
  std::vector<RetrievalResult> knowledge;
  std::string query;
  PromptMode mode = PromptMode::kZeroShot;
  bool rag_enabled = true;
  std::vector<Exemplar> exemplars;
};

// Named template texts with {{placeholder}} fields. The built-in set is
// compiled from templates/<version>/ at build time.
struct PromptTemplates {
  std::string version;
  std::map<std::string, std::string> texts;

  static const PromptTemplates& builtin();
  // Reads every template file the renderer needs from `dir`.
  static PromptTemplates load(const std::filesystem::path& dir, std::string version = "custom");
  const std::string& get(const std::string& name) const;
};

inline constexpr const char* kTemplateNames[] = {"preamble", "verdict", "knowledge", "knowledge_item",
                                                 "knowledge_empty", "exemplars", "exemplar",
                                                 "cot", "claim", "output"};

// Fills {{name}} fields in one pass; substituted values are not rescanned.
// Throws ConfigError on a field missing from `values` or an unclosed brace.
std::string render_template(std::string_view text, const std::map<std::string, std::string>& values);

// Sections joined by blank lines: preamble, verdict, knowledge (RAG only),
// exemplars (few-shot only), reasoning steps (CoT only), claim, output format.
// Throws ConfigError for few-shot without exemplars.
std::string build_prompt(const PromptBundle& bundle, const PromptTemplates& templates = PromptTemplates::builtin());

// First k of the pool. Throws ConfigError unless 1 <= k <= pool size.
std::vector<Exemplar> select_exemplars(const std::vector<Exemplar>& pool, std::size_t k);
// JSONL {"claim", "verdict", "explanation"}.
std::vector<Exemplar> load_exemplars(const std::filesystem::path& path);

struct GenerationRequest {
  std::string prompt;
  double temperature = 0.0;
  std::string model = "gpt-4";
  std::size_t max_tokens = 512;
};

// What a backend returns for one request.
struct Completion {
  std::string text;
  std::string model;
  nlohmann::json raw;  // provider response or mock record
};

struct DebunkResponse {
  std::string explanation;
  Verdict verdict;
  std::string backend;
  std::string model;
  double latency_ms = 0.0;
  nlohmann::ordered_json transcript;  // request and raw reply

  nlohmann::ordered_json to_json() const;
};

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual std::string name() const = 0;
  // Throws BackendError.
  virtual Completion complete(const GenerationRequest& request) const = 0;
};

// Throws ConfigError for a negative temperature and BackendError when the
// backend fails or returns an empty explanation.
DebunkResponse generate(const GenerationRequest& request, const GenerationBackend& backend, const Verdict& verdict);

// Canned replies keyed by SHA-256 (hex) of the prompt. Read-only after
// loading, so concurrent use is safe.
class MockBackend final : public GenerationBackend {
 public:
  MockBackend() = default;
  void add(std::string_view prompt, std::string text);
  void add_hash(std::string prompt_sha256, std::string text);
  // JSON object {"<sha256 hex>": "<text>", ...}.
  static MockBackend load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::string name() const override { return "mock"; }
  Completion complete(const GenerationRequest& request) const override;
  std::size_t size() const { return responses_.size(); }

 private:
  std::map<std::string, std::string> responses_;
};

// Always fails with a network error; used to exercise degraded output.
class UnavailableBackend final : public GenerationBackend {
 public:
  std::string name() const override { return "unavailable"; }
  Completion complete(const GenerationRequest& request) const override;
};

struct HttpBackendConfig {
  std::string url;  // scheme://host[:port][/path]; default path /v1/chat/completions
  std::string api_key;
  std::chrono::milliseconds timeout{30000};
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{250};  // doubled after each failed attempt
  std::size_t max_in_flight = 4;

  static constexpr const char* kApiKeyEnv = "VERIDEX_API_KEY";
  static constexpr const char* kApiUrlEnv = "VERIDEX_API_URL";

  // url and api_key from the environment; url falls back to `default_url`.
  static HttpBackendConfig from_env(std::string default_url = {});
};

// Chat-completion client: POST {model, messages, temperature, max_tokens},
// bearer credential, reply text from choices[0].message.content. Network
// errors, timeouts, 429 and 5xx are retried; 401/403 fail at once as a
// credential error.
class HttpBackend final : public GenerationBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config);

  std::string name() const override { return "http"; }
  Completion complete(const GenerationRequest& request) const override;

 private:
  Completion attempt_once(const GenerationRequest& request, const std::string& body) const;

  HttpBackendConfig config_;
  std::string origin_;
  std::string path_;
  mutable std::mutex mutex_;
  mutable std::condition_variable slot_freed_;
  mutable std::size_t in_flight_ = 0;
};

}  // namespace veridex
