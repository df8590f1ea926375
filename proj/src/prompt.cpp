// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0

#include "veridex/prompt.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "veridex/checksum.hpp"
#include "veridex/errors.hpp"

namespace veridex {

namespace detail {
const char* builtin_template_version();
const std::map<std::string, std::string>& builtin_template_texts();
}  // namespace detail

namespace {

std::string strip_final_newline(std::string s) {
  if (!s.empty() && s.back() == '\n') s.pop_back();
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string read_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(std::string("cannot open ") + what + " " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string_view prompt_mode_name(PromptMode mode) {
  switch (mode) {
    case PromptMode::kZeroShot: return "zero_shot";
    case PromptMode::kFewShot: return "few_shot";
    case PromptMode::kCot: return "cot";
  }
  return "unknown";
}

PromptMode parse_prompt_mode(std::string_view name) {
  for (PromptMode m : kAllPromptModes) {
    if (prompt_mode_name(m) == name) return m;
  }
  throw ConfigError("unknown prompt mode '" + std::string(name) + "' (expected zero_shot, few_shot or cot)");
}

const PromptTemplates& PromptTemplates::builtin() {
  static const PromptTemplates templates = [] {
    PromptTemplates t;
    t.version = detail::builtin_template_version();
    for (const auto& [name, text] : detail::builtin_template_texts()) t.texts.emplace(name, strip_final_newline(text));
    for (const char* name : kTemplateNames) t.get(name);
    return t;
  }();
  return templates;
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir, std::string version) {
  PromptTemplates t;
  t.version = std::move(version);
  for (const char* name : kTemplateNames) {
    t.texts.emplace(name, strip_final_newline(read_file(dir / (std::string(name) + ".txt"), "template")));
  }
  return t;
}

const std::string& PromptTemplates::get(const std::string& name) const {
  auto it = texts.find(name);
  if (it == texts.end()) throw ConfigError("template set '" + version + "' has no template '" + name + "'");
  return it->second;
}

std::string render_template(std::string_view text, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (true) {
    const std::size_t open = text.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      return out;
    }
    const std::size_t close = text.find("}}", open + 2);
    if (close == std::string_view::npos) throw ConfigError("unclosed placeholder in template");
    out.append(text.substr(pos, open - pos));
    const std::string name(text.substr(open + 2, close - open - 2));
    auto it = values.find(name);
    if (it == values.end()) throw ConfigError("template placeholder '{{" + name + "}}' has no value");
    out.append(it->second);
    pos = close + 2;
  }
}

std::string build_prompt(const PromptBundle& bundle, const PromptTemplates& templates) {
  if (bundle.mode == PromptMode::kFewShot && bundle.exemplars.empty()) {
    throw ConfigError("few_shot prompts need at least one exemplar");
  }
  if (bundle.verdict.probabilities.empty()) throw ConfigError("prompt bundle has no verdict");
  std::vector<std::string> sections;
  sections.push_back(render_template(templates.get("preamble"), {}));
  sections.push_back(render_template(templates.get("verdict"), {{"label", bundle.verdict.label_name()},
                                                                {"confidence", fixed4(bundle.verdict.confidence)}}));
  if (bundle.rag_enabled) {
    std::string items;
    for (const auto& r : bundle.knowledge) {
      if (!items.empty()) items += '\n';
      items += render_template(templates.get("knowledge_item"),
                               {{"chunk_id", r.chunk.chunk_id},
                                {"source_id", r.chunk.source_id},
                                {"score", std::isfinite(r.score) ? fixed4(r.score) : "n/a"},
                                {"text", r.chunk.text}});
    }
    if (items.empty()) items = render_template(templates.get("knowledge_empty"), {});
    sections.push_back(render_template(templates.get("knowledge"), {{"items", items}}));
  }
  if (bundle.mode == PromptMode::kFewShot) {
    std::string items;
    for (const auto& e : bundle.exemplars) {
      if (!items.empty()) items += "\n\n";
      items += render_template(templates.get("exemplar"),
                               {{"claim", e.claim}, {"verdict", e.verdict}, {"explanation", e.explanation}});
    }
    sections.push_back(render_template(templates.get("exemplars"), {{"items", items}}));
  }
  if (bundle.mode == PromptMode::kCot) sections.push_back(render_template(templates.get("cot"), {}));
  sections.push_back(render_template(templates.get("claim"), {{"claim", bundle.query}}));
  sections.push_back(render_template(templates.get("output"), {}));

  std::string out;
  for (const auto& s : sections) {
    out += s;
    out += "\n\n";
  }
  out.pop_back();
  return out;
}

std::vector<Exemplar> select_exemplars(const std::vector<Exemplar>& pool, std::size_t k) {
  if (k == 0) throw ConfigError("select_exemplars: k must be at least 1");
  if (k > pool.size()) {
    throw ConfigError("select_exemplars: k=" + std::to_string(k) + " exceeds pool size " + std::to_string(pool.size()));
  }
  return {pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k)};
}

std::vector<Exemplar> load_exemplars(const std::filesystem::path& path) {
  std::istringstream in(read_file(path, "exemplar file"));
  std::vector<Exemplar> out;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back(Exemplar{j.at("claim").get<std::string>(), j.at("verdict").get<std::string>(),
                             j.at("explanation").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

nlohmann::ordered_json DebunkResponse::to_json() const {
  nlohmann::ordered_json j;
  j["explanation"] = explanation;
  j["verdict"] = verdict.to_json();
  j["backend"] = {{"name", backend}, {"model", model}, {"latency_ms", latency_ms}};
  j["transcript"] = transcript;
  return j;
}

DebunkResponse generate(const GenerationRequest& request, const GenerationBackend& backend, const Verdict& verdict) {
  if (!(request.temperature >= 0.0)) throw ConfigError("temperature must be non-negative");
  const auto start = std::chrono::steady_clock::now();
  Completion c = backend.complete(request);
  const auto elapsed = std::chrono::steady_clock::now() - start;
  if (c.text.empty()) throw BackendError(BackendFailure::kMalformedResponse, backend.name() + " backend returned an empty explanation");
  DebunkResponse r;
  r.explanation = c.text;
  r.verdict = verdict;
  r.backend = backend.name();
  r.model = c.model.empty() ? request.model : c.model;
  r.latency_ms = std::chrono::duration<double, std::milli>(elapsed).count();
  r.transcript["request"] = {{"model", request.model},
                             {"temperature", request.temperature},
                             {"max_tokens", request.max_tokens},
                             {"prompt", request.prompt}};
  r.transcript["response"] = c.raw;
  return r;
}

void MockBackend::add(std::string_view prompt, std::string text) { add_hash(sha256_hex(prompt), std::move(text)); }

void MockBackend::add_hash(std::string prompt_sha256, std::string text) {
  responses_[std::move(prompt_sha256)] = std::move(text);
}

MockBackend MockBackend::load(const std::filesystem::path& path) {
  MockBackend m;
  try {
    const auto j = nlohmann::json::parse(read_file(path, "mock response file"));
    if (!j.is_object()) throw DataError("mock response file " + path.string() + " must hold a JSON object");
    for (const auto& [hash, text] : j.items()) m.add_hash(hash, text.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError("mock response file " + path.string() + ": " + e.what());
  }
  return m;
}

void MockBackend::save(const std::filesystem::path& path) const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [hash, text] : responses_) j[hash] = text;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Completion MockBackend::complete(const GenerationRequest& request) const {
  const std::string hash = sha256_hex(request.prompt);
  auto it = responses_.find(hash);
  if (it == responses_.end()) {
    throw BackendError(BackendFailure::kCannedMiss, "mock backend has no canned response for prompt sha256 " + hash);
  }
  return Completion{it->second, "mock", {{"prompt_sha256", hash}, {"text", it->second}}};
}

Completion UnavailableBackend::complete(const GenerationRequest&) const {
  throw BackendError(BackendFailure::kNetwork, "generation backend is unavailable", 0);
}

// ---------------------------------------------------------------------------

HttpBackendConfig HttpBackendConfig::from_env(std::string default_url) {
  HttpBackendConfig c;
  const char* url = std::getenv(kApiUrlEnv);
  c.url = url && *url ? url : std::move(default_url);
  if (const char* key = std::getenv(kApiKeyEnv)) c.api_key = key;
  return c;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  if (config_.url.empty()) {
    throw ConfigError(std::string("no chat-completion endpoint configured; set ") + HttpBackendConfig::kApiUrlEnv);
  }
  if (config_.attempts < 1) throw ConfigError("http backend needs at least one attempt");
  if (config_.max_in_flight == 0) throw ConfigError("http backend max_in_flight must be positive");
  const std::size_t scheme = config_.url.find("://");
  if (scheme == std::string::npos) throw ConfigError("endpoint URL needs a scheme: " + config_.url);
  const std::size_t slash = config_.url.find('/', scheme + 3);
  origin_ = config_.url.substr(0, slash);
  path_ = slash == std::string::npos ? "/v1/chat/completions" : config_.url.substr(slash);
}

Completion HttpBackend::complete(const GenerationRequest& request) const {
  if (config_.api_key.empty()) {
    throw BackendError(BackendFailure::kCredentials,
                       std::string("missing API credentials: set ") + HttpBackendConfig::kApiKeyEnv, 0);
  }
  nlohmann::json body = {{"model", request.model},
                         {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
                         {"temperature", request.temperature},
                         {"max_tokens", request.max_tokens}};
  const std::string payload = body.dump();

  {
    std::unique_lock lock(mutex_);
    slot_freed_.wait(lock, [&] { return in_flight_ < config_.max_in_flight; });
    ++in_flight_;
  }
  struct Release {
    const HttpBackend* self;
    ~Release() {
      {
        std::lock_guard lock(self->mutex_);
        --self->in_flight_;
      }
      self->slot_freed_.notify_one();
    }
  } release{this};

  auto backoff = config_.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      return attempt_once(request, payload);
    } catch (const BackendError& e) {
      const bool retryable = e.kind() == BackendFailure::kNetwork || e.kind() == BackendFailure::kTimeout ||
                             (e.kind() == BackendFailure::kHttpStatus && e.attempts() < 0);
      if (!retryable || attempt >= config_.attempts) {
        throw BackendError(e.kind(), std::string(e.what()) + " (after " + std::to_string(attempt) + " attempt" +
                                         (attempt == 1 ? "" : "s") + ")",
                           attempt);
      }
    }
    std::this_thread::sleep_for(backoff);
    backoff *= 2;
  }
}

// Retryable HTTP statuses are flagged with a negative attempt count.
Completion HttpBackend::attempt_once(const GenerationRequest& request, const std::string& body) const {
  httplib::Client client(origin_);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  client.set_bearer_token_auth(config_.api_key);
  const auto start = std::chrono::steady_clock::now();
  auto res = client.Post(path_, body, "application/json");
  if (!res) {
    const auto err = res.error();
    const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                           (err == httplib::Error::Read && std::chrono::steady_clock::now() - start >= config_.timeout);
    if (timed_out) {
      throw BackendError(BackendFailure::kTimeout,
                         "request to " + origin_ + path_ + " timed out after " + std::to_string(config_.timeout.count()) + " ms");
    }
    throw BackendError(BackendFailure::kNetwork, "request to " + origin_ + path_ + " failed: " + httplib::to_string(err));
  }
  const int status = res->status;
  if (status == 401 || status == 403) {
    throw BackendError(BackendFailure::kCredentials, "endpoint rejected the credentials (HTTP " + std::to_string(status) +
                                                         "); check " + HttpBackendConfig::kApiKeyEnv);
  }
  if (status < 200 || status >= 300) {
    const bool retry = status == 429 || status >= 500;
    throw BackendError(BackendFailure::kHttpStatus, "HTTP " + std::to_string(status) + ": " + res->body, retry ? -1 : 1);
  }
  try {
    auto reply = nlohmann::json::parse(res->body);
    Completion c;
    c.text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
    c.model = reply.value("model", request.model);
    c.raw = std::move(reply);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(BackendFailure::kMalformedResponse, std::string("unreadable chat-completion reply: ") + e.what());
  }
}

}  // namespace veridex
