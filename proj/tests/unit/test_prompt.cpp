// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <thread>

#include <httplib.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "veridex/checksum.hpp"
#include "veridex/errors.hpp"
#include "veridex/prompt.hpp"

using namespace veridex;
namespace fs = std::filesystem;
using namespace std::chrono_literals;

namespace {

std::size_t count_of(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "veridex_prompt" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Local chat-completion stub that runs a handler on a background thread.
class StubServer {
 public:
  explicit StubServer(httplib::Server::Handler handler) {
    server_.Post("/v1/chat/completions", [this, handler](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      handler(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  std::atomic<int> hits{0};

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

HttpBackendConfig stub_config(const StubServer& s) {
  HttpBackendConfig c;
  c.url = s.url();
  c.api_key = "test-key";
  c.timeout = 2000ms;
  c.initial_backoff = 5ms;
  return c;
}

void reply_ok(httplib::Response& res, const std::string& text) {
  nlohmann::json j = {{"model", "stub-1"}, {"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}};
  res.set_content(j.dump(), "application/json");
}

}  // namespace

TEST_CASE("template rendering") {
  CHECK(render_template("a {{x}} b {{y}}", {{"x", "1"}, {"y", "{{x}}"}}) == "a 1 b {{x}}");
  CHECK_THROWS_AS(render_template("{{missing}}", {}), ConfigError);
  for (const char* name : kTemplateNames) CHECK(!PromptTemplates::builtin().get(name).empty());
  CHECK(PromptTemplates::builtin().version == "v1");
  CHECK_THROWS_AS(PromptTemplates::builtin().get("nope"), ConfigError);
}

TEST_CASE("prompt grid matches goldens") {
  std::vector<std::string> rendered;
  for (const PromptMode mode : kAllPromptModes) {
    for (const bool rag : {true, false}) {
      const std::string p = build_prompt(fixture::prompt_bundle(mode, rag));
      const std::string name = std::string("prompt_") + std::string(prompt_mode_name(mode)) + (rag ? "_rag" : "_norag") + ".txt";
      CAPTURE(name);
      CHECK(oracle::matches_golden(name, p));
      rendered.push_back(p);
    }
  }
  for (std::size_t i = 0; i < rendered.size(); ++i)
    for (std::size_t j = i + 1; j < rendered.size(); ++j) CHECK(rendered[i] != rendered[j]);
}

TEST_CASE("prompt sections follow the bundle") {
  const PromptBundle base = fixture::prompt_bundle(PromptMode::kZeroShot, true);
  for (const PromptMode mode : kAllPromptModes) {
    for (const bool rag : {true, false}) {
      const std::string p = build_prompt(fixture::prompt_bundle(mode, rag));
      CHECK(count_of(p, base.query) == 1);
      CHECK(p.find("rumor") != std::string::npos);
      CHECK(p.find("0.8766") != std::string::npos);
      const bool has_chunks = p.find("kb-water#0") != std::string::npos;
      CHECK(has_chunks == rag);
      CHECK((p.find(base.knowledge[0].chunk.text) != std::string::npos) == rag);
      CHECK((p.find(base.exemplars[0].claim) != std::string::npos) == (mode == PromptMode::kFewShot));
      CHECK((p.find("step by step") != std::string::npos) == (mode == PromptMode::kCot));
    }
  }
  PromptBundle empty = fixture::prompt_bundle(PromptMode::kZeroShot, true);
  empty.knowledge.clear();
  CHECK(build_prompt(empty).find(PromptTemplates::builtin().get("knowledge_empty")) != std::string::npos);
  PromptBundle no_examples = fixture::prompt_bundle(PromptMode::kFewShot, true);
  no_examples.exemplars.clear();
  CHECK_THROWS_AS(build_prompt(no_examples), ConfigError);
}

TEST_CASE("custom template directories") {
  const fs::path dir = temp_dir("templates");
  for (const char* name : kTemplateNames) oracle::write_file(dir / (std::string(name) + ".txt"), std::string(name) + "\n");
  oracle::write_file(dir / "claim.txt", "CLAIM={{claim}}\n");
  const PromptTemplates t = PromptTemplates::load(dir, "test");
  CHECK(t.version == "test");
  CHECK(t.get("claim") == "CLAIM={{claim}}");
  CHECK(build_prompt(fixture::prompt_bundle(PromptMode::kZeroShot, false), t).find("CLAIM=Drinking hot water") != std::string::npos);
  fs::remove(dir / "cot.txt");
  CHECK_THROWS_AS(PromptTemplates::load(dir), ConfigError);
}

TEST_CASE("exemplar selection") {
  const auto pool = fixture::prompt_bundle(PromptMode::kFewShot, true).exemplars;
  CHECK(select_exemplars(pool, 1).size() == 1);
  CHECK(select_exemplars(pool, 1)[0].claim == pool[0].claim);
  CHECK(select_exemplars(pool, 2).size() == 2);
  CHECK_THROWS_AS(select_exemplars(pool, 0), ConfigError);
  CHECK_THROWS_AS(select_exemplars(pool, 3), ConfigError);
  const fs::path dir = temp_dir("exemplars");
  oracle::write_file(dir / "ex.jsonl", "{\"claim\":\"c\",\"verdict\":\"rumor\",\"explanation\":\"e\"}\n");
  CHECK(load_exemplars(dir / "ex.jsonl").at(0).verdict == "rumor");
}

TEST_CASE("mock backend") {
  MockBackend mock;
  mock.add("prompt one", "Conclusion: rumor\nArgument: canned");
  const Verdict v = make_verdict(std::vector<double>{0.2, 0.8}, {});
  const DebunkResponse r = generate({"prompt one"}, mock, v);
  CHECK(r.explanation == "Conclusion: rumor\nArgument: canned");
  CHECK(r.backend == "mock");
  CHECK(r.verdict.label == 1);
  CHECK(r.to_json()["explanation"] == r.explanation);
  try {
    generate({"prompt two"}, mock, v);
    FAIL("expected a miss");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendFailure::kCannedMiss);
  }
  GenerationRequest hot{"prompt one"};
  hot.temperature = -0.5;
  CHECK_THROWS_AS(generate(hot, mock, v), ConfigError);

  const fs::path dir = temp_dir("mock");
  mock.save(dir / "mock.json");
  const MockBackend back = MockBackend::load(dir / "mock.json");
  CHECK(back.size() == 1);
  CHECK(back.complete({"prompt one"}).text == "Conclusion: rumor\nArgument: canned");
  CHECK(nlohmann::json::parse(oracle::read_file(dir / "mock.json")).contains(sha256_hex("prompt one")));

  MockBackend blank;
  blank.add("p", "");
  try {
    generate({"p"}, blank, v);
    FAIL("expected a malformed reply");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendFailure::kMalformedResponse);
  }
}

TEST_CASE("unavailable backend") {
  try {
    UnavailableBackend().complete({"x"});
    FAIL("expected failure");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendFailure::kNetwork);
  }
}

TEST_CASE("http backend success path") {
  std::string auth, model;
  StubServer server([&](const httplib::Request& req, httplib::Response& res) {
    auth = req.get_header_value("Authorization");
    const auto body = nlohmann::json::parse(req.body);
    model = body["model"];
    CHECK(body["messages"][0]["content"] == "hello");
    CHECK(body["temperature"] == 0.0);
    reply_ok(res, "Conclusion: non-rumor\nArgument: fine");
  });
  HttpBackend backend(stub_config(server));
  const Completion c = backend.complete({"hello"});
  CHECK(c.text == "Conclusion: non-rumor\nArgument: fine");
  CHECK(auth == "Bearer test-key");
  CHECK(model == "gpt-4");
  CHECK(server.hits == 1);
}

TEST_CASE("http backend rejects bad credentials without retrying") {
  StubServer server([](const httplib::Request&, httplib::Response& res) { res.status = 401; });
  HttpBackend backend(stub_config(server));
  try {
    backend.complete({"hello"});
    FAIL("expected failure");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendFailure::kCredentials);
    CHECK(std::string(e.what()).find("VERIDEX_API_KEY") != std::string::npos);
  }
  CHECK(server.hits == 1);

  HttpBackendConfig keyless = stub_config(server);
  keyless.api_key.clear();
  try {
    HttpBackend(keyless).complete({"hello"});
    FAIL("expected failure");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendFailure::kCredentials);
  }
  CHECK(server.hits == 1);
}

TEST_CASE("http backend retries server errors") {
  StubServer server([&](const httplib::Request&, httplib::Response& res) {
    static std::atomic<int> calls{0};
    if (calls++ == 0) {
      res.status = 503;
    } else {
      reply_ok(res, "second time");
    }
  });
  HttpBackend backend(stub_config(server));
  CHECK(backend.complete({"hello"}).text == "second time");
  CHECK(server.hits == 2);
}

TEST_CASE("http backend reports malformed replies and client errors") {
  StubServer server([](const httplib::Request& req, httplib::Response& res) {
    if (req.body.find("bad-json") != std::string::npos) {
      res.set_content("{not json", "application/json");
    } else {
      res.status = 400;
    }
  });
  HttpBackend backend(stub_config(server));
  try {
    backend.complete({"bad-json"});
    FAIL("expected failure");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendFailure::kMalformedResponse);
  }
  try {
    backend.complete({"other"});
    FAIL("expected failure");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendFailure::kHttpStatus);
  }
  CHECK(server.hits == 2);
}

TEST_CASE("http backend times out after exactly three attempts") {
  StubServer server([](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(600ms);
    reply_ok(res, "too late");
  });
  HttpBackendConfig cfg = stub_config(server);
  cfg.timeout = 150ms;
  HttpBackend backend(cfg);
  try {
    backend.complete({"hello"});
    FAIL("expected timeout");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendFailure::kTimeout);
    CHECK(e.attempts() == 3);
    CHECK(std::string(e.what()).find("after 3 attempts") != std::string::npos);
  }
  std::this_thread::sleep_for(100ms);
  CHECK(server.hits == 3);
}

TEST_CASE("unreachable endpoint is a network failure") {
  HttpBackendConfig cfg;
  cfg.url = "http://127.0.0.1:1";
  cfg.api_key = "k";
  cfg.attempts = 2;
  cfg.initial_backoff = 1ms;
  cfg.timeout = 500ms;
  try {
    HttpBackend(cfg).complete({"hello"});
    FAIL("expected failure");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendFailure::kNetwork);
    CHECK(e.attempts() == 2);
  }
}
