// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0

#include "veridex/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "veridex/errors.hpp"
#include "veridex/model_io.hpp"

namespace veridex {

namespace {

std::filesystem::path resolve(const nlohmann::json& j, const char* key, const std::filesystem::path& base) {
  if (!j.contains(key) || j[key].is_null()) return {};
  std::filesystem::path p = j[key].get<std::string>();
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

void require_path(const std::filesystem::path& p, const char* what) {
  if (p.empty()) throw ConfigError(std::string("config does not set paths.") + what);
}

void require_file(const std::filesystem::path& p, const char* what) {
  require_path(p, what);
  if (!std::filesystem::exists(p)) throw DataError(std::string(what) + " file not found: " + p.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

std::filesystem::path report_path(const PipelineConfig& cfg, const char* name) {
  require_path(cfg.paths.reports, "reports");
  return cfg.paths.reports / name;
}

std::vector<EmbeddedClaim> load_embedded_dataset(const PipelineConfig& cfg) {
  require_file(cfg.paths.dataset, "dataset");
  const auto records = load_dataset(cfg.paths.dataset, cfg.train.model.classes);
  if (cfg.embedder.d != cfg.train.model.d) {
    throw DimensionError("embedder d=" + std::to_string(cfg.embedder.d) + " does not match model d=" +
                         std::to_string(cfg.train.model.d));
  }
  const auto embedder = make_embedder(cfg.embedder);
  return embed_dataset(records, *embedder);
}

}  // namespace

BackendKind parse_backend_kind(std::string_view name) {
  if (name == "mock") return BackendKind::kMock;
  if (name == "http") return BackendKind::kHttp;
  if (name == "unavailable") return BackendKind::kUnavailable;
  throw ConfigError("unknown backend '" + std::string(name) + "' (expected mock, http or unavailable)");
}

std::string_view backend_kind_name(BackendKind kind) {
  switch (kind) {
    case BackendKind::kMock: return "mock";
    case BackendKind::kHttp: return "http";
    case BackendKind::kUnavailable: return "unavailable";
  }
  return "unknown";
}

EmbedderConfig embedder_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  EmbedderConfig c;
  try {
    if (j.contains("backend")) c.backend = parse_embedder_backend(j["backend"].get<std::string>());
    c.d = j.value("d", c.d);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("embedder config: ") + e.what());
  }
  c.source = resolve(j, "source", base_dir);
  return c;
}

void PipelineConfig::validate() const {
  if (top_n == 0) throw ConfigError("retrieval.top_n must be at least 1");
  if (chunk_size == 0) throw ConfigError("retrieval.chunk_size must be at least 1");
  if (exemplar_count == 0) throw ConfigError("prompt.exemplars must be at least 1");
  if (!(generation.temperature >= 0.0)) throw ConfigError("generation.temperature must be non-negative");
  if (embedder.d == 0 || knowledge_embedder_config().d == 0) throw ConfigError("embedder d must be positive");
  train.validate();
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("pipeline config must be a JSON object");
  PipelineConfig c;
  try {
    if (j.contains("paths")) {
      const auto& p = j["paths"];
      c.paths.dataset = resolve(p, "dataset", base_dir);
      c.paths.knowledge = resolve(p, "knowledge", base_dir);
      c.paths.store = resolve(p, "store", base_dir);
      c.paths.model = resolve(p, "model", base_dir);
      c.paths.reports = resolve(p, "reports", base_dir);
      c.paths.templates = resolve(p, "templates", base_dir);
      c.paths.exemplars = resolve(p, "exemplars", base_dir);
      c.paths.mock_responses = resolve(p, "mock_responses", base_dir);
    }
    if (j.contains("embedder")) c.embedder = embedder_config_from_json(j["embedder"], base_dir);
    if (j.contains("knowledge_embedder")) c.knowledge_embedder = embedder_config_from_json(j["knowledge_embedder"], base_dir);
    if (j.contains("train")) c.train = TrainConfig::from_json(j["train"]);
    if (j.contains("retrieval")) {
      c.top_n = j["retrieval"].value("top_n", c.top_n);
      c.chunk_size = j["retrieval"].value("chunk_size", c.chunk_size);
    }
    if (j.contains("prompt")) {
      const auto& p = j["prompt"];
      if (p.contains("mode")) c.mode = parse_prompt_mode(p["mode"].get<std::string>());
      c.rag = p.value("rag", c.rag);
      c.exemplar_count = p.value("exemplars", c.exemplar_count);
    }
    if (j.contains("generation")) {
      const auto& g = j["generation"];
      if (g.contains("backend")) c.generation.backend = parse_backend_kind(g["backend"].get<std::string>());
      c.generation.model = g.value("model", c.generation.model);
      c.generation.temperature = g.value("temperature", c.generation.temperature);
      c.generation.max_tokens = g.value("max_tokens", c.generation.max_tokens);
      c.generation.url = g.value("url", c.generation.url);
      c.generation.timeout_ms = g.value("timeout_ms", c.generation.timeout_ms);
      c.generation.attempts = g.value("attempts", c.generation.attempts);
      c.generation.max_in_flight = g.value("max_in_flight", c.generation.max_in_flight);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("pipeline config: ") + e.what());
  }
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

// ---------------------------------------------------------------------------

IngestSummary cmd_ingest(const PipelineConfig& cfg) {
  require_file(cfg.paths.knowledge, "knowledge");
  require_path(cfg.paths.store, "store");
  const auto docs = load_knowledge_documents(cfg.paths.knowledge);
  const auto embedder = make_embedder(cfg.knowledge_embedder_config());
  VectorStore store(embedder->dimension());
  IngestSummary s;
  s.documents = docs.size();
  s.chunks = ingest_documents(store, docs, *embedder, cfg.chunk_size);
  s.dimension = store.dimension();
  if (cfg.paths.store.has_parent_path()) std::filesystem::create_directories(cfg.paths.store.parent_path());
  store.save(cfg.paths.store);
  return s;
}

TrainSummary cmd_train(const PipelineConfig& cfg) {
  require_path(cfg.paths.model, "model");
  const auto dataset = load_embedded_dataset(cfg);
  const auto split = split_dataset(dataset, cfg.train.train_fraction, cfg.train.seed);
  TrainResult trained = train(split.train, cfg.train);
  TrainSummary s;
  s.train_samples = split.train.size();
  s.test_samples = split.test.size();
  s.epoch_losses = trained.epoch_losses;
  s.early_stopped = trained.early_stopped;
  s.train_accuracy = 100.0 * accuracy(trained.model, split.train);
  nlohmann::json meta;
  meta["train"] = cfg.train.to_json();
  meta["split"] = {{"seed", cfg.train.seed}, {"train_fraction", cfg.train.train_fraction}};
  meta["epoch_losses"] = trained.epoch_losses;
  meta["early_stopped"] = trained.early_stopped;
  if (cfg.paths.model.has_parent_path()) std::filesystem::create_directories(cfg.paths.model.parent_path());
  save_model(trained.model, cfg.paths.model, meta);
  return s;
}

MetricsReport cmd_eval(const PipelineConfig& cfg) {
  require_file(cfg.paths.model, "model");
  const EccwModel model = load_model(cfg.paths.model);
  const nlohmann::json meta = load_model_metadata(cfg.paths.model);
  std::uint64_t seed = cfg.train.seed;
  double fraction = cfg.train.train_fraction;
  if (meta.contains("split")) {
    seed = meta["split"].value("seed", seed);
    fraction = meta["split"].value("train_fraction", fraction);
  }
  PipelineConfig data_cfg = cfg;
  data_cfg.train.model.d = model.config.d;
  data_cfg.train.model.classes = model.config.classes;
  const auto dataset = load_embedded_dataset(data_cfg);
  const auto split = split_dataset(dataset, fraction, seed);
  if (split.test.empty()) throw DataError("eval: the recorded split leaves no test samples");
  MetricsReport report = evaluate(model, split.test);
  write_text(report_path(cfg, "eval.csv"), report.to_csv());
  write_text(report_path(cfg, "eval.json"), report.to_json().dump(2) + "\n");
  return report;
}

AblationTable cmd_ablate(const PipelineConfig& cfg) {
  const auto dataset = load_embedded_dataset(cfg);
  AblationTable table = ablate(cfg.train, dataset);
  write_text(report_path(cfg, "ablation.csv"), table.to_csv());
  write_text(report_path(cfg, "ablation.json"), table.to_json().dump(2) + "\n");
  return table;
}

SweepGrid cmd_sweep(const PipelineConfig& cfg, const std::vector<std::size_t>& experts,
                    const std::vector<std::size_t>& citizens) {
  const auto dataset = load_embedded_dataset(cfg);
  SweepGrid grid = sweep(experts, citizens, cfg.train, dataset);
  write_text(report_path(cfg, "sweep.csv"), grid.to_csv());
  return grid;
}

std::unique_ptr<GenerationBackend> make_backend(const PipelineConfig& cfg) {
  switch (cfg.generation.backend) {
    case BackendKind::kMock:
      require_file(cfg.paths.mock_responses, "mock_responses");
      return std::make_unique<MockBackend>(MockBackend::load(cfg.paths.mock_responses));
    case BackendKind::kUnavailable:
      return std::make_unique<UnavailableBackend>();
    case BackendKind::kHttp: {
      HttpBackendConfig h = HttpBackendConfig::from_env(cfg.generation.url);
      h.timeout = std::chrono::milliseconds(cfg.generation.timeout_ms);
      h.attempts = cfg.generation.attempts;
      h.max_in_flight = cfg.generation.max_in_flight;
      return std::make_unique<HttpBackend>(std::move(h));
    }
  }
  throw ConfigError("unknown backend");
}

DebunkResult cmd_debunk(const PipelineConfig& cfg, const DebunkOptions& options) {
  if (options.claim.empty()) throw ConfigError("debunk needs a non-empty claim");
  require_file(cfg.paths.model, "model");
  const EccwModel model = load_model(cfg.paths.model);
  const std::string key = options.claim_id.empty() ? options.claim : options.claim_id;

  const auto embedder = make_embedder(cfg.embedder);
  const std::vector<double> s = embedder->embed(key, options.claim);
  if (s.size() != model.config.d) {
    throw DimensionError("claim embedding has " + std::to_string(s.size()) + " components, model expects d=" +
                         std::to_string(model.config.d));
  }
  const Verdict verdict = forward_full(s, model);

  std::vector<RetrievalResult> retrieved;
  if (cfg.rag) {
    require_file(cfg.paths.store, "store");
    const VectorStore store = VectorStore::open(cfg.paths.store);
    const auto& kcfg = cfg.knowledge_embedder_config();
    const std::vector<double> q =
        (cfg.knowledge_embedder ? make_embedder(kcfg)->embed(key, options.claim) : s);
    retrieved = store.search(q, cfg.top_n);
  }

  PromptBundle bundle;
  bundle.verdict = verdict;
  bundle.knowledge = retrieved;
  bundle.query = options.claim;
  bundle.mode = cfg.mode;
  bundle.rag_enabled = cfg.rag;
  if (cfg.mode == PromptMode::kFewShot) {
    require_file(cfg.paths.exemplars, "exemplars");
    bundle.exemplars = select_exemplars(load_exemplars(cfg.paths.exemplars), cfg.exemplar_count);
  }
  const PromptTemplates templates =
      cfg.paths.templates.empty() ? PromptTemplates::builtin() : PromptTemplates::load(cfg.paths.templates);
  const std::string prompt = build_prompt(bundle, templates);

  DebunkResult result;
  auto& j = result.json;
  j["claim"] = options.claim;
  j["verdict"] = verdict.to_json();
  j["retrieved"] = nlohmann::ordered_json::array();
  for (const auto& r : retrieved) {
    nlohmann::ordered_json item = r.to_json();
    item.erase("text");
    j["retrieved"].push_back(std::move(item));
  }
  j["prompt_mode"] = prompt_mode_name(cfg.mode);
  j["rag"] = cfg.rag;
  j["template_version"] = templates.version;
  if (options.dry_run) {
    j["prompt"] = prompt;
    return result;
  }

  GenerationRequest request{prompt, cfg.generation.temperature, cfg.generation.model, cfg.generation.max_tokens};
  try {
    const auto backend = make_backend(cfg);
    const DebunkResponse response = generate(request, *backend, verdict);
    j["explanation"] = {{"status", "ok"}, {"text", response.explanation}};
    j["metadata"] = {{"backend", response.backend}, {"model", response.model}, {"latency_ms", response.latency_ms}};
  } catch (const BackendError& e) {
    result.backend_failed = true;
    result.error = e.what();
    j["explanation"] = {{"status", "failed"}, {"error", e.what()}};
    j["metadata"] = {{"backend", backend_kind_name(cfg.generation.backend)}, {"attempts", e.attempts()}};
  }
  return result;
}

// ---------------------------------------------------------------------------

namespace {

enum : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitBackend = 3 };

void print_ingest(std::ostream& out, const IngestSummary& s, const PipelineConfig& cfg) {
  out << "ingested " << s.documents << " documents into " << s.chunks << " chunks (d=" << s.dimension << ") -> "
      << cfg.paths.store.string() << '\n';
}

void print_train(std::ostream& out, const TrainSummary& s, const PipelineConfig& cfg) {
  char line[160];
  std::snprintf(line, sizeof line, "trained on %zu samples (%zu held out), %zu epochs%s, final loss %.6f, train accuracy %.2f\n",
                s.train_samples, s.test_samples, s.epoch_losses.size(), s.early_stopped ? " (early stop)" : "",
                s.epoch_losses.empty() ? 0.0 : s.epoch_losses.back(), s.train_accuracy);
  out << line << "model -> " << cfg.paths.model.string() << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rumor detection and debunking pipeline", "veridex"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "Pipeline config (JSON)")->required();
  app.add_option("--seed", seed, "Seed for splitting, initialization and shuffling");

  auto* ingest = app.add_subcommand("ingest", "Chunk, embed and store knowledge documents");
  auto* train_cmd = app.add_subcommand("train", "Train a model and save it");
  auto* eval = app.add_subcommand("eval", "Evaluate the saved model on its held-out split");
  auto* ablate_cmd = app.add_subcommand("ablate", "Train and evaluate every ablation variant");
  auto* sweep_cmd = app.add_subcommand("sweep", "Grid over expert and citizen counts");
  auto* debunk = app.add_subcommand("debunk", "Classify a claim and generate an explanation");

  std::optional<std::size_t> parallelism;
  for (auto* sub : {ablate_cmd, sweep_cmd}) sub->add_option("--parallelism", parallelism, "Worker threads");
  std::vector<std::size_t> experts, citizens;
  sweep_cmd->add_option("--experts", experts, "Expert counts, comma separated")->delimiter(',')->required();
  sweep_cmd->add_option("--citizens", citizens, "Citizen counts, comma separated")->delimiter(',')->required();

  DebunkOptions dopts;
  std::optional<std::size_t> top_n;
  std::optional<std::string> mode, backend;
  bool rag = true, dry_run = false;
  debunk->add_option("--claim", dopts.claim, "Claim text")->required();
  debunk->add_option("--claim-id", dopts.claim_id, "Embedding key for table-backed embedders");
  debunk->add_option("--top-n", top_n, "Knowledge chunks to retrieve");
  debunk->add_option("--mode", mode, "zero_shot, few_shot or cot");
  auto* rag_flag = debunk->add_flag("--rag,!--no-rag", rag, "Toggle retrieval-augmented prompting");
  debunk->add_option("--backend", backend, "mock, http or unavailable");
  debunk->add_flag("--dry-run", dry_run, "Stop before generation and print the prompt");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    PipelineConfig cfg = PipelineConfig::load(config_path);
    if (seed) cfg.train.seed = *seed;
    if (parallelism) cfg.train.parallelism = *parallelism;
    if (top_n) cfg.top_n = *top_n;
    if (mode) cfg.mode = parse_prompt_mode(*mode);
    if (rag_flag->count() > 0) cfg.rag = rag;
    if (backend) cfg.generation.backend = parse_backend_kind(*backend);
    cfg.validate();

    if (ingest->parsed()) {
      print_ingest(out, cmd_ingest(cfg), cfg);
    } else if (train_cmd->parsed()) {
      print_train(out, cmd_train(cfg), cfg);
    } else if (eval->parsed()) {
      out << cmd_eval(cfg).to_table();
    } else if (ablate_cmd->parsed()) {
      out << cmd_ablate(cfg).to_csv();
    } else if (sweep_cmd->parsed()) {
      out << cmd_sweep(cfg, experts, citizens).to_csv();
    } else if (debunk->parsed()) {
      dopts.dry_run = dry_run;
      const DebunkResult r = cmd_debunk(cfg, dopts);
      out << r.json.dump(2) << '\n';
      if (r.backend_failed) {
        err << "error: " << r.error << '\n';
        return kExitBackend;
      }
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const BackendError& e) {
    err << "backend error: " << e.what() << '\n';
    return kExitBackend;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace veridex
