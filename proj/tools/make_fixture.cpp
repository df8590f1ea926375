// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0
//
// Writes the offline demo fixture: two Gaussian classes of claim embeddings,
// a small debunking corpus, few-shot exemplars, a pipeline config and canned
// mock replies for the demo queries.
//
//   make_fixture <output dir>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "veridex/embedding.hpp"
#include "veridex/errors.hpp"
#include "veridex/knowledge_store.hpp"
#include "veridex/pipeline.hpp"
#include "veridex/random.hpp"

namespace fs = std::filesystem;
using namespace veridex;

namespace {

constexpr std::size_t kDim = 16;
constexpr std::size_t kSamples = 600;
constexpr double kSeparation = 1.5;
constexpr double kSpread = 0.5;
constexpr std::uint64_t kSeed = 7;

const char* const kDomains[] = {"Political", "Culture", "Public health", "Society", "Science", "Life"};
const char* const kTopics[] = {"an election recount", "a museum closure", "a new vaccine", "a subway fare change",
                               "a comet sighting", "a food additive"};

struct Doc {
  const char* id;
  const char* text;
};

const Doc kKnowledge[] = {
    {"kb-water",
     "Health authorities have repeatedly stated that drinking hot water at fixed intervals does not kill viruses "
     "in the throat or the lungs. Viral particles enter cells long before any drink could reach them, and no "
     "clinical trial has shown a protective effect from water temperature."},
    {"kb-5g",
     "Radio waves used by mobile networks are non-ionizing and carry far too little energy to damage DNA or "
     "spread infections. Outbreaks have occurred in regions without any 5G coverage, which rules out the claimed "
     "link between antennas and disease."},
    {"kb-salt",
     "Iodized salt supplies only trace amounts of iodine. Eating large quantities of it provides no protection "
     "against radiation and can instead raise blood pressure; only prescribed potassium iodide tablets are used "
     "in nuclear emergencies."},
    {"kb-vote",
     "The electoral commission publishes every precinct count and the audit trail of paper ballots. Viral "
     "videos claiming that ballots were shredded showed routine disposal of unused sample ballots, as the "
     "commission explained in its public statement."},
    {"kb-banana",
     "网传香蕉和酸奶同吃会中毒，这一说法没有任何科学依据。营养学家指出，两种食物都属于常见的日常食品，"
     "同时食用不会产生有害物质，相关视频属于误导信息。"},
    {"kb-comet",
     "Astronomers track every comet that passes near Earth and publish their orbits. The comet visible this month "
     "will stay millions of kilometers away, so reports that it will cause earthquakes or tides have no basis."},
    {"kb-phone",
     "Phone batteries do not explode from charging overnight when using certified chargers. Modern devices stop "
     "drawing current once the battery is full; incidents usually involve damaged cells or counterfeit adapters."},
    {"kb-metro",
     "交通部门确认地铁票价在今年内不会上调，网上流传的调价通知是伪造文件。官方渠道发布的信息均可在公告页面查询，"
     "市民应以官方发布为准。"},
};

struct Demo {
  const char* id;
  const char* claim;
  const char* chunk;  // its embedding equals this chunk's vector
};

const Demo kDemos[] = {
    {"demo-water", "Drinking a cup of hot water every fifteen minutes washes viruses out of the throat.", "kb-water#0"},
    {"demo-5g", "New 5G antennas are spreading the flu through mobile phone signals.", "kb-5g#0"},
};

const veridex::Exemplar kExemplars[] = {
    {"Eating garlic every morning makes people immune to seasonal flu.", "This message is likely a rumor.",
     "No study shows that garlic prevents influenza; vaccination and hygiene are the measures health agencies "
     "recommend."},
    {"The city library will extend its opening hours on weekends from next month.",
     "This message is likely not a rumor.",
     "The library announced the new schedule on its official website, and the change matches the published budget."},
    {"A photo shows sharks swimming on a flooded highway after the storm.", "This message is likely a rumor.",
     "The same photo has circulated after several storms since 2011 and was identified as a composite image."},
};

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
}

std::vector<double> unit_vector(Rng& rng) {
  std::vector<double> v(kDim);
  double norm = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

nlohmann::ordered_json pipeline_config() {
  nlohmann::ordered_json model = {{"d", kDim}, {"experts", 4}, {"top_k", 2}, {"citizens", 4}, {"classes", 2}};
  return {
      {"paths",
       {{"dataset", "claims.jsonl"},
        {"knowledge", "knowledge.jsonl"},
        {"store", "out/knowledge.vks"},
        {"model", "out/model.vdx"},
        {"reports", "out/reports"},
        {"exemplars", "exemplars.jsonl"},
        {"mock_responses", "mock_responses.json"}}},
      {"embedder", {{"backend", "file-lookup"}, {"d", kDim}, {"source", "embeddings.jsonl"}}},
      {"train",
       {{"learning_rate", 0.01},
        {"batch_size", 32},
        {"epochs", 30},
        {"patience", 5},
        {"seed", kSeed},
        {"train_fraction", 0.8},
        {"parallelism", 1},
        {"model", model}}},
      {"retrieval", {{"top_n", 1}, {"chunk_size", 100}}},
      {"prompt", {{"mode", "cot"}, {"rag", true}, {"exemplars", 2}}},
      {"generation", {{"backend", "mock"}, {"model", "gpt-4"}, {"temperature", 0.0}, {"max_tokens", 512}}},
  };
}

void generate(const fs::path& dir) {
  fs::create_directories(dir);
  Rng rng(kSeed);
  const std::vector<double> direction = unit_vector(rng);

  EmbeddingTable table;
  table.d = kDim;
  std::vector<ClaimRecord> records;
  for (std::size_t i = 0; i < kSamples; ++i) {
    const std::size_t label = i % 2;
    const std::size_t domain = (i / 2) % std::size(kDomains);
    ClaimRecord r;
    char id[16];
    std::snprintf(id, sizeof id, "c%04zu", i);
    r.id = id;
    r.text = std::string(label ? "Unverified post " : "Official notice ") + std::to_string(i) + " about " +
             kTopics[domain] + ".";
    r.label = label;
    r.domain = kDomains[domain];
    std::vector<double> v(kDim);
    const double sign = label ? 1.0 : -1.0;
    for (std::size_t k = 0; k < kDim; ++k) v[k] = sign * kSeparation * direction[k] + kSpread * rng.normal();
    table.add(r.id, std::move(v));
    records.push_back(std::move(r));
  }
  write_dataset(records, dir / "claims.jsonl");

  std::vector<std::string> doc_lines;
  for (const Doc& d : kKnowledge) {
    doc_lines.push_back(nlohmann::json({{"source_id", d.id}, {"text", d.text}}).dump());
    // Debunked material describes rumors, so chunk vectors are drawn from the rumor class.
    for (const auto& chunk : chunk_document(d.text, d.id)) {
      std::vector<double> v(kDim);
      for (std::size_t k = 0; k < kDim; ++k) v[k] = kSeparation * direction[k] + kSpread * rng.normal();
      table.add(chunk.chunk_id, std::move(v));
    }
  }
  write_lines(dir / "knowledge.jsonl", doc_lines);
  for (const Demo& demo : kDemos) {
    const auto* v = table.find(demo.chunk);
    if (!v) throw DataError(std::string("demo chunk missing: ") + demo.chunk);
    table.add(demo.id, *v);
  }
  write_embedding_table(table, dir / "embeddings.jsonl");

  std::vector<std::string> exemplar_lines;
  for (const auto& e : kExemplars) {
    exemplar_lines.push_back(
        nlohmann::json({{"claim", e.claim}, {"verdict", e.verdict}, {"explanation", e.explanation}}).dump());
  }
  write_lines(dir / "exemplars.jsonl", exemplar_lines);
  write_lines(dir / "config.json", {pipeline_config().dump(2)});

  // Canned replies need the trained model, so run the pipeline into a
  // scratch directory and render every demo prompt.
  const fs::path scratch = fs::temp_directory_path() / "veridex_fixture_scratch";
  fs::remove_all(scratch);
  PipelineConfig cfg = PipelineConfig::load(dir / "config.json");
  cfg.paths.store = scratch / "knowledge.vks";
  cfg.paths.model = scratch / "model.vdx";
  cmd_ingest(cfg);
  cmd_train(cfg);
  MockBackend mock;
  for (const Demo& demo : kDemos) {
    for (PromptMode mode : kAllPromptModes) {
      for (bool rag : {true, false}) {
        cfg.mode = mode;
        cfg.rag = rag;
        const DebunkResult r = cmd_debunk(cfg, DebunkOptions{demo.claim, demo.id, true});
        const std::string label = r.json["verdict"]["label"].get<std::string>();
        std::string text = "Conclusion: This message is likely ";
        text += label == "rumor" ? "a rumor." : "not a rumor.";
        text += " Argument: (canned ";
        text += prompt_mode_name(mode);
        text += rag ? ", with retrieval" : ", without retrieval";
        text += ") The classifier finding is consistent with the available reference material.";
        mock.add(r.json["prompt"].get<std::string>(), text);
      }
    }
  }
  mock.save(dir / "mock_responses.json");
  fs::remove_all(scratch);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixture <output dir>\n";
    return 1;
  }
  try {
    generate(argv[1]);
  } catch (const std::exception& e) {
    std::cerr << "make_fixture: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
