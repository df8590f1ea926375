// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "veridex/errors.hpp"
#include "veridex/trainer.hpp"

using namespace veridex;

namespace {

ModelConfig small_model() {
  ModelConfig c;
  c.d = 8;
  c.experts = 3;
  c.top_k = 2;
  c.citizens = 3;
  c.classes = 2;
  return c;
}

void check_row(const MetricsRow& row, const fixture::ConfusionCase& e) {
  CHECK(std::abs(row.accuracy - e.accuracy) <= 0.01);
  CHECK(std::abs(row.precision - e.precision) <= 0.01);
  CHECK(std::abs(row.recall - e.recall) <= 0.01);
  CHECK(std::abs(row.f1 - e.f1) <= 0.01);
}

}  // namespace

TEST_CASE("metrics from hand-computed confusion matrices") {
  for (const auto& e : fixture::confusion_cases()) {
    ConfusionMatrix cm(2);
    cm.counts = e.counts;
    const MetricsRow row = metrics_from_confusion(cm);
    check_row(row, e);
    REQUIRE(row.per_class.size() == 2);
    CHECK(std::abs(row.f1 - 50.0 * (row.per_class[0].f1 + row.per_class[1].f1)) <= 1e-9);
  }
  ConfusionMatrix three(3);
  three.counts = {{3, 1, 0}, {0, 2, 2}, {1, 0, 1}};
  const MetricsRow r = metrics_from_confusion(three);
  CHECK(std::abs(r.accuracy - 60.0) <= 0.01);
  CHECK(std::abs(r.precision - 58.33) <= 0.01);
  CHECK(std::abs(r.recall - 58.33) <= 0.01);
  CHECK(std::abs(r.f1 - 57.38) <= 0.01);
  CHECK(std::abs(r.per_class[1].f1 - 4.0 / 7.0) <= 1e-12);
}

TEST_CASE("evaluate reproduces the confusion fixtures through a model") {
  const EccwModel m = fixture::switch_classifier();
  for (const auto& e : fixture::confusion_cases()) {
    const MetricsReport rep = evaluate(m, fixture::samples_for(e.counts));
    REQUIRE(rep.rows.size() == 2);
    CHECK(rep.rows[0].domain == "Life");
    check_row(rep.total(), e);
    CHECK(rep.total().confusion.counts == e.counts);
  }
}

TEST_CASE("evaluate splits domains and writes reports") {
  const EccwModel m = fixture::switch_classifier();
  auto set = fixture::samples_for({{5, 0}, {0, 5}}, "Science");
  const auto more = fixture::samples_for({{6, 1}, {1, 2}}, "Political");
  set.insert(set.end(), more.begin(), more.end());
  const MetricsReport rep = evaluate(m, set);
  REQUIRE(rep.rows.size() == 3);
  CHECK(rep.rows[0].domain == "Political");
  CHECK(rep.rows[1].domain == "Science");
  CHECK(rep.find("Science")->accuracy == 100.0);
  CHECK(rep.total().samples == 20);
  CHECK(std::abs(rep.total().accuracy - 90.0) <= 1e-9);
  CHECK(rep.to_csv().rfind("domain,samples,accuracy,precision,recall,f1\n", 0) == 0);
  CHECK(rep.to_csv().find("Science,10,100.00,100.00,100.00,100.00\n") != std::string::npos);
  CHECK(rep.to_json().size() == 3);
  CHECK(rep.to_table().find("Total") != std::string::npos);
  CHECK_THROWS_AS(evaluate(m, {}), DataError);
}

TEST_CASE("train memorizes ten samples") {
  Rng rng(10);
  std::vector<EmbeddedClaim> set;
  for (int i = 0; i < 10; ++i) {
    std::vector<double> v(8);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    set.push_back(fixture::sample("m" + std::to_string(i), v, rng.below(2)));
  }
  TrainConfig cfg;
  cfg.model = small_model();
  cfg.learning_rate = 0.02;
  cfg.batch_size = 10;
  cfg.epochs = 300;
  cfg.patience = 0;
  cfg.seed = 3;
  const TrainResult r = train(set, cfg);
  CHECK(accuracy(r.model, set) == 1.0);
  CHECK(r.epoch_losses.size() == 300);
}

TEST_CASE("full-batch loss is non-increasing after epoch 3 on separable data") {
  const auto set = fixture::two_gaussians(200, 8, 5);
  TrainConfig cfg;
  cfg.model = small_model();
  cfg.learning_rate = 0.005;
  cfg.batch_size = set.size();
  cfg.epochs = 40;
  cfg.patience = 0;
  cfg.seed = 1;
  const TrainResult r = train(set, cfg);
  REQUIRE(r.epoch_losses.size() == 40);
  for (std::size_t e = 3; e + 1 < r.epoch_losses.size(); ++e) {
    CAPTURE(e);
    CHECK(r.epoch_losses[e + 1] <= r.epoch_losses[e]);
  }
  CHECK(r.epoch_losses.back() < r.epoch_losses.front());
}

TEST_CASE("early stopping honours patience") {
  const auto set = fixture::two_gaussians(40, 8, 6);
  TrainConfig cfg;
  cfg.model = small_model();
  cfg.learning_rate = 0.5;
  cfg.batch_size = 4;
  cfg.epochs = 200;
  cfg.patience = 2;
  cfg.seed = 2;
  const TrainResult r = train(set, cfg);
  if (r.early_stopped) {
    CHECK(r.epoch_losses.size() < 200);
  } else {
    CHECK(r.epoch_losses.size() == 200);
  }
}

TEST_CASE("training is deterministic per seed") {
  const auto set = fixture::two_gaussians(60, 8, 7);
  TrainConfig cfg;
  cfg.model = small_model();
  cfg.learning_rate = 0.01;
  cfg.batch_size = 16;
  cfg.epochs = 5;
  cfg.seed = 9;
  TrainResult a = train(set, cfg), b = train(set, cfg);
  CHECK(a.epoch_losses == b.epoch_losses);
  auto pa = a.model.parameters(), pb = b.model.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(*pa[i].tensor == *pb[i].tensor);
  CHECK(evaluate(a.model, set).to_csv() == evaluate(b.model, set).to_csv());
  cfg.seed = 10;
  CHECK(train(set, cfg).epoch_losses != a.epoch_losses);
}

TEST_CASE("train rejects bad inputs") {
  TrainConfig cfg;
  cfg.model = small_model();
  CHECK_THROWS_AS(train({}, cfg), DataError);
  CHECK_THROWS_AS(train({fixture::sample("x", std::vector<double>(7, 0.0), 0)}, cfg), DimensionError);
  CHECK_THROWS_AS(train({fixture::sample("x", std::vector<double>(8, 0.0), 2)}, cfg), DataError);
  TrainConfig bad = cfg;
  bad.learning_rate = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  cfg.epochs = 1;
  std::vector<double> poisoned(8, 0.5);
  poisoned[3] = std::nan("");
  CHECK_THROWS_WITH_AS(train({fixture::sample("x", poisoned, 1)}, cfg), doctest::Contains("'x'"), DataError);
  cfg.learning_rate = 1e300;
  cfg.epochs = 5;
  cfg.patience = 0;
  CHECK_THROWS_WITH_AS(train(fixture::two_gaussians(8, 8, 1), cfg), doctest::Contains("at epoch"), NumericError);
}

TEST_CASE("train config json round trip") {
  TrainConfig cfg;
  cfg.learning_rate = 0.25;
  cfg.epochs = 3;
  cfg.model = small_model();
  const TrainConfig back = TrainConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());
  CHECK(TrainConfig::from_json(nlohmann::json::object()).batch_size == 1024);
}

TEST_CASE("ablation emits four rows with matching branch sizes") {
  const auto set = fixture::two_gaussians(80, 8, 8);
  TrainConfig cfg;
  cfg.model = small_model();
  cfg.learning_rate = 0.01;
  cfg.batch_size = 16;
  cfg.epochs = 3;
  cfg.seed = 4;
  cfg.parallelism = 2;
  const AblationTable t = ablate(cfg, set);
  REQUIRE(t.rows.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(t.rows[i].variant == kAllVariants[i]);
  const auto count = [&](Variant v, const char* prefix) {
    ModelConfig c = small_model();
    c.variant = v;
    return EccwModel::initialize(c, 0).parameter_count(prefix);
  };
  CHECK(count(Variant::kNoCitizen, "citizen.") == 0);
  CHECK(count(Variant::kNoExpert, "expert.") == 0);
  CHECK(t.at(Variant::kNoCitizen).parameter_count == t.at(Variant::kFull).parameter_count - count(Variant::kFull, "citizen.") -
                                                         count(Variant::kFull, "voting.citizen"));
  CHECK(t.at(Variant::kNoWeightedVoting).parameter_count == t.at(Variant::kFull).parameter_count);
  const std::string csv = t.to_csv();
  CHECK(csv.rfind("variant,accuracy,precision,recall,f1\n", 0) == 0);
  for (const char* name : {"full", "no_citizen", "no_expert", "no_weighted_voting"})
    CHECK(csv.find(std::string("\n") + name + ",") != std::string::npos);
  CHECK(t.to_json().size() == 4);
  cfg.parallelism = 1;
  CHECK(ablate(cfg, set).to_csv() == csv);
}

TEST_CASE("sweep grid is deterministic and round-trips through csv") {
  const auto set = fixture::two_gaussians(60, 8, 9);
  TrainConfig cfg;
  cfg.model = small_model();
  cfg.learning_rate = 0.01;
  cfg.batch_size = 16;
  cfg.epochs = 2;
  cfg.seed = 5;
  const SweepGrid a = sweep({1, 2, 3}, {1, 2, 3}, cfg, set);
  REQUIRE(a.cells.size() == 3);
  for (const auto& row : a.cells) {
    REQUIRE(row.size() == 3);
    for (const auto& cell : row) CHECK(cell.accuracy.has_value());
  }
  cfg.parallelism = 3;
  const SweepGrid b = sweep({1, 2, 3}, {1, 2, 3}, cfg, set);
  CHECK(a == b);
  CHECK(a.to_csv() == b.to_csv());
  CHECK(SweepGrid::from_csv(a.to_csv()) == a);
  CHECK(a.to_csv().rfind("experts\\citizens,1,2,3\n", 0) == 0);

  SweepGrid f = a;
  f.cells[1][2] = SweepCell{std::nullopt, "boom"};
  const SweepGrid back = SweepGrid::from_csv(f.to_csv());
  CHECK(!back.cells[1][2].accuracy);
  CHECK(back.cells[0][0].accuracy == a.cells[0][0].accuracy);
  CHECK_THROWS(SweepGrid::from_csv("nonsense"));
}

TEST_CASE("parallel_for visits every index and rethrows") {
  std::vector<int> hits(50, 0);
  parallel_for(50, 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                    if (i == 7) throw DataError("cell 7");
                  }),
                  DataError);
}
