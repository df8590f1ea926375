// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0
//
// Training, evaluation metrics, ablations and the experts x citizens sweep.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "veridex/embedding.hpp"
#include "veridex/model.hpp"

namespace veridex {

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 1024;  // clamped to the training-set size
  std::size_t epochs = 50;
  std::size_t patience = 10;      // stop after this many epochs without a lower loss; 0 disables
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  std::size_t parallelism = 1;    // worker threads for ablate/sweep cells
  ModelConfig model;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  // Keys absent from `j` keep their defaults.
  static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainResult {
  EccwModel model;
  std::vector<double> epoch_losses;  // mean cross-entropy per epoch
  bool early_stopped = false;
};

// Mini-batch cross-entropy on the final verdict with Adam. Gradients are
// averaged over each batch; the sample order is reshuffled every epoch from
// the seed. Throws NumericError naming the epoch and batch on a NaN loss.
TrainResult train(const std::vector<EmbeddedClaim>& train_set, const TrainConfig& cfg);

// Fraction of samples whose verdict label matches the gold label, in [0, 1].
double accuracy(const EccwModel& model, const std::vector<EmbeddedClaim>& samples);

// counts[gold][predicted].
struct ConfusionMatrix {
  std::vector<std::vector<std::size_t>> counts;

  explicit ConfusionMatrix(std::size_t classes = 2)
      : counts(classes, std::vector<std::size_t>(classes, 0)) {}
  std::size_t classes() const { return counts.size(); }
  std::size_t total() const;
  void add(std::size_t gold, std::size_t predicted) { ++counts.at(gold).at(predicted); }
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// All metric values are percentages in [0, 100].
struct MetricsRow {
  std::string domain;
  std::size_t samples = 0;
  double accuracy = 0.0;
  double precision = 0.0;  // macro
  double recall = 0.0;     // macro
  double f1 = 0.0;         // macro: unweighted mean of per-class F1
  std::vector<ClassMetrics> per_class;
  ConfusionMatrix confusion;
};

// Precision of a class never predicted (and recall of a class never present)
// is 0, as is F1 when precision + recall = 0.
MetricsRow metrics_from_confusion(const ConfusionMatrix& confusion, std::string domain = "Total");

struct MetricsReport {
  std::vector<MetricsRow> rows;  // domains in tag order, then "Total"

  const MetricsRow& total() const { return rows.back(); }
  const MetricsRow* find(const std::string& domain) const;
  std::string to_csv() const;
  nlohmann::ordered_json to_json() const;
  // Fixed-width grid shaped like a per-domain results table.
  std::string to_table() const;
};

MetricsReport evaluate(const EccwModel& model, const std::vector<EmbeddedClaim>& test_set);

struct AblationRow {
  Variant variant;
  MetricsRow total;
  std::size_t parameter_count = 0;
};

struct AblationTable {
  std::vector<AblationRow> rows;  // full, no_citizen, no_expert, no_weighted_voting

  const AblationRow& at(Variant v) const;
  std::string to_csv() const;
  nlohmann::ordered_json to_json() const;
};

// Splits `dataset` with (base.train_fraction, base.seed), then trains and
// evaluates every variant on the same split.
AblationTable ablate(const TrainConfig& base, const std::vector<EmbeddedClaim>& dataset);

struct SweepCell {
  std::optional<double> accuracy;  // percent; empty when the cell failed
  std::string error;
};

struct SweepGrid {
  std::vector<std::size_t> expert_counts;
  std::vector<std::size_t> citizen_counts;
  std::vector<std::vector<SweepCell>> cells;  // [expert index][citizen index]

  // Header "experts\citizens,<n...>", one row per expert count; failed cells
  // are written as "failed". Values use shortest round-trip formatting.
  std::string to_csv() const;
  static SweepGrid from_csv(std::string_view csv);
  friend bool operator==(const SweepGrid& a, const SweepGrid& b);
};

// One model per (E, n) cell; top_k is clamped to E. Cell failures are
// recorded and the sweep continues.
SweepGrid sweep(const std::vector<std::size_t>& expert_counts, const std::vector<std::size_t>& citizen_counts,
                const TrainConfig& base, const std::vector<EmbeddedClaim>& dataset);

// Runs fn(0..count-1) on up to `parallelism` threads. Each index is handled
// by exactly one worker; callers write results by index.
void parallel_for(std::size_t count, std::size_t parallelism, const std::function<void(std::size_t)>& fn);

}  // namespace veridex
