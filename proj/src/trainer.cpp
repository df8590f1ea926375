// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0

#include "veridex/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

#include "veridex/errors.hpp"

namespace veridex {

using ad::Tape;
using ad::Tensor;
using ad::Var;

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (parallelism == 0) throw ConfigError("parallelism must be positive");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw ConfigError("train_fraction must be in (0, 1]");
  model.validate();
}

nlohmann::ordered_json TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["learning_rate"] = learning_rate;
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["patience"] = patience;
  j["seed"] = seed;
  j["train_fraction"] = train_fraction;
  j["parallelism"] = parallelism;
  j["model"] = model.to_json();
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.patience = j.value("patience", c.patience);
    c.seed = j.value("seed", c.seed);
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    c.parallelism = j.value("parallelism", c.parallelism);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  if (j.contains("model")) c.model = ModelConfig::from_json(j["model"]);
  return c;
}

// ---------------------------------------------------------------------------

TrainResult train(const std::vector<EmbeddedClaim>& train_set, const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.empty()) throw DataError("train: empty training set");
  for (const auto& s : train_set) {
    if (s.vector.size() != cfg.model.d) {
      throw DimensionError("train: sample '" + s.record.id + "' has " + std::to_string(s.vector.size()) +
                           " components, expected d=" + std::to_string(cfg.model.d));
    }
    if (s.record.label >= cfg.model.classes) {
      throw DataError("train: sample '" + s.record.id + "' has label " + std::to_string(s.record.label) +
                      " outside the " + std::to_string(cfg.model.classes) + " classes");
    }
    for (double x : s.vector) {
      if (!std::isfinite(x)) throw DataError("train: sample '" + s.record.id + "' has a non-finite component");
    }
  }

  TrainResult result{EccwModel::initialize(cfg.model, cfg.seed), {}, false};
  EccwModel& model = result.model;
  std::vector<Tensor*> params = model.trainable();
  ad::AdamState adam(ad::AdamOptions{.learning_rate = cfg.learning_rate});
  Rng order_rng(mix_seed(cfg.seed ^ 0x53485546ULL));  // "SHUF"
  Rng noise_rng(mix_seed(cfg.seed ^ 0x4e4f4953ULL));  // "NOIS"
  const bool noisy = cfg.model.citizen_noise_std > 0.0;

  std::vector<Tensor> inputs;
  inputs.reserve(train_set.size());
  for (const auto& s : train_set) inputs.push_back(Tensor::vector(s.vector));

  const std::size_t n = train_set.size();
  const std::size_t batch = std::min(cfg.batch_size, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    order_rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0, b = 0; start < n; start += batch, ++b) {
      const std::size_t end = std::min(start + batch, n);
      const double inv = 1.0 / static_cast<double>(end - start);
      for (Tensor* p : params) p->zero_grad();
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t idx = order[i];
        const auto where = [&] {
          return " at epoch " + std::to_string(epoch + 1) + ", batch " + std::to_string(b + 1) + " (sample '" +
                 train_set[idx].record.id + "')";
        };
        Tape tape;
        std::optional<Var> loss_var;
        try {
          ForwardTrace tr = forward_trace(tape.input(inputs[idx]), model,
                                          ForwardOptions{nullptr, noisy ? &noise_rng : nullptr});
          loss_var = ad::cross_entropy(tr.logits, train_set[idx].record.label);
        } catch (const NumericError& e) {
          throw NumericError(e.what() + where());
        }
        Var loss = *loss_var;
        const double value = loss.value()[0];
        if (!std::isfinite(value)) throw NumericError("non-finite loss" + where());
        epoch_loss += value;
        tape.backward(ad::scale(loss, inv));
      }
      ad::adam_step(params, adam);
    }
    epoch_loss /= static_cast<double>(n);
    result.epoch_losses.push_back(epoch_loss);
    if (epoch_loss < best) {
      best = epoch_loss;
      stale = 0;
    } else if (cfg.patience > 0 && ++stale >= cfg.patience) {
      result.early_stopped = true;
      break;
    }
  }
  for (Tensor* p : params) p->clear_grad();
  return result;
}

double accuracy(const EccwModel& model, const std::vector<EmbeddedClaim>& samples) {
  if (samples.empty()) throw DataError("accuracy: no samples");
  std::size_t correct = 0;
  for (const auto& s : samples) correct += forward_full(s.vector, model).label == s.record.label;
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

// ---------------------------------------------------------------------------

std::size_t ConfusionMatrix::total() const {
  std::size_t t = 0;
  for (const auto& row : counts) t += std::accumulate(row.begin(), row.end(), std::size_t{0});
  return t;
}

MetricsRow metrics_from_confusion(const ConfusionMatrix& confusion, std::string domain) {
  const std::size_t C = confusion.classes();
  MetricsRow row;
  row.domain = std::move(domain);
  row.confusion = confusion;
  row.samples = confusion.total();
  std::size_t correct = 0;
  for (std::size_t c = 0; c < C; ++c) correct += confusion.counts[c][c];
  row.accuracy = row.samples ? 100.0 * static_cast<double>(correct) / static_cast<double>(row.samples) : 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    std::size_t predicted = 0, actual = 0;
    for (std::size_t k = 0; k < C; ++k) {
      predicted += confusion.counts[k][c];
      actual += confusion.counts[c][k];
    }
    const double tp = static_cast<double>(confusion.counts[c][c]);
    ClassMetrics m;
    m.precision = predicted ? tp / static_cast<double>(predicted) : 0.0;
    m.recall = actual ? tp / static_cast<double>(actual) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    row.per_class.push_back(m);
    row.precision += m.precision;
    row.recall += m.recall;
    row.f1 += m.f1;
  }
  const double scale = 100.0 / static_cast<double>(C);
  row.precision *= scale;
  row.recall *= scale;
  row.f1 *= scale;
  return row;
}

const MetricsRow* MetricsReport::find(const std::string& domain) const {
  for (const auto& r : rows) {
    if (r.domain == domain) return &r;
  }
  return nullptr;
}

namespace {

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

nlohmann::ordered_json row_json(const MetricsRow& r) {
  nlohmann::ordered_json j;
  j["domain"] = r.domain;
  j["samples"] = r.samples;
  j["accuracy"] = r.accuracy;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["confusion"] = r.confusion.counts;
  return j;
}

}  // namespace

std::string MetricsReport::to_csv() const {
  std::ostringstream os;
  os << "domain,samples,accuracy,precision,recall,f1\n";
  for (const auto& r : rows) {
    os << r.domain << ',' << r.samples << ',' << fixed2(r.accuracy) << ',' << fixed2(r.precision) << ','
       << fixed2(r.recall) << ',' << fixed2(r.f1) << '\n';
  }
  return os.str();
}

nlohmann::ordered_json MetricsReport::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& r : rows) j.push_back(row_json(r));
  return j;
}

std::string MetricsReport::to_table() const {
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof line, "%-16s %8s %8s %8s %8s %8s\n", "Domain", "N", "Acc", "Pre", "Rec", "F1");
  os << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-16s %8zu %8.2f %8.2f %8.2f %8.2f\n", r.domain.c_str(), r.samples,
                  r.accuracy, r.precision, r.recall, r.f1);
    os << line;
  }
  return os.str();
}

MetricsReport evaluate(const EccwModel& model, const std::vector<EmbeddedClaim>& test_set) {
  if (test_set.empty()) throw DataError("evaluate: empty test set");
  const std::size_t C = model.config.classes;
  std::map<std::string, ConfusionMatrix> by_domain;
  ConfusionMatrix total(C);
  for (const auto& s : test_set) {
    if (s.record.label >= C) throw DataError("evaluate: label out of range for '" + s.record.id + "'");
    const std::size_t predicted = forward_full(s.vector, model).label;
    auto [it, _] = by_domain.try_emplace(s.record.domain, C);
    it->second.add(s.record.label, predicted);
    total.add(s.record.label, predicted);
  }
  MetricsReport report;
  for (const auto& [domain, cm] : by_domain) report.rows.push_back(metrics_from_confusion(cm, domain));
  report.rows.push_back(metrics_from_confusion(total, "Total"));
  return report;
}

// ---------------------------------------------------------------------------

void parallel_for(std::size_t count, std::size_t parallelism, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(std::max<std::size_t>(parallelism, 1), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

const AblationRow& AblationTable::at(Variant v) const {
  for (const auto& r : rows) {
    if (r.variant == v) return r;
  }
  throw Error("ablation table has no row for " + std::string(variant_name(v)));
}

std::string AblationTable::to_csv() const {
  std::ostringstream os;
  os << "variant,accuracy,precision,recall,f1\n";
  for (const auto& r : rows) {
    os << variant_name(r.variant) << ',' << fixed2(r.total.accuracy) << ',' << fixed2(r.total.precision) << ','
       << fixed2(r.total.recall) << ',' << fixed2(r.total.f1) << '\n';
  }
  return os.str();
}

nlohmann::ordered_json AblationTable::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json row = row_json(r.total);
    row.erase("domain");
    row["variant"] = variant_name(r.variant);
    row["parameters"] = r.parameter_count;
    j.push_back(std::move(row));
  }
  return j;
}

AblationTable ablate(const TrainConfig& base, const std::vector<EmbeddedClaim>& dataset) {
  base.validate();
  const auto split = split_dataset(dataset, base.train_fraction, base.seed);
  if (split.test.empty()) throw DataError("ablate: test split is empty; lower train_fraction");
  AblationTable table;
  table.rows.resize(std::size(kAllVariants));
  parallel_for(table.rows.size(), base.parallelism, [&](std::size_t i) {
    TrainConfig cfg = base;
    cfg.model.variant = kAllVariants[i];
    TrainResult trained = train(split.train, cfg);
    table.rows[i] = AblationRow{kAllVariants[i], evaluate(trained.model, split.test).total(),
                                trained.model.parameter_count()};
  });
  return table;
}

std::string SweepGrid::to_csv() const {
  std::ostringstream os;
  os << "experts\\citizens";
  for (std::size_t n : citizen_counts) os << ',' << n;
  os << '\n';
  for (std::size_t e = 0; e < expert_counts.size(); ++e) {
    os << expert_counts[e];
    for (const SweepCell& cell : cells[e]) os << ',' << (cell.accuracy ? shortest(*cell.accuracy) : "failed");
    os << '\n';
  }
  return os.str();
}

namespace {

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
  return out;
}

std::size_t parse_count(const std::string& s) {
  std::size_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw DataError("sweep CSV: bad count '" + s + "'");
  return v;
}

}  // namespace

SweepGrid SweepGrid::from_csv(std::string_view csv) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < csv.size()) {
    std::size_t end = csv.find('\n', start);
    if (end == std::string_view::npos) end = csv.size();
    if (end > start) lines.push_back(csv.substr(start, end - start));
    start = end + 1;
  }
  if (lines.empty()) throw DataError("sweep CSV: empty");
  SweepGrid grid;
  const auto header = split_csv_line(lines[0]);
  if (header.empty() || header[0] != "experts\\citizens") throw DataError("sweep CSV: bad header");
  for (std::size_t i = 1; i < header.size(); ++i) grid.citizen_counts.push_back(parse_count(header[i]));
  for (std::size_t l = 1; l < lines.size(); ++l) {
    const auto fields = split_csv_line(lines[l]);
    if (fields.size() != header.size()) throw DataError("sweep CSV: row " + std::to_string(l) + " has wrong width");
    grid.expert_counts.push_back(parse_count(fields[0]));
    std::vector<SweepCell> row;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      SweepCell cell;
      if (fields[i] != "failed") {
        double v = 0.0;
        auto res = std::from_chars(fields[i].data(), fields[i].data() + fields[i].size(), v);
        if (res.ec != std::errc() || res.ptr != fields[i].data() + fields[i].size()) {
          throw DataError("sweep CSV: bad value '" + fields[i] + "'");
        }
        cell.accuracy = v;
      }
      row.push_back(std::move(cell));
    }
    grid.cells.push_back(std::move(row));
  }
  return grid;
}

bool operator==(const SweepGrid& a, const SweepGrid& b) {
  if (a.expert_counts != b.expert_counts || a.citizen_counts != b.citizen_counts) return false;
  if (a.cells.size() != b.cells.size()) return false;
  for (std::size_t e = 0; e < a.cells.size(); ++e) {
    if (a.cells[e].size() != b.cells[e].size()) return false;
    for (std::size_t n = 0; n < a.cells[e].size(); ++n) {
      if (a.cells[e][n].accuracy != b.cells[e][n].accuracy) return false;
    }
  }
  return true;
}

SweepGrid sweep(const std::vector<std::size_t>& expert_counts, const std::vector<std::size_t>& citizen_counts,
                const TrainConfig& base, const std::vector<EmbeddedClaim>& dataset) {
  if (expert_counts.empty() || citizen_counts.empty()) throw ConfigError("sweep: empty count list");
  const auto split = split_dataset(dataset, base.train_fraction, base.seed);
  if (split.test.empty()) throw DataError("sweep: test split is empty; lower train_fraction");
  SweepGrid grid{expert_counts, citizen_counts,
                 std::vector<std::vector<SweepCell>>(expert_counts.size(),
                                                     std::vector<SweepCell>(citizen_counts.size()))};
  const std::size_t columns = citizen_counts.size();
  parallel_for(expert_counts.size() * columns, base.parallelism, [&](std::size_t i) {
    SweepCell& cell = grid.cells[i / columns][i % columns];
    try {
      TrainConfig cfg = base;
      cfg.model.experts = expert_counts[i / columns];
      cfg.model.citizens = citizen_counts[i % columns];
      cfg.model.top_k = std::min(cfg.model.top_k, cfg.model.experts);
      // A custom adjacency is sized for the base citizen count only.
      if (cfg.model.adjacency.size() != cfg.model.citizens * cfg.model.citizens) cfg.model.adjacency.clear();
      TrainResult trained = train(split.train, cfg);
      cell.accuracy = evaluate(trained.model, split.test).total().accuracy;
    } catch (const std::exception& e) {
      cell.accuracy.reset();
      cell.error = e.what();
    }
  });
  return grid;
}

}  // namespace veridex
