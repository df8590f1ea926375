// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0

#include "veridex/decision.hpp"

#include "veridex/errors.hpp"
#include "veridex/expert.hpp"

namespace veridex {

using ad::Tape;
using ad::Tensor;
using ad::Var;

nlohmann::ordered_json Verdict::to_json() const {
  nlohmann::ordered_json probs = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < probabilities.size(); ++i) probs[class_names.at(i)] = probabilities[i];
  return {{"label", label_name()}, {"confidence", confidence}, {"probabilities", probs}};
}

std::vector<std::string> default_class_names(std::size_t classes) {
  if (classes == 2) return {"non-rumor", "rumor"};
  std::vector<std::string> names;
  for (std::size_t i = 0; i < classes; ++i) names.push_back("class_" + std::to_string(i));
  return names;
}

Verdict make_verdict(std::span<const double> probabilities, std::vector<std::string> class_names) {
  if (probabilities.empty()) throw DimensionError("verdict needs at least one class");
  if (class_names.empty()) class_names = default_class_names(probabilities.size());
  if (class_names.size() != probabilities.size()) {
    throw DimensionError("verdict has " + std::to_string(probabilities.size()) + " classes but " +
                         std::to_string(class_names.size()) + " names");
  }
  Verdict v;
  v.probabilities.assign(probabilities.begin(), probabilities.end());
  for (std::size_t i = 1; i < probabilities.size(); ++i) {
    if (probabilities[i] > probabilities[v.label]) v.label = i;
  }
  v.confidence = probabilities[v.label];
  v.class_names = std::move(class_names);
  return v;
}

LinearHead init_linear_head(std::size_t in, std::size_t classes, Rng& rng) {
  if (classes < 2) throw ConfigError("class count must be at least 2");
  return LinearHead{glorot_uniform(in, classes, rng), Tensor::zeros({classes}, true)};
}

VotingWeights identity_voting(std::size_t classes, bool with_expert, bool with_citizen, bool frozen) {
  VotingWeights w;
  if (with_expert) w.expert = Tensor::identity(classes, !frozen);
  if (with_citizen) w.citizen = Tensor::identity(classes, !frozen);
  return w;
}

namespace {

Var head_forward(const char* op, Var x, const LinearHead& head) {
  if (x.value().rank() != 1 || x.size() != head.input_dim()) {
    throw DimensionError(std::string(op) + ": input has shape " + ad::shape_to_string(x.shape()) +
                         ", head expects " + std::to_string(head.input_dim()));
  }
  Tape& tape = *x.tape;
  return ad::softmax(ad::add(ad::matmul(x, tape.parameter(head.weight)), tape.parameter(head.bias)));
}

}  // namespace

Var expert_decide(Var h, const LinearHead& head) { return head_forward("expert_decide", h, head); }

Var citizen_decide(Var c_row, const LinearHead& head) { return head_forward("citizen_decide", c_row, head); }

Var aggregate_citizens(Var citizen_dists, Aggregation aggregation) {
  return aggregation == Aggregation::kMean ? ad::mean_rows(citizen_dists) : ad::sum_rows(citizen_dists);
}

Var vote_logits(std::optional<Var> expert_dist, std::optional<Var> citizen_agg, const VotingWeights& w) {
  std::optional<Var> logits;
  if (w.expert && expert_dist) {
    logits = ad::matmul(expert_dist->tape->parameter(*w.expert), *expert_dist);
  }
  if (w.citizen && citizen_agg) {
    Var term = ad::matmul(citizen_agg->tape->parameter(*w.citizen), *citizen_agg);
    logits = logits ? ad::add(*logits, term) : term;
  }
  if (!logits) throw ConfigError("collective_vote: no voting branch enabled");
  return *logits;
}

std::vector<double> expert_decide(std::span<const double> h, const LinearHead& head) {
  Tape tape;
  Var e = expert_decide(tape.input(Tensor::vector({h.begin(), h.end()})), head);
  return {e.value().values().begin(), e.value().values().end()};
}

std::vector<double> citizen_decide(std::span<const double> c_row, const LinearHead& head) {
  Tape tape;
  Var e = citizen_decide(tape.input(Tensor::vector({c_row.begin(), c_row.end()})), head);
  return {e.value().values().begin(), e.value().values().end()};
}

Verdict collective_vote(std::span<const double> expert_dist, const Tensor& citizen_dists,
                        const VotingWeights& w, std::vector<std::string> class_names,
                        Aggregation aggregation) {
  if (citizen_dists.rank() != 2 || citizen_dists.shape()[0] == 0) {
    throw DimensionError("collective_vote: needs at least one citizen distribution");
  }
  if (citizen_dists.shape()[1] != expert_dist.size()) {
    throw DimensionError("collective_vote: E has " + std::to_string(expert_dist.size()) +
                         " classes, D has " + std::to_string(citizen_dists.shape()[1]));
  }
  Tape tape;
  Var e = tape.input(Tensor::vector({expert_dist.begin(), expert_dist.end()}));
  Var d = tape.input(citizen_dists);
  Var f = ad::softmax(vote_logits(e, aggregate_citizens(d, aggregation), w));
  return make_verdict(f.value().values(), std::move(class_names));
}

Verdict collective_vote(std::span<const double> expert_dist,
                        std::span<const std::vector<double>> citizen_dists, const VotingWeights& w,
                        std::vector<std::string> class_names, Aggregation aggregation) {
  if (citizen_dists.empty()) throw DimensionError("collective_vote: no citizen distributions (n = 0)");
  const std::size_t classes = citizen_dists.front().size();
  std::vector<double> flat;
  flat.reserve(citizen_dists.size() * classes);
  for (const auto& row : citizen_dists) {
    if (row.size() != classes) throw DimensionError("collective_vote: ragged citizen distributions");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return collective_vote(expert_dist, Tensor::matrix(citizen_dists.size(), classes, std::move(flat)), w,
                         std::move(class_names), aggregation);
}

}  // namespace veridex
