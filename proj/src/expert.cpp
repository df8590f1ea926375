// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0

#include "veridex/expert.hpp"

#include <cmath>

#include "veridex/errors.hpp"

namespace veridex {

using ad::Tape;
using ad::Tensor;
using ad::Var;

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng, bool requires_grad) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> values(fan_in * fan_out);
  for (double& v : values) v = rng.uniform(-limit, limit);
  return Tensor::matrix(fan_in, fan_out, std::move(values), requires_grad);
}

RouterParams init_router(std::size_t d, std::size_t experts, std::size_t top_k, Rng& rng) {
  if (experts == 0 || top_k == 0 || top_k > experts) {
    throw ConfigError("router needs 1 <= top_k <= E (got top_k=" + std::to_string(top_k) +
                      ", E=" + std::to_string(experts) + ")");
  }
  return RouterParams{glorot_uniform(d, experts, rng), top_k};
}

ExpertFfn init_expert(std::size_t d, std::size_t hidden, Rng& rng) {
  ExpertFfn e;
  e.input_proj = glorot_uniform(d, hidden, rng);
  e.output_proj = glorot_uniform(hidden, d, rng);
  return e;
}

namespace {

void check_input(const char* op, std::size_t got, std::size_t want) {
  if (got != want) {
    throw DimensionError(std::string(op) + ": input has " + std::to_string(got) +
                         " components, expected " + std::to_string(want));
  }
}

}  // namespace

Var route(Var s, const RouterParams& router) {
  check_input("route", s.size(), router.input_dim());
  Tape& tape = *s.tape;
  Var probs = ad::softmax(ad::matmul(s, tape.parameter(router.weight)));
  return ad::topk_renormalize(probs, router.top_k);
}

Var expert_forward(Var s, const ExpertFfn& expert) {
  check_input("expert_forward", s.size(), expert.input_proj.shape()[0]);
  Tape& tape = *s.tape;
  Var hidden = ad::relu(ad::matmul(s, tape.parameter(expert.input_proj)));
  return ad::matmul(hidden, tape.parameter(expert.output_proj));
}

Var moe_forward(Var s, const RouterParams& router, std::span<const ExpertFfn> experts, MoeStats* stats) {
  if (experts.size() != router.experts()) {
    throw DimensionError("moe_forward: router has " + std::to_string(router.experts()) +
                         " experts, given " + std::to_string(experts.size()));
  }
  Var gate = route(s, router);
  const std::vector<std::size_t> active = ad::topk_indices(gate.value().values(), router.top_k);
  std::vector<Var> outputs;
  outputs.reserve(active.size());
  for (std::size_t e : active) {
    outputs.push_back(expert_forward(s, experts[e]));
    if (stats) ++stats->expert_evaluations;
  }
  // (k) x (k x d): gate weights of the routed experts times their outputs.
  return ad::matmul(ad::gather(gate, active), ad::stack_rows(outputs));
}

GateVector route(std::span<const double> s, const RouterParams& router) {
  Tape tape;
  Var g = route(tape.input(Tensor::vector({s.begin(), s.end()})), router);
  GateVector out;
  out.weights.assign(g.value().values().begin(), g.value().values().end());
  out.active = ad::topk_indices(out.weights, router.top_k);
  return out;
}

std::vector<double> expert_forward(std::span<const double> s, const ExpertFfn& expert) {
  Tape tape;
  Var y = expert_forward(tape.input(Tensor::vector({s.begin(), s.end()})), expert);
  return {y.value().values().begin(), y.value().values().end()};
}

std::vector<double> moe_forward(std::span<const double> s, const RouterParams& router,
                                std::span<const ExpertFfn> experts, MoeStats* stats) {
  Tape tape;
  Var y = moe_forward(tape.input(Tensor::vector({s.begin(), s.end()})), router, experts, stats);
  return {y.value().values().begin(), y.value().values().end()};
}

}  // namespace veridex
