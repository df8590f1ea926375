// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0
//
// Domain-expert branch: a softmax router picks a sparse set of two-layer
// ReLU experts and blends their outputs.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "veridex/autodiff.hpp"
#include "veridex/random.hpp"

namespace veridex {

struct RouterParams {
  ad::Tensor weight;  // d x E
  std::size_t top_k = 2;

  std::size_t input_dim() const { return weight.shape()[0]; }
  std::size_t experts() const { return weight.shape()[1]; }
};

// FFN(s) = ReLU(s * input_proj) * output_proj; no biases.
struct ExpertFfn {
  ad::Tensor input_proj;   // d x h_e
  ad::Tensor output_proj;  // h_e x d
};

struct GateVector {
  std::vector<double> weights;  // length E; exactly top_k entries non-zero
  std::vector<std::size_t> active;  // routed experts, descending weight
};

// Counts expert evaluations so sparsity can be audited.
struct MoeStats {
  std::size_t expert_evaluations = 0;
};

RouterParams init_router(std::size_t d, std::size_t experts, std::size_t top_k, Rng& rng);
ExpertFfn init_expert(std::size_t d, std::size_t hidden, Rng& rng);

// softmax(s * W), keep the top_k entries (ties to the lower index), renormalize.
GateVector route(std::span<const double> s, const RouterParams& router);
std::vector<double> expert_forward(std::span<const double> s, const ExpertFfn& expert);
// H = sum over routed experts of gate_e * FFN_e(s). Unrouted experts are not
// evaluated.
std::vector<double> moe_forward(std::span<const double> s, const RouterParams& router,
                                std::span<const ExpertFfn> experts, MoeStats* stats = nullptr);

ad::Var route(ad::Var s, const RouterParams& router);
ad::Var expert_forward(ad::Var s, const ExpertFfn& expert);
ad::Var moe_forward(ad::Var s, const RouterParams& router, std::span<const ExpertFfn> experts,
                    MoeStats* stats = nullptr);

// Glorot-uniform matrix of shape fan_in x fan_out.
ad::Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng, bool requires_grad = true);

}  // namespace veridex
