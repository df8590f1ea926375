// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0
//
// The full expert-citizen classifier: configuration, parameters and the
// composed forward pass.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "veridex/autodiff.hpp"
#include "veridex/citizen.hpp"
#include "veridex/decision.hpp"
#include "veridex/expert.hpp"

namespace veridex {

enum class Variant {
  kFull,
  kNoCitizen,         // expert branch only: F = softmax(W_e * E)
  kNoExpert,          // citizen branch only: F = softmax(W_c * mean(D))
  kNoWeightedVoting,  // W_e = W_c = I, frozen: F = softmax(E + mean(D))
};

inline constexpr Variant kAllVariants[] = {Variant::kFull, Variant::kNoCitizen, Variant::kNoExpert,
                                           Variant::kNoWeightedVoting};

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);

struct ModelConfig {
  std::size_t d = 768;
  std::size_t experts = 10;
  std::size_t top_k = 2;
  std::size_t expert_hidden = 0;  // 0: same as d
  std::size_t citizens = 10;
  std::size_t lstm_hidden = 0;    // 0: d / 2 (at least 1)
  std::size_t classes = 2;
  bool attention_scaling = true;
  bool per_citizen_heads = false;
  double citizen_noise_std = 0.0;  // training-time only
  Aggregation aggregation = Aggregation::kMean;
  Variant variant = Variant::kFull;
  std::vector<std::string> class_names;  // empty: defaults
  // n x n 0/1 matrix (row-major); empty means fully connected.
  std::vector<double> adjacency;

  std::size_t resolved_expert_hidden() const { return expert_hidden ? expert_hidden : d; }
  std::size_t resolved_lstm_hidden() const { return lstm_hidden ? lstm_hidden : std::max<std::size_t>(1, d / 2); }
  bool has_experts() const { return variant != Variant::kNoExpert; }
  bool has_citizens() const { return variant != Variant::kNoCitizen; }

  // Throws ConfigError on inconsistent settings.
  void validate() const;
  nlohmann::ordered_json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

struct ExpertBranch {
  RouterParams router;
  std::vector<ExpertFfn> experts;
  LinearHead head;  // d -> C
};

struct CitizenBranch {
  CitizenResolver resolver;
  SequenceEncoder encoder;
  GraphAttention attention;
  std::vector<LinearHead> heads;  // one shared head, or one per citizen; 2d -> C
};

struct NamedParameter {
  std::string name;
  ad::Tensor* tensor;
};

struct EccwModel {
  ModelConfig config;
  std::optional<ExpertBranch> expert;
  std::optional<CitizenBranch> citizen;
  VotingWeights voting;

  // Glorot-uniform weights, zero biases, identity voting. Each branch draws
  // from its own seed stream, so variants built from one seed share the
  // initial weights of the branches they keep.
  static EccwModel initialize(const ModelConfig& config, std::uint64_t seed);

  // Every parameter in a fixed order with dotted names ("expert.router",
  // "citizen.mlp.3.hidden_weight", "voting.expert", ...).
  std::vector<NamedParameter> parameters();
  std::vector<std::pair<std::string, const ad::Tensor*>> parameters() const;
  // Parameters that the optimizer updates.
  std::vector<ad::Tensor*> trainable();
  std::size_t parameter_count() const;
  std::size_t parameter_count(std::string_view prefix) const;
  std::vector<std::string> class_names() const;
};

struct ForwardOptions {
  MoeStats* stats = nullptr;
  Rng* noise_rng = nullptr;  // enables citizen input noise when set
};

// Intermediate values of one forward pass; branch-specific entries are
// absent when the branch is ablated.
struct ForwardTrace {
  std::optional<ad::Var> gate;
  std::optional<ad::Var> expert_output;  // H
  std::optional<ad::Var> expert_dist;    // E
  std::optional<ad::Var> initial;        // P
  std::optional<ad::Var> encoded;        // M
  std::optional<ad::Var> attended;       // N
  std::optional<ad::Var> fused;          // C
  std::optional<ad::Var> citizen_dists;  // D (n x C)
  std::optional<ad::Var> citizen_mean;   // aggregated D
  ad::Var logits;
  ad::Var probabilities;                 // F
};

ForwardTrace forward_trace(ad::Var s, const EccwModel& model, const ForwardOptions& options = {});
Verdict forward_full(std::span<const double> s, const EccwModel& model);

}  // namespace veridex
