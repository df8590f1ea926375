// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0
//
// Collective decision: class heads turn the expert output and each citizen
// cognition into distributions, and learned voting matrices blend them.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "veridex/autodiff.hpp"
#include "veridex/random.hpp"

namespace veridex {

// y = x * weight + bias.
struct LinearHead {
  ad::Tensor weight;  // in x C
  ad::Tensor bias;    // C

  std::size_t input_dim() const { return weight.shape()[0]; }
  std::size_t classes() const { return weight.shape()[1]; }
};

// Either matrix may be absent when its branch is ablated away.
struct VotingWeights {
  std::optional<ad::Tensor> expert;   // C x C
  std::optional<ad::Tensor> citizen;  // C x C
};

enum class Aggregation { kMean, kSum };

struct Verdict {
  std::vector<double> probabilities;
  std::size_t label = 0;
  double confidence = 0.0;
  std::vector<std::string> class_names;

  const std::string& label_name() const { return class_names.at(label); }
  nlohmann::ordered_json to_json() const;
};

std::vector<std::string> default_class_names(std::size_t classes);

// Argmax with ties to the lower index.
Verdict make_verdict(std::span<const double> probabilities, std::vector<std::string> class_names);

LinearHead init_linear_head(std::size_t in, std::size_t classes, Rng& rng);
// Identity voting matrices, trainable unless `frozen`.
VotingWeights identity_voting(std::size_t classes, bool with_expert, bool with_citizen, bool frozen);

// E = softmax(h * W + b).
ad::Var expert_decide(ad::Var h, const LinearHead& head);
// D_j = softmax(c_j * W + b) for one citizen row of width 2d.
ad::Var citizen_decide(ad::Var c_row, const LinearHead& head);
// Voting logits W_e * E + W_c * D_agg. A term is dropped when either its
// matrix or its distribution is absent.
ad::Var vote_logits(std::optional<ad::Var> expert_dist, std::optional<ad::Var> citizen_agg,
                    const VotingWeights& w);
// Aggregated citizen distribution (mean or sum of the rows of D).
ad::Var aggregate_citizens(ad::Var citizen_dists, Aggregation aggregation);

std::vector<double> expert_decide(std::span<const double> h, const LinearHead& head);
std::vector<double> citizen_decide(std::span<const double> c_row, const LinearHead& head);
// F = softmax(W_e * E + W_c * mean(D)). D is n x C.
Verdict collective_vote(std::span<const double> expert_dist, const ad::Tensor& citizen_dists,
                        const VotingWeights& w, std::vector<std::string> class_names = {},
                        Aggregation aggregation = Aggregation::kMean);
// Same, with D given as a list of rows; an empty list is an error.
Verdict collective_vote(std::span<const double> expert_dist,
                        std::span<const std::vector<double>> citizen_dists, const VotingWeights& w,
                        std::vector<std::string> class_names = {},
                        Aggregation aggregation = Aggregation::kMean);

}  // namespace veridex
