// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0
//
// Fixed inputs shared by the unit and acceptance tests.

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "veridex/prompt.hpp"
#include "veridex/trainer.hpp"

namespace fixture {

veridex::PromptBundle prompt_bundle(veridex::PromptMode mode, bool rag);

struct ConfusionCase {
  std::vector<std::vector<std::size_t>> counts;  // [gold][predicted]
  double accuracy, precision, recall, f1;         // hand-computed, percent
};
const std::vector<ConfusionCase>& confusion_cases();

// Two-class model that predicts 0 for input [1, 0] and 1 for [0, 1].
veridex::EccwModel switch_classifier();
// Samples that make switch_classifier produce exactly `counts`.
std::vector<veridex::EmbeddedClaim> samples_for(const std::vector<std::vector<std::size_t>>& counts,
                                                const std::string& domain = "Life");

veridex::EmbeddedClaim sample(std::string id, std::vector<double> v, std::size_t label,
                              std::string domain = "Science");
// Two labelled Gaussian clouds at +-1.5 along a random unit direction.
std::vector<veridex::EmbeddedClaim> two_gaussians(std::size_t n, std::size_t d, std::uint64_t seed);

}  // namespace fixture
