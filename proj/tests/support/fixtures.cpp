// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0

#include "fixtures.hpp"

#include <cmath>
#include <string>

namespace fixture {

using veridex::ad::Tensor;

namespace {

veridex::RetrievalResult hit(std::string id, std::string text, double score) {
  veridex::RetrievalResult r;
  r.chunk.chunk_id = id;
  r.chunk.source_id = id.substr(0, id.find('#'));
  r.chunk.text = std::move(text);
  r.chunk.vector = {1.0, 0.0};
  r.score = score;
  return r;
}

}  // namespace

veridex::PromptBundle prompt_bundle(veridex::PromptMode mode, bool rag) {
  veridex::PromptBundle b;
  b.verdict = veridex::make_verdict(std::vector<double>{0.1234, 0.8766}, {});
  b.knowledge = {hit("kb-water#0", "Hot water does not kill influenza viruses inside the body.", 0.91234),
                 hit("kb-flu#2", "Seasonal flu is treated with rest, fluids and, in some cases, antivirals.", 0.5)};
  b.query = "Drinking hot water every hour cures the flu.";
  b.mode = mode;
  b.rag_enabled = rag;
  b.exemplars = {{"Vaccines contain microchips.", "rumor", "Vaccine ingredients are published and contain no electronics."},
                 {"Handwashing lowers infection rates.", "non-rumor", "Controlled studies show fewer infections."}};
  return b;
}

const std::vector<ConfusionCase>& confusion_cases() {
  static const std::vector<ConfusionCase> cases = {
      // TP=2 FP=1 FN=1 TN=6 with class 1 positive
      {{{6, 1}, {1, 2}}, 80.0, 76.19, 76.19, 76.19},
      {{{5, 0}, {0, 5}}, 100.0, 100.0, 100.0, 100.0},
      // class 1 never predicted; its precision counts as 0
      {{{6, 0}, {4, 0}}, 60.0, 30.0, 50.0, 37.5},
      {{{0, 3}, {2, 0}}, 0.0, 0.0, 0.0, 0.0},
      {{{8, 2}, {7, 3}}, 55.0, 56.67, 55.0, 52.0},
      {{{1, 0}, {9, 0}}, 10.0, 5.0, 50.0, 9.09},
  };
  return cases;
}

veridex::EccwModel switch_classifier() {
  veridex::ModelConfig c;
  c.d = 2;
  c.experts = 1;
  c.top_k = 1;
  c.classes = 2;
  c.variant = veridex::Variant::kNoCitizen;
  veridex::EccwModel m = veridex::EccwModel::initialize(c, 0);
  m.expert->experts[0].input_proj = Tensor::identity(2);
  m.expert->experts[0].output_proj = Tensor::identity(2);
  m.expert->head.weight = Tensor::matrix(2, 2, {10, 0, 0, 10});
  m.expert->head.bias = Tensor::zeros({2});
  m.voting.expert = Tensor::identity(2);
  return m;
}

std::vector<veridex::EmbeddedClaim> samples_for(const std::vector<std::vector<std::size_t>>& counts,
                                                const std::string& domain) {
  std::vector<veridex::EmbeddedClaim> out;
  for (std::size_t g = 0; g < counts.size(); ++g)
    for (std::size_t p = 0; p < counts[g].size(); ++p)
      for (std::size_t i = 0; i < counts[g][p]; ++i)
        out.push_back(sample(domain + std::to_string(out.size()),
                             p == 0 ? std::vector<double>{1, 0} : std::vector<double>{0, 1}, g, domain));
  return out;
}

veridex::EmbeddedClaim sample(std::string id, std::vector<double> v, std::size_t label, std::string domain) {
  veridex::EmbeddedClaim s;
  s.record.id = std::move(id);
  s.record.text = s.record.id;
  s.record.label = label;
  s.record.domain = std::move(domain);
  s.vector = std::move(v);
  return s;
}

std::vector<veridex::EmbeddedClaim> two_gaussians(std::size_t n, std::size_t d, std::uint64_t seed) {
  veridex::Rng rng(seed);
  std::vector<double> u(d);
  for (auto& x : u) x = rng.normal();
  double norm = 0.0;
  for (double x : u) norm += x * x;
  for (auto& x : u) x /= std::sqrt(norm);
  std::vector<veridex::EmbeddedClaim> out;
  const char* domains[] = {"Political", "Science"};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % 2;
    std::vector<double> v(d);
    for (std::size_t k = 0; k < d; ++k) v[k] = (label ? 1.5 : -1.5) * u[k] + 0.5 * rng.normal();
    out.push_back(sample("g" + std::to_string(i), v, label, domains[(i / 2) % 2]));
  }
  return out;
}

}  // namespace fixture
