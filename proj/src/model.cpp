// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0

#include "veridex/model.hpp"

#include "veridex/errors.hpp"

namespace veridex {

using ad::Tape;
using ad::Tensor;
using ad::Var;

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kNoCitizen: return "no_citizen";
    case Variant::kNoExpert: return "no_expert";
    case Variant::kNoWeightedVoting: return "no_weighted_voting";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : kAllVariants) {
    if (variant_name(v) == name) return v;
  }
  throw ConfigError("unknown ablation variant '" + std::string(name) +
                    "' (expected full, no_citizen, no_expert or no_weighted_voting)");
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* what) {
    if (v == 0) throw ConfigError(std::string(what) + " must be positive");
  };
  positive(d, "d");
  positive(experts, "experts");
  positive(top_k, "top_k");
  positive(citizens, "citizens");
  if (top_k > experts) {
    throw ConfigError("top_k (" + std::to_string(top_k) + ") exceeds expert count (" +
                      std::to_string(experts) + ")");
  }
  if (classes < 2) throw ConfigError("classes must be at least 2");
  if (!class_names.empty() && class_names.size() != classes) {
    throw ConfigError("class_names has " + std::to_string(class_names.size()) + " entries, expected " +
                      std::to_string(classes));
  }
  if (citizen_noise_std < 0.0) throw ConfigError("citizen_noise_std must be non-negative");
  if (!adjacency.empty()) {
    if (adjacency.size() != citizens * citizens) {
      throw ConfigError("adjacency must have citizens^2 = " + std::to_string(citizens * citizens) +
                        " entries");
    }
    validate_adjacency(Tensor::matrix(citizens, citizens, adjacency), citizens);
  }
}

nlohmann::ordered_json ModelConfig::to_json() const {
  nlohmann::ordered_json j;
  j["d"] = d;
  j["experts"] = experts;
  j["top_k"] = top_k;
  j["expert_hidden"] = resolved_expert_hidden();
  j["citizens"] = citizens;
  j["lstm_hidden"] = resolved_lstm_hidden();
  j["classes"] = classes;
  j["attention_scaling"] = attention_scaling;
  j["per_citizen_heads"] = per_citizen_heads;
  j["citizen_noise_std"] = citizen_noise_std;
  j["aggregation"] = aggregation == Aggregation::kMean ? "mean" : "sum";
  j["variant"] = variant_name(variant);
  j["class_names"] = class_names.empty() ? default_class_names(classes) : class_names;
  j["adjacency"] = adjacency;
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.d = j.value("d", c.d);
    c.experts = j.value("experts", c.experts);
    c.top_k = j.value("top_k", c.top_k);
    c.expert_hidden = j.value("expert_hidden", c.expert_hidden);
    c.citizens = j.value("citizens", c.citizens);
    c.lstm_hidden = j.value("lstm_hidden", c.lstm_hidden);
    c.classes = j.value("classes", c.classes);
    c.attention_scaling = j.value("attention_scaling", c.attention_scaling);
    c.per_citizen_heads = j.value("per_citizen_heads", c.per_citizen_heads);
    c.citizen_noise_std = j.value("citizen_noise_std", c.citizen_noise_std);
    const std::string agg = j.value("aggregation", std::string("mean"));
    if (agg == "mean") c.aggregation = Aggregation::kMean;
    else if (agg == "sum") c.aggregation = Aggregation::kSum;
    else throw ConfigError("aggregation must be mean or sum");
    c.variant = parse_variant(j.value("variant", std::string("full")));
    c.class_names = j.value("class_names", c.class_names);
    c.adjacency = j.value("adjacency", c.adjacency);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------

EccwModel EccwModel::initialize(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  EccwModel m;
  m.config = config;
  const std::size_t d = config.d, C = config.classes;
  if (config.has_experts()) {
    Rng rng(mix_seed(seed ^ 0x45585045ULL));  // "EXPE"
    ExpertBranch b;
    b.router = init_router(d, config.experts, config.top_k, rng);
    for (std::size_t e = 0; e < config.experts; ++e) {
      b.experts.push_back(init_expert(d, config.resolved_expert_hidden(), rng));
    }
    b.head = init_linear_head(d, C, rng);
    m.expert = std::move(b);
  }
  if (config.has_citizens()) {
    Rng rng(mix_seed(seed ^ 0x43495449ULL));  // "CITI"
    CitizenBranch b;
    for (std::size_t j = 0; j < config.citizens; ++j) b.resolver.mlps.push_back(init_citizen_mlp(d, d, rng));
    b.encoder = init_sequence_encoder(d, config.resolved_lstm_hidden(), rng);
    Tensor adjacency = config.adjacency.empty()
                           ? full_adjacency(config.citizens)
                           : Tensor::matrix(config.citizens, config.citizens, config.adjacency);
    b.attention = init_graph_attention(d, std::move(adjacency), config.attention_scaling, rng);
    const std::size_t heads = config.per_citizen_heads ? config.citizens : 1;
    for (std::size_t j = 0; j < heads; ++j) b.heads.push_back(init_linear_head(2 * d, C, rng));
    m.citizen = std::move(b);
  }
  m.voting = identity_voting(C, config.has_experts(), config.has_citizens(),
                             config.variant == Variant::kNoWeightedVoting);
  return m;
}

namespace {

template <typename Model, typename Out>
void collect(Model& m, Out& out) {
  if (m.expert) {
    auto& b = *m.expert;
    out.emplace_back("expert.router", &b.router.weight);
    for (std::size_t e = 0; e < b.experts.size(); ++e) {
      const std::string p = "expert.ffn." + std::to_string(e) + ".";
      out.emplace_back(p + "input_proj", &b.experts[e].input_proj);
      out.emplace_back(p + "output_proj", &b.experts[e].output_proj);
    }
    out.emplace_back("expert.head.weight", &b.head.weight);
    out.emplace_back("expert.head.bias", &b.head.bias);
  }
  if (m.citizen) {
    auto& b = *m.citizen;
    for (std::size_t j = 0; j < b.resolver.mlps.size(); ++j) {
      auto& mlp = b.resolver.mlps[j];
      const std::string p = "citizen.mlp." + std::to_string(j) + ".";
      out.emplace_back(p + "hidden_weight", &mlp.hidden_weight);
      out.emplace_back(p + "hidden_bias", &mlp.hidden_bias);
      out.emplace_back(p + "output_weight", &mlp.output_weight);
      out.emplace_back(p + "output_bias", &mlp.output_bias);
    }
    for (auto [name, cell] : {std::pair{"forward", &b.encoder.forward}, std::pair{"backward", &b.encoder.backward}}) {
      const std::string p = std::string("citizen.lstm.") + name + ".";
      out.emplace_back(p + "input_weight", &cell->input_weight);
      out.emplace_back(p + "recurrent_weight", &cell->recurrent_weight);
      out.emplace_back(p + "bias", &cell->bias);
    }
    out.emplace_back("citizen.lstm.output_weight", &b.encoder.output_weight);
    out.emplace_back("citizen.lstm.output_bias", &b.encoder.output_bias);
    out.emplace_back("citizen.attention.query", &b.attention.query);
    out.emplace_back("citizen.attention.key", &b.attention.key);
    out.emplace_back("citizen.attention.value", &b.attention.value);
    for (std::size_t j = 0; j < b.heads.size(); ++j) {
      const std::string p = "citizen.head." + std::to_string(j) + ".";
      out.emplace_back(p + "weight", &b.heads[j].weight);
      out.emplace_back(p + "bias", &b.heads[j].bias);
    }
  }
  if (m.voting.expert) out.emplace_back("voting.expert", &*m.voting.expert);
  if (m.voting.citizen) out.emplace_back("voting.citizen", &*m.voting.citizen);
}

}  // namespace

std::vector<NamedParameter> EccwModel::parameters() {
  std::vector<std::pair<std::string, Tensor*>> raw;
  collect(*this, raw);
  std::vector<NamedParameter> out;
  out.reserve(raw.size());
  for (auto& [name, t] : raw) out.push_back({std::move(name), t});
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> EccwModel::parameters() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  collect(*this, out);
  return out;
}

std::vector<Tensor*> EccwModel::trainable() {
  std::vector<Tensor*> out;
  for (auto& p : parameters()) {
    if (p.tensor->requires_grad()) out.push_back(p.tensor);
  }
  return out;
}

std::size_t EccwModel::parameter_count() const { return parameter_count(""); }

std::size_t EccwModel::parameter_count(std::string_view prefix) const {
  std::size_t n = 0;
  for (const auto& [name, t] : parameters()) {
    if (std::string_view(name).starts_with(prefix)) n += t->size();
  }
  return n;
}

std::vector<std::string> EccwModel::class_names() const {
  return config.class_names.empty() ? default_class_names(config.classes) : config.class_names;
}

ForwardTrace forward_trace(Var s, const EccwModel& model, const ForwardOptions& options) {
  const ModelConfig& cfg = model.config;
  if (s.value().rank() != 1 || s.size() != cfg.d) {
    throw DimensionError("forward: input has shape " + ad::shape_to_string(s.shape()) +
                         ", model expects d=" + std::to_string(cfg.d));
  }
  ForwardTrace tr;
  if (model.expert) {
    const ExpertBranch& b = *model.expert;
    tr.gate = route(s, b.router);
    tr.expert_output = moe_forward(s, b.router, b.experts, options.stats);
    tr.expert_dist = expert_decide(*tr.expert_output, b.head);
  }
  if (model.citizen) {
    const CitizenBranch& b = *model.citizen;
    CitizenNoise noise{options.noise_rng, cfg.citizen_noise_std};
    tr.initial = diversify(s, b.resolver, noise);
    tr.encoded = encode_sequence(*tr.initial, b.encoder);
    tr.attended = graph_attend(*tr.encoded, b.attention);
    tr.fused = fuse_cognition(*tr.initial, *tr.attended);
    std::vector<Var> dists;
    const std::size_t n = b.resolver.citizens();
    dists.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
      const LinearHead& head = b.heads.size() == 1 ? b.heads[0] : b.heads.at(j);
      dists.push_back(citizen_decide(ad::row(*tr.fused, j), head));
    }
    tr.citizen_dists = ad::stack_rows(dists);
    tr.citizen_mean = aggregate_citizens(*tr.citizen_dists, cfg.aggregation);
  }
  tr.logits = vote_logits(tr.expert_dist, tr.citizen_mean, model.voting);
  tr.probabilities = ad::softmax(tr.logits);
  return tr;
}

Verdict forward_full(std::span<const double> s, const EccwModel& model) {
  Tape tape;
  ForwardTrace tr = forward_trace(tape.input(Tensor::vector({s.begin(), s.end()})), model);
  return make_verdict(tr.probabilities.value().values(), model.class_names());
}

}  // namespace veridex
