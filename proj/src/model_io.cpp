// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0

#include "veridex/model_io.hpp"

#include <map>

#include "binary_io.hpp"
#include "veridex/errors.hpp"

namespace veridex {

namespace {

constexpr std::string_view kMagic = "VRDXMODL";

struct Header {
  ModelConfig config;
  nlohmann::json metadata;
};

Header read_header(detail::BinaryReader& in, const std::filesystem::path& path) {
  const std::uint32_t version = in.u32();
  if (version != kModelFormatVersion) {
    throw DataError("unsupported model format version " + std::to_string(version) + " in " + path.string());
  }
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in.str());
  } catch (const nlohmann::json::exception& e) {
    throw DataError("model file " + path.string() + ": bad config block: " + e.what());
  }
  Header h;
  try {
    h.config = ModelConfig::from_json(doc.at("config"));
  } catch (const ConfigError& e) {
    throw DataError("model file " + path.string() + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw DataError("model file " + path.string() + ": " + e.what());
  }
  h.metadata = doc.value("metadata", nlohmann::json::object());
  return h;
}

}  // namespace

void save_model(const EccwModel& model, const std::filesystem::path& path, const nlohmann::json& metadata) {
  detail::BinaryWriter out;
  out.bytes(kMagic.data(), kMagic.size());
  out.u32(kModelFormatVersion);
  nlohmann::ordered_json doc;
  doc["config"] = model.config.to_json();
  doc["metadata"] = metadata;
  out.str(doc.dump());
  const auto params = model.parameters();
  out.u64(params.size());
  for (const auto& [name, t] : params) {
    out.str(name);
    out.u32(static_cast<std::uint32_t>(t->rank()));
    for (std::size_t dim : t->shape()) out.u64(dim);
    out.u32(t->requires_grad() ? 1 : 0);
    out.f64s(t->values());
  }
  out.finish(path);
}

EccwModel load_model(const std::filesystem::path& path) {
  detail::BinaryReader in(path, kMagic, "model");
  Header h = read_header(in, path);
  EccwModel model = EccwModel::initialize(h.config, 0);
  std::map<std::string, ad::Tensor*> slots;
  for (auto& p : model.parameters()) slots.emplace(p.name, p.tensor);

  const std::uint64_t count = in.u64();
  if (count != slots.size()) {
    throw DataError("model file " + path.string() + " holds " + std::to_string(count) + " parameters, config expects " +
                    std::to_string(slots.size()));
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = in.str();
    auto it = slots.find(name);
    if (it == slots.end()) throw DataError("model file " + path.string() + ": unexpected parameter '" + name + "'");
    const std::uint32_t rank = in.u32();
    if (rank == 0 || rank > 2) throw DataError("model file " + path.string() + ": bad rank for '" + name + "'");
    ad::Shape shape(rank);
    for (auto& dim : shape) dim = in.u64();
    ad::Tensor& slot = *it->second;
    if (shape != slot.shape()) {
      throw DataError("model file " + path.string() + ": parameter '" + name + "' has shape " +
                      ad::shape_to_string(shape) + ", config expects " + ad::shape_to_string(slot.shape()));
    }
    const bool trainable = in.u32() != 0;
    const std::vector<double> values = in.f64s(slot.size());
    std::copy(values.begin(), values.end(), slot.values().begin());
    slot.set_requires_grad(trainable);
    slots.erase(it);
  }
  if (!in.at_end()) throw DataError("model file " + path.string() + ": trailing bytes");
  return model;
}

nlohmann::json load_model_metadata(const std::filesystem::path& path) {
  detail::BinaryReader in(path, kMagic, "model");
  return read_header(in, path).metadata;
}

}  // namespace veridex
