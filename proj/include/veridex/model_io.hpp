// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0
//
// Model file: magic "VRDXMODL" | u32 version | config JSON | u64 count |
// count x (name, u32 rank, u64 dims[rank], u32 trainable, f64 values[]) |
// u32 crc32 of everything before it.

#pragma once

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "veridex/model.hpp"

namespace veridex {

inline constexpr std::uint32_t kModelFormatVersion = 1;

// `metadata` is stored alongside the model configuration (training settings,
// loss history) and returned by load_model_metadata().
void save_model(const EccwModel& model, const std::filesystem::path& path,
                const nlohmann::json& metadata = nlohmann::json::object());
// The configuration travels with the weights: the returned model always uses
// the stored config. Throws DataError on bad magic, version, checksum,
// truncation or parameter mismatch; nothing is returned on failure.
EccwModel load_model(const std::filesystem::path& path);
nlohmann::json load_model_metadata(const std::filesystem::path& path);

}  // namespace veridex
