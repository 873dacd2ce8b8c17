#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "srfl/dataset.hpp"
#include "srfl/models.hpp"

namespace srfl::ckpt {

// 64-bit FNV-1a, rendered as 16 lowercase hex digits by hash_hex.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hash_hex(std::string_view bytes);

struct Checkpoint {
  models::ModelConfig model;
  data::NormMeta meta;
  std::vector<double> params;
  int round = 0;
  std::string config_hash;
};

// Writes `checkpoint.json` (manifest: arch, model config, normalization
// ranges, per-block shapes, length, checksum) and `checkpoint.bin` (raw
// little-endian doubles) into `dir`.
void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& c,
                     const std::vector<nn::ParamBlock>& layout);
// Validates the parameter count against the manifest and a freshly built model.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

std::string model_config_to_json(const models::ModelConfig& cfg);
models::ModelConfig model_config_from_json(std::string_view text);

std::string norm_meta_to_json(const data::NormMeta& meta);
data::NormMeta norm_meta_from_json(std::string_view text);

}  // namespace srfl::ckpt
