#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "semprobe/latent_model.hpp"

namespace semprobe {

// Binary layout:
//   "LLNS" | u32 version | u32 metadata length | UTF-8 JSON metadata |
//   float32 little-endian tensors in manifest order
// The metadata holds the training config, layer activations, the epoch and a
// tensor manifest of {name, shape, offset} with offsets relative to the first
// tensor byte.

/// Missing fields keep their TrainConfig defaults. Throws ConfigInvalid.
TrainConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const TrainConfig& config);

std::string serialize_checkpoint(const ModelCheckpoint& ckpt);
/// Throws Error{BadMagic, VersionUnsupported, CorruptTensor, ShapeMismatch}.
ModelCheckpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace semprobe
