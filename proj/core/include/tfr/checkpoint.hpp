#pragma once

#include <filesystem>
#include <memory>

#include <nlohmann/json.hpp>

#include "tfr/model.hpp"

namespace tfr {

inline constexpr int kCheckpointFormatVersion = 1;

/// Writes `params.json` (architecture, hyperparameters, normalization stats,
/// parameter names, shapes and offsets, blob checksum) and `params.bin`
/// (little-endian float32 values in manifest order) into dir. `metadata` is
/// stored verbatim under the "metadata" key.
void save_checkpoint(const Model& model, const std::filesystem::path& dir,
                     const nlohmann::json& metadata = nlohmann::json::object());

/// Rebuilds the model from a checkpoint directory. Throws DataError for a
/// missing or corrupt checkpoint or a manifest that disagrees with the
/// architecture it names.
std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& dir);

nlohmann::json read_checkpoint_manifest(const std::filesystem::path& dir);

/// Rounds every parameter to float32, matching what a save/load round trip
/// produces.
void round_params_to_f32(Model& model);

}  // namespace tfr
