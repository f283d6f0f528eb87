#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tfr/model.hpp"
#include "tfr/training.hpp"

namespace tfr::cli {

struct DataOptions {
  std::string scenario = "HSink";
  int resolution = 64;
  std::size_t n_train = 200;
  std::size_t n_val = 0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;
  int sensors = 25;
  int jobs = 1;
};

/// Everything a command may read. Serialized whole into each run directory.
struct RunConfig {
  DataOptions data;
  ModelConfig model;
  TrainConfig train;
  TrainConfig finetune;
  std::uint64_t eval_seed = 0;
};

RunConfig default_config(bool paper_scale);

nlohmann::json to_json(const RunConfig& c);

/// Strict: unknown keys are rejected so typos in config files surface.
RunConfig run_config_from_json(const nlohmann::json& j);

/// Applies "a.b.c=value" to the tree. The value is read as JSON when it
/// parses, otherwise as a string. The key must already exist.
void apply_override(nlohmann::json& tree, std::string_view assignment);

struct ConfigSources {
  bool paper_scale = false;
  std::optional<std::filesystem::path> file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;  // sets model, train and eval seeds at once
};

/// Defaults, then the file, then overrides, then the seed.
RunConfig resolve_config(const ConfigSources& src);

}  // namespace tfr::cli
