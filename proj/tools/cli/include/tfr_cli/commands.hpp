#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tfr_cli/config.hpp"

namespace tfr::cli {

struct CommonOptions {
  ConfigSources config;
  std::filesystem::path out;
  bool force = false;
  std::vector<std::string> argv;  // recorded in run.json
};

struct DataCommandOptions : CommonOptions {
  std::vector<std::filesystem::path> data;
};

struct EvalOptions : DataCommandOptions {
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::string> model;  // architecture check, or "voronoi" for the identity baseline
  std::string split = "test";
};

struct FinetuneOptions : DataCommandOptions {
  std::filesystem::path checkpoint;
  std::optional<std::string> model;
  std::optional<std::size_t> shots;
};

struct AblateOptions : DataCommandOptions {
  std::vector<std::string> variants{"full", "no_aux", "no_implicit", "unet_aux"};
  std::vector<std::string> pairings{"sliding", "fixed"};
};

struct SweepOptions : CommonOptions {
  std::vector<int> counts{9, 16, 25};
};

struct PlotOptions : CommonOptions {
  std::optional<std::filesystem::path> checkpoint;
  std::vector<std::filesystem::path> data;
  std::size_t samples = 4;
  std::vector<std::filesystem::path> curves;
};

/// Each returns the process exit code; errors propagate as tfr::Error.
int cmd_gen_data(const CommonOptions& o);
int cmd_train(const DataCommandOptions& o);
int cmd_finetune(const FinetuneOptions& o);
int cmd_eval(const EvalOptions& o);
int cmd_ablate(const AblateOptions& o);
int cmd_sweep(const SweepOptions& o);
int cmd_plot(const PlotOptions& o);

}  // namespace tfr::cli
