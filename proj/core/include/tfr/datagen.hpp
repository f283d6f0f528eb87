#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tfr/domain.hpp"
#include "tfr/solver.hpp"

namespace tfr {

/// Randomised component layout used when synthesising a condition.
struct SourceRanges {
  int count_min = 3;
  int count_max = 8;
  double size_min = 0.01;   // m, rectangle side
  double size_max = 0.02;
  double power_min = 3e4;   // W/m^2
  double power_max = 3e5;
  double sigma = 1.0;       // gaussian deviation coefficient
  int placement_attempts = 200;

  friend bool operator==(const SourceRanges&, const SourceRanges&) = default;
};

/// Boundary, source and conductivity template of one scenario.
struct ScenarioSpec {
  std::string name;  // HSink, ADlet, DSine or NewScenario
  BoundarySpec boundary;
  SourceKind source_kind = SourceKind::uniform;
  ConductivityModel conductivity;
  int sensor_count = 25;
  int nx = 64;
  int ny = 64;
  double lx = 0.1;
  double ly = 0.1;
  SourceRanges sources;
  SolveOptions solver;

  Grid grid() const { return make_grid(nx, ny, lx, ly); }
  friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

/// Catalog names, in canonical spelling.
const std::vector<std::string>& scenario_names();

/// Template for a catalog scenario (case-insensitive). Throws ConfigError
/// naming the valid scenarios on a miss.
ScenarioSpec scenario_template(std::string_view name, int resolution = 64);

enum class Split { train, val, test };
std::string_view to_string(Split s);

struct SplitCounts {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

struct Dataset {
  ScenarioSpec scenario;
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;
  NormStats stats;               // from the training split only
  std::uint64_t master_seed = 0;
  int redraws = 0;               // samples re-drawn after solver failure

  const std::vector<Sample>& split(Split s) const;
  std::vector<Sample>& split(Split s);
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Draws one condition (sources only) from a per-sample seed.
std::vector<HeatSource> draw_sources(const ScenarioSpec& spec, std::uint64_t seed);

/// Simulates every sample: independent source layout from
/// derive_seed(master_seed, split, index), solved field rounded to float32
/// precision, uniform sensors, readings sampled from the stored field.
/// Validation and test splits are fresh draws from disjoint seed streams.
/// Output is independent of `jobs`. Throws ConfigError if train < 2, and
/// NumericError if a sample still fails after 5 re-draws.
Dataset generate(const ScenarioSpec& spec, SplitCounts counts, std::uint64_t master_seed, int jobs = 1);
Dataset generate(const ScenarioSpec& spec, std::size_t n, std::uint64_t master_seed);

NormStats compute_stats(const std::vector<Sample>& samples);

enum class PairingKind { sliding, fixed };

struct PairingStrategy {
  PairingKind kind = PairingKind::sliding;
  std::size_t fixed_index = 0;
  friend bool operator==(const PairingStrategy&, const PairingStrategy&) = default;
};

PairingStrategy parse_pairing(std::string_view text);
std::string_view to_string(PairingKind k);

/// sliding: pair i = (samples[i], samples[(i + 1) mod N]).
/// fixed: every sample except samples[fixed_index], each with it as reference.
/// Throws ConfigError if N < 2 or the fixed index is out of range.
std::vector<ReferencePair> make_pairs(const std::vector<Sample>& samples, PairingStrategy strategy);

/// Uniformly chosen training sample with the given condition, reproducible
/// from rng_seed. Throws DataError if the condition has no training sample.
const Sample& select_test_reference(const std::vector<Sample>& train, std::string_view condition_id,
                                    std::uint64_t rng_seed);
const Sample& select_test_reference(const Dataset& ds, std::string_view condition_id, std::uint64_t rng_seed);

inline constexpr std::uint32_t kDatasetFormatVersion = 1;

/// Writes manifest.json plus train.bin / val.bin / test.bin into dir
/// (created if needed).
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

/// Throws DataError on a missing manifest or split file, checksum mismatch,
/// or inconsistent shapes.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace tfr
