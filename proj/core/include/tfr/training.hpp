#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tfr/datagen.hpp"
#include "tfr/metrics.hpp"
#include "tfr/model.hpp"

namespace tfr {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 8;
  double learning_rate = 1e-3;
  std::vector<int> milestones{20};
  double decay = 0.1;
  std::uint64_t seed = 0;
  PairingStrategy pairing;
  std::string loss = "l1";
  double clip_norm = 1.0;  // global gradient norm; <= 0 disables clipping
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  /// Throws ConfigError unless lr > 0, milestones strictly increase below
  /// epochs, batch >= 1 and the loss is l1.
  void validate() const;
  /// Step decay: lr * decay^(number of milestones <= epoch), epochs from 0.
  double lr_at(int epoch) const;

  static TrainConfig desk();
  static TrainConfig paper();
  static TrainConfig finetune_desk();
  static TrainConfig finetune_paper();
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
/// Missing keys keep the values already in c.
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  std::optional<double> val_mae_K;
  std::optional<double> val_maxae_K;
};

/// Single JSON line without trailing newline.
std::string to_jsonl(const EpochRecord& r);

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  std::size_t steps = 0;
};

/// Validation targets with the training pool their references come from.
struct ValidationSet {
  const std::vector<Sample>* targets = nullptr;
  const std::vector<Sample>* reference_pool = nullptr;
  std::uint64_t seed = 0;
};

/// Adam with bias correction.
class Adam {
 public:
  Adam(const nn::ParamStore& params, double beta1, double beta2, double eps);
  void step(nn::ParamStore& params, double lr);
  long steps() const { return t_; }

 private:
  std::vector<std::vector<double>> m_, v_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Minimises the L1 error in normalized space over shuffled mini-batches.
/// Gradients are averaged over the batch and clipped by global norm. When a
/// validation set is given the parameters of the epoch with the lowest
/// validation MAE are restored at the end, otherwise the final ones are kept.
/// Throws ConfigError for empty pairs or an invalid config and NumericError
/// for a non-finite loss.
TrainHistory train(Model& model, const std::vector<ReferencePair>& pairs, const ValidationSet* val,
                   const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// The same loop starting from pretrained parameters; every parameter is
/// updated. Throws ConfigError if `expected` names another architecture or
/// the samples do not match the model resolution.
TrainHistory finetune(Model& model, const std::vector<ReferencePair>& pairs, const ValidationSet* val,
                      const TrainConfig& cfg, std::optional<Architecture> expected = std::nullopt,
                      const EpochCallback& on_epoch = {});

/// Mean normalized L1 error of the model over the given pairs.
double pair_loss(const Model& model, const std::vector<ReferencePair>& pairs);

using Predictor = std::function<ScalarField(const Sample& target, const Sample* reference)>;

/// For every target: pick the reference of its condition (one per condition,
/// drawn from the pool with `seed`) when `needs_reference`, predict, score.
EvalResult evaluate(const Predictor& predictor, bool needs_reference, const std::vector<Sample>& targets,
                    const std::vector<Sample>& reference_pool, std::uint64_t seed);
EvalResult evaluate(const Model& model, const std::vector<Sample>& targets, const std::vector<Sample>& reference_pool,
                    std::uint64_t seed);

/// Scores the Voronoi pseudo-field of each target's own readings.
EvalResult evaluate_voronoi_identity(const std::vector<Sample>& targets);

struct SweepConfig {
  ScenarioSpec scenario;
  std::vector<int> counts{9, 16, 25};
  SplitCounts split{200, 0, 50};
  ModelConfig model;
  TrainConfig train;
  std::uint64_t data_seed = 0;
  std::uint64_t eval_seed = 0;
};

struct SweepRow {
  int sensors = 0;
  EvalResult model;
  EvalResult identity;
};

/// One dataset, model and evaluation per sensor count, all other seeds equal.
std::vector<SweepRow> sensor_sweep(const SweepConfig& cfg, const std::function<void(const std::string&)>& log = {});

struct ResultRow {
  std::string method;
  std::string scenario;
  std::size_t n_train = 0;
  double mae_K = 0.0;
  double maxae_K = 0.0;
  std::uint64_t seed = 0;
};

inline constexpr const char* kResultsHeader = "method,scenario,n_train,mae_K,maxae_K,seed";
std::string to_csv_line(const ResultRow& r);
void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows);

}  // namespace tfr
