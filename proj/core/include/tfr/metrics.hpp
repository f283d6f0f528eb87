#pragma once

#include <string>
#include <vector>

#include "tfr/domain.hpp"

namespace tfr {

/// Mean absolute pointwise error. Throws ConfigError on shape mismatch.
double mae(const ScalarField& truth, const ScalarField& pred);
/// Largest absolute pointwise error.
double max_ae(const ScalarField& truth, const ScalarField& pred);

/// Per-sample and aggregate errors in Kelvin. The aggregate MAE is the mean
/// of the per-sample values and the aggregate Max-AE their maximum.
struct EvalResult {
  std::vector<double> mae;
  std::vector<double> max_ae;
  std::vector<std::string> sample_ids;
  std::vector<std::string> reference_ids;  // one per distinct condition, empty for reference-free models
  double mae_mean = 0.0;
  double max_ae_max = 0.0;

  void add(const ScalarField& truth, const ScalarField& pred, std::string id);
  void finalize();
};

/// Stable identifier "<condition>:<seed>".
std::string sample_id(const Sample& s);

}  // namespace tfr
