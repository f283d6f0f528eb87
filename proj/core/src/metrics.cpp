#include "tfr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tfr/error.hpp"

namespace tfr {

namespace {

void check(const ScalarField& a, const ScalarField& b) {
  if (a.grid.nx != b.grid.nx || a.grid.ny != b.grid.ny || a.values.size() != b.values.size()) {
    throw ConfigError("metric: field shapes differ");
  }
  if (a.values.empty()) throw ConfigError("metric: empty field");
}

}  // namespace

double mae(const ScalarField& truth, const ScalarField& pred) {
  check(truth, pred);
  double s = 0.0;
  for (std::size_t i = 0; i < truth.values.size(); ++i) s += std::abs(truth.values[i] - pred.values[i]);
  return s / static_cast<double>(truth.values.size());
}

double max_ae(const ScalarField& truth, const ScalarField& pred) {
  check(truth, pred);
  double m = 0.0;
  for (std::size_t i = 0; i < truth.values.size(); ++i) m = std::max(m, std::abs(truth.values[i] - pred.values[i]));
  return m;
}

void EvalResult::add(const ScalarField& truth, const ScalarField& pred, std::string id) {
  mae.push_back(tfr::mae(truth, pred));
  max_ae.push_back(tfr::max_ae(truth, pred));
  sample_ids.push_back(std::move(id));
}

void EvalResult::finalize() {
  if (mae.empty()) {
    mae_mean = 0.0;
    max_ae_max = 0.0;
    return;
  }
  mae_mean = std::accumulate(mae.begin(), mae.end(), 0.0) / static_cast<double>(mae.size());
  max_ae_max = *std::max_element(max_ae.begin(), max_ae.end());
}

std::string sample_id(const Sample& s) { return s.condition_id + ":" + std::to_string(s.seed); }

}  // namespace tfr
