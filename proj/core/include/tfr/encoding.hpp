#pragma once

#include <vector>

#include "tfr/domain.hpp"

namespace tfr {

enum class EncodingKind { voronoi, mask };

/// Grid-aligned encoding of sparse readings. For the mask kind, `mask` is 1
/// exactly on sensor-nearest nodes and `values` is zero elsewhere.
struct PseudoField {
  Grid grid;
  EncodingKind kind = EncodingKind::voronoi;
  std::vector<double> values;
  std::vector<double> mask;  // mask kind only

  double at(int i, int j) const { return values[grid.flat(i, j)]; }
  friend bool operator==(const PseudoField&, const PseudoField&) = default;
};

/// Squared distances closer than this count as a tie, so nodes on a bisector
/// are not decided by rounding noise.
double voronoi_tie_tolerance(const Grid& grid);

/// Index of the Euclidean-nearest sensor for every grid node (row-major).
/// Among sensors within the tie tolerance of the minimum squared distance the
/// lowest index wins.
std::vector<int> voronoi_owner(const SensorLayout& layout, const Grid& grid);

/// Every node takes the value of its nearest sensor. Throws ConfigError for
/// empty readings.
PseudoField voronoi_encode(const Readings& readings, const Grid& grid);

/// Readings placed on their nearest nodes plus a binary indicator channel.
/// Throws ConfigError for empty readings or two sensors sharing a node.
PseudoField mask_encode(const Readings& readings, const Grid& grid);

/// Affine map of [t_min, t_max] onto [0, 1]; throws ConfigError for
/// degenerate stats.
double normalize(double v, const NormStats& stats);
double denormalize(double v, const NormStats& stats);
ScalarField normalize(const ScalarField& field, const NormStats& stats);
ScalarField denormalize(const ScalarField& field, const NormStats& stats);
Readings normalize(const Readings& readings, const NormStats& stats);

}  // namespace tfr
