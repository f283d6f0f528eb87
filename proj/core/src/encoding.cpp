#include "tfr/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "tfr/error.hpp"

namespace tfr {

double voronoi_tie_tolerance(const Grid& grid) { return 1e-9 * (grid.hx() * grid.hx() + grid.hy() * grid.hy()); }

std::vector<int> voronoi_owner(const SensorLayout& layout, const Grid& grid) {
  if (layout.positions.empty()) throw ConfigError("voronoi encoding needs at least one sensor");
  const std::size_t m = layout.positions.size();
  const double tol = voronoi_tie_tolerance(grid);
  std::vector<int> owner(grid.node_count(), 0);
  std::vector<double> d2(m);
  for (int i = 0; i < grid.ny; ++i) {
    const double y = grid.y(i);
    for (int j = 0; j < grid.nx; ++j) {
      const double x = grid.x(j);
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < m; ++k) {
        const double dx = x - layout.positions[k].x;
        const double dy = y - layout.positions[k].y;
        d2[k] = dx * dx + dy * dy;
        best = std::min(best, d2[k]);
      }
      std::size_t arg = 0;
      while (d2[arg] > best + tol) ++arg;
      owner[grid.flat(i, j)] = static_cast<int>(arg);
    }
  }
  return owner;
}

PseudoField voronoi_encode(const Readings& readings, const Grid& grid) {
  if (readings.values.empty()) throw ConfigError("voronoi encoding needs at least one reading");
  if (readings.values.size() != readings.layout.size()) throw ConfigError("readings and layout sizes differ");
  PseudoField pf;
  pf.grid = grid;
  pf.kind = EncodingKind::voronoi;
  const auto owner = voronoi_owner(readings.layout, grid);
  pf.values.resize(owner.size());
  for (std::size_t p = 0; p < owner.size(); ++p) pf.values[p] = readings.values[owner[p]];
  return pf;
}

PseudoField mask_encode(const Readings& readings, const Grid& grid) {
  if (readings.values.empty()) throw ConfigError("mask encoding needs at least one reading");
  if (readings.values.size() != readings.layout.size()) throw ConfigError("readings and layout sizes differ");
  PseudoField pf;
  pf.grid = grid;
  pf.kind = EncodingKind::mask;
  pf.values.assign(grid.node_count(), 0.0);
  pf.mask.assign(grid.node_count(), 0.0);
  std::set<NodeIndex> used;
  for (std::size_t k = 0; k < readings.size(); ++k) {
    const NodeIndex n = nearest_node(grid, readings.layout.positions[k]);
    if (!used.insert(n).second) {
      throw ConfigError("two sensors map to grid node (" + std::to_string(n.i) + ", " + std::to_string(n.j) + ")");
    }
    pf.values[grid.flat(n.i, n.j)] = readings.values[k];
    pf.mask[grid.flat(n.i, n.j)] = 1.0;
  }
  return pf;
}

namespace {

void check(const NormStats& s) {
  if (!(s.t_max > s.t_min) || !std::isfinite(s.t_min) || !std::isfinite(s.t_max)) {
    throw ConfigError("degenerate normalisation statistics (t_max must exceed t_min)");
  }
}

}  // namespace

double normalize(double v, const NormStats& s) {
  check(s);
  return (v - s.t_min) / (s.t_max - s.t_min);
}

double denormalize(double v, const NormStats& s) {
  check(s);
  return s.t_min + v * (s.t_max - s.t_min);
}

ScalarField normalize(const ScalarField& field, const NormStats& s) {
  check(s);
  ScalarField out = field;
  for (double& v : out.values) v = (v - s.t_min) / (s.t_max - s.t_min);
  out.normalized = true;
  return out;
}

ScalarField denormalize(const ScalarField& field, const NormStats& s) {
  check(s);
  ScalarField out = field;
  for (double& v : out.values) v = s.t_min + v * (s.t_max - s.t_min);
  out.normalized = false;
  return out;
}

Readings normalize(const Readings& readings, const NormStats& s) {
  check(s);
  Readings out = readings;
  for (double& v : out.values) v = (v - s.t_min) / (s.t_max - s.t_min);
  return out;
}

}  // namespace tfr
