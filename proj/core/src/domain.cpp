#include "tfr/domain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>
#include <utility>

#include "tfr/error.hpp"

namespace tfr {

Grid make_grid(int nx, int ny, double lx, double ly) {
  if (nx < 2 || ny < 2) {
    std::ostringstream msg;
    msg << "grid needs at least 2 nodes per axis, got " << nx << "x" << ny;
    throw ConfigError(msg.str());
  }
  if (!(lx > 0.0) || !(ly > 0.0) || !std::isfinite(lx) || !std::isfinite(ly)) {
    throw ConfigError("grid extents must be positive and finite");
  }
  return Grid{nx, ny, lx, ly};
}

namespace {

// Nearest of the nodes k*h, k in [0, n), to coordinate c in [0, (n-1)h].
int nearest_axis_node(double c, double h, int n) {
  int k = static_cast<int>(std::floor(c / h));
  k = std::clamp(k, 0, n - 1);
  if (k + 1 < n && std::abs(c - (k + 1) * h) < std::abs(c - k * h)) ++k;
  // floor() can land one node high when c/h rounds up across an integer.
  if (k > 0 && std::abs(c - (k - 1) * h) <= std::abs(c - k * h)) --k;
  return k;
}

}  // namespace

NodeIndex nearest_node(const Grid& grid, Point p) {
  if (!grid.contains(p)) {
    std::ostringstream msg;
    msg << "sensor position (" << p.x << ", " << p.y << ") outside domain [0, " << grid.lx
        << "] x [0, " << grid.ly << "]";
    throw ConfigError(msg.str());
  }
  return {nearest_axis_node(p.y, grid.hy(), grid.ny), nearest_axis_node(p.x, grid.hx(), grid.nx)};
}

ScalarField::ScalarField(Grid g, std::vector<double> v, bool norm)
    : grid(g), values(std::move(v)), normalized(norm) {
  if (values.size() != grid.node_count()) {
    throw ConfigError("field value count does not match grid shape");
  }
}

double ScalarField::min() const { return *std::min_element(values.begin(), values.end()); }
double ScalarField::max() const { return *std::max_element(values.begin(), values.end()); }

void SensorLayout::validate(const Grid& grid) const {
  if (positions.empty()) throw ConfigError("sensor layout is empty");
  std::set<std::pair<double, double>> seen;
  for (const auto& p : positions) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !grid.contains(p)) {
      std::ostringstream msg;
      msg << "sensor position (" << p.x << ", " << p.y << ") outside domain";
      throw ConfigError(msg.str());
    }
    if (!seen.emplace(p.x, p.y).second) throw ConfigError("sensor positions must be distinct");
  }
}

Readings sample_at_sensors(const ScalarField& field, const SensorLayout& layout) {
  Readings out;
  out.layout = layout;
  out.values.reserve(layout.size());
  for (const auto& p : layout.positions) {
    const auto n = nearest_node(field.grid, p);
    out.values.push_back(field.at(n.i, n.j));
  }
  return out;
}

SensorLayout uniform_sensor_layout(const Grid& grid, int k) {
  const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(std::max(k, 0)))));
  if (k < 1 || n * n != k) {
    throw ConfigError("uniform sensor count must be a positive perfect square, got " + std::to_string(k));
  }
  SensorLayout layout;
  layout.positions.reserve(k);
  for (int py = 0; py < n; ++py) {
    for (int px = 0; px < n; ++px) {
      layout.positions.push_back({(px + 1) * grid.lx / (n + 1), (py + 1) * grid.ly / (n + 1)});
    }
  }
  return layout;
}

void HeatSource::validate(const Grid& grid) const {
  if (!(region.x_lo >= 0.0 && region.y_lo >= 0.0 && region.x_hi <= grid.lx && region.y_hi <= grid.ly &&
        region.x_lo < region.x_hi && region.y_lo < region.y_hi)) {
    throw ConfigError("heat source region must be a non-empty rectangle inside the domain");
  }
  if (!(power >= 0.0) || !std::isfinite(power)) throw ConfigError("heat source power must be >= 0");
  if (kind == SourceKind::gaussian && (!(radius > 0.0) || !(sigma > 0.0))) {
    throw ConfigError("gaussian heat source needs radius > 0 and sigma > 0");
  }
}

double SideCondition::wall_temperature(double s, double len) const {
  if (profile == ProfileKind::sine) return t0 + amplitude * std::sin(std::numbers::pi * s / len);
  return t0;
}

bool BoundarySpec::has_dirichlet() const {
  return std::any_of(sides.begin(), sides.end(),
                     [](const SideCondition& s) { return s.kind == BoundaryKind::dirichlet; });
}

bool BoundarySpec::has_dirichlet_or_robin() const {
  return std::any_of(sides.begin(), sides.end(),
                     [](const SideCondition& s) { return s.kind != BoundaryKind::neumann; });
}

void BoundarySpec::validate() const {
  for (const auto& s : sides) {
    if (s.profile == ProfileKind::sine && s.kind != BoundaryKind::dirichlet) {
      throw ConfigError("sine temperature profile is only valid on dirichlet sides");
    }
    if (s.kind == BoundaryKind::robin && !(s.h > 0.0)) {
      throw ConfigError("robin side needs a positive convective coefficient");
    }
  }
}

}  // namespace tfr
