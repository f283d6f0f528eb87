#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <vector>

namespace tfr {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Row/column index of a grid node. Row i runs along y, column j along x.
struct NodeIndex {
  int i = 0;
  int j = 0;
  friend bool operator==(const NodeIndex&, const NodeIndex&) = default;
  friend auto operator<=>(const NodeIndex&, const NodeIndex&) = default;
};

/// Uniform node-centred discretisation of [0, lx] x [0, ly]. Nodes sit on the
/// boundary: x_j = j * hx for j in [0, nx), y_i = i * hy for i in [0, ny).
struct Grid {
  int nx = 0;
  int ny = 0;
  double lx = 0.0;
  double ly = 0.0;

  double hx() const { return lx / (nx - 1); }
  double hy() const { return ly / (ny - 1); }
  double x(int j) const { return j * hx(); }
  double y(int i) const { return i * hy(); }
  std::size_t node_count() const { return static_cast<std::size_t>(nx) * ny; }
  std::size_t flat(int i, int j) const { return static_cast<std::size_t>(i) * nx + j; }
  bool contains(Point p) const { return p.x >= 0.0 && p.x <= lx && p.y >= 0.0 && p.y <= ly; }

  friend bool operator==(const Grid&, const Grid&) = default;
};

/// Validating constructor. Throws ConfigError for nx < 2, ny < 2 or
/// non-positive (or non-finite) extents.
Grid make_grid(int nx, int ny, double lx, double ly);

/// Node closest to p in Euclidean distance; ties go to the lower index.
/// Throws ConfigError when p lies outside the domain.
NodeIndex nearest_node(const Grid& grid, Point p);

/// Real values on the nodes of a grid, row-major (ny, nx).
struct ScalarField {
  Grid grid;
  std::vector<double> values;
  bool normalized = false;

  ScalarField() = default;
  ScalarField(Grid g, double fill = 0.0)
      : grid(g), values(g.node_count(), fill) {}
  ScalarField(Grid g, std::vector<double> v, bool norm = false);

  double& at(int i, int j) { return values[grid.flat(i, j)]; }
  double at(int i, int j) const { return values[grid.flat(i, j)]; }
  double min() const;
  double max() const;

  friend bool operator==(const ScalarField&, const ScalarField&) = default;
};

struct SensorLayout {
  std::vector<Point> positions;

  std::size_t size() const { return positions.size(); }
  /// Throws ConfigError if empty, outside the grid's domain, or duplicated.
  void validate(const Grid& grid) const;

  friend bool operator==(const SensorLayout&, const SensorLayout&) = default;
};

struct Readings {
  SensorLayout layout;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  friend bool operator==(const Readings&, const Readings&) = default;
};

/// Reads the field at the node nearest to every sensor.
Readings sample_at_sensors(const ScalarField& field, const SensorLayout& layout);

/// sqrt(k) x sqrt(k) lattice at (p + 1) * L / (sqrt(k) + 1), p = 0..sqrt(k)-1,
/// in both directions. Throws ConfigError unless k is a positive perfect square.
SensorLayout uniform_sensor_layout(const Grid& grid, int k);

// ---------------------------------------------------------------------------
// Physical description of a condition.

struct Rect {
  double x_lo = 0.0;
  double y_lo = 0.0;
  double x_hi = 0.0;
  double y_hi = 0.0;

  bool contains(Point p) const { return p.x >= x_lo && p.x <= x_hi && p.y >= y_lo && p.y <= y_hi; }
  bool overlaps(const Rect& o) const {
    return x_lo < o.x_hi && o.x_lo < x_hi && y_lo < o.y_hi && o.y_lo < y_hi;
  }
  friend bool operator==(const Rect&, const Rect&) = default;
};

enum class SourceKind { uniform, gaussian };

struct HeatSource {
  SourceKind kind = SourceKind::uniform;
  Rect region;
  double power = 0.0;   // peak power density Q
  Point center;         // gaussian only
  double radius = 0.0;  // gaussian only
  double sigma = 1.0;   // gaussian deviation coefficient

  /// Throws ConfigError for a region outside the grid's domain, negative
  /// power or non-positive gaussian radius/sigma.
  void validate(const Grid& grid) const;
  friend bool operator==(const HeatSource&, const HeatSource&) = default;
};

enum class Side { left = 0, right = 1, bottom = 2, top = 3 };
inline constexpr std::array<Side, 4> kAllSides{Side::left, Side::right, Side::bottom, Side::top};

enum class BoundaryKind { dirichlet, neumann, robin };
enum class ProfileKind { constant, sine };

struct SideCondition {
  BoundaryKind kind = BoundaryKind::neumann;
  ProfileKind profile = ProfileKind::constant;
  double t0 = 298.0;        // wall temperature (dirichlet) or ambient (robin)
  double amplitude = 0.0;   // sine profile only
  double h = 50.0;          // robin only

  static SideCondition dirichlet(double t) { return {BoundaryKind::dirichlet, ProfileKind::constant, t, 0.0, 0.0}; }
  static SideCondition sine(double t, double amp) { return {BoundaryKind::dirichlet, ProfileKind::sine, t, amp, 0.0}; }
  static SideCondition neumann() { return {BoundaryKind::neumann, ProfileKind::constant, 0.0, 0.0, 0.0}; }
  static SideCondition robin(double h, double ambient) { return {BoundaryKind::robin, ProfileKind::constant, ambient, 0.0, h}; }

  /// Wall temperature at arc position s along a side of length len.
  double wall_temperature(double s, double len) const;
  friend bool operator==(const SideCondition&, const SideCondition&) = default;
};

struct BoundarySpec {
  std::array<SideCondition, 4> sides{};

  SideCondition& operator[](Side s) { return sides[static_cast<int>(s)]; }
  const SideCondition& operator[](Side s) const { return sides[static_cast<int>(s)]; }
  bool has_dirichlet() const;
  bool has_dirichlet_or_robin() const;
  /// Throws ConfigError for a sine profile on a non-dirichlet side or
  /// non-positive robin coefficient.
  void validate() const;
  friend bool operator==(const BoundarySpec&, const BoundarySpec&) = default;
};

enum class ConductivityKind { constant, affine };

/// lambda(T) = lambda0 (constant) or lambda0 + slope * (T - 298) (affine).
struct ConductivityModel {
  ConductivityKind kind = ConductivityKind::constant;
  double lambda0 = 1.0;
  double slope = 0.0;

  static ConductivityModel constant(double l) { return {ConductivityKind::constant, l, 0.0}; }
  static ConductivityModel affine(double l, double b) { return {ConductivityKind::affine, l, b}; }

  double at(double t) const { return kind == ConductivityKind::constant ? lambda0 : lambda0 + slope * (t - 298.0); }
  bool is_linear() const { return kind == ConductivityKind::constant || slope == 0.0; }
  friend bool operator==(const ConductivityModel&, const ConductivityModel&) = default;
};

/// One simulated condition: sources, boundary, solved field and readings.
struct Sample {
  std::string condition_id;
  std::vector<HeatSource> sources;
  BoundarySpec boundary;
  ScalarField field;
  Readings readings;
  std::uint64_t seed = 0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Affine normalisation range, computed from a training split.
struct NormStats {
  double t_min = 0.0;
  double t_max = 1.0;

  double span() const { return t_max - t_min; }
  friend bool operator==(const NormStats&, const NormStats&) = default;
};

/// Target/reference pairing. Both pointers refer into dataset storage that
/// must outlive the pair.
struct ReferencePair {
  const Sample* target = nullptr;
  const Sample* reference = nullptr;
};

}  // namespace tfr
