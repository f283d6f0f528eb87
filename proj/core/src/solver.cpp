#include "tfr/solver.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <optional>

#include "tfr/error.hpp"

namespace tfr {

double source_density(const HeatSource& src, double x, double y) {
  if (!src.region.contains({x, y})) return 0.0;
  if (src.kind == SourceKind::uniform) return src.power;
  const double dx = x - src.center.x;
  const double dy = y - src.center.y;
  return src.power * std::exp(-src.sigma * (dx * dx + dy * dy) / (src.radius * src.radius));
}

namespace {

// Geometry and boundary bookkeeping shared by the assembler and the residual.
struct Layout {
  Grid grid;
  std::vector<std::optional<double>> pinned;  // dirichlet value per node
  std::vector<double> volume;
  std::vector<double> source;                 // integrated over the control volume
  // Robin contribution per node: sum of h * face_length and h * face_length * T0.
  std::vector<double> robin_coef;
  std::vector<double> robin_rhs;
};

bool on_side(const Grid& g, int i, int j, Side s) {
  switch (s) {
    case Side::left: return j == 0;
    case Side::right: return j == g.nx - 1;
    case Side::bottom: return i == 0;
    case Side::top: return i == g.ny - 1;
  }
  return false;
}

Layout build_layout(const Grid& g, std::span<const HeatSource> sources, const BoundarySpec& bc) {
  Layout lay;
  lay.grid = g;
  const std::size_t n = g.node_count();
  lay.pinned.assign(n, std::nullopt);
  lay.volume.assign(n, 0.0);
  lay.source.assign(n, 0.0);
  lay.robin_coef.assign(n, 0.0);
  lay.robin_rhs.assign(n, 0.0);
  const double hx = g.hx();
  const double hy = g.hy();
  for (int i = 0; i < g.ny; ++i) {
    const double wy = (i == 0 || i == g.ny - 1) ? 0.5 * hy : hy;
    for (int j = 0; j < g.nx; ++j) {
      const double wx = (j == 0 || j == g.nx - 1) ? 0.5 * hx : hx;
      const std::size_t p = g.flat(i, j);
      lay.volume[p] = wx * wy;
      double phi = 0.0;
      for (const auto& s : sources) phi += source_density(s, g.x(j), g.y(i));
      lay.source[p] = phi * wx * wy;

      double pinned_sum = 0.0;
      int pinned_count = 0;
      for (Side side : kAllSides) {
        if (!on_side(g, i, j, side)) continue;
        const SideCondition& c = bc[side];
        const bool vertical = side == Side::left || side == Side::right;
        if (c.kind == BoundaryKind::dirichlet) {
          const double s = vertical ? g.y(i) : g.x(j);
          const double len = vertical ? g.ly : g.lx;
          pinned_sum += c.wall_temperature(s, len);
          ++pinned_count;
        } else if (c.kind == BoundaryKind::robin) {
          const double face = vertical ? wy : wx;
          lay.robin_coef[p] += c.h * face;
          lay.robin_rhs[p] += c.h * face * c.t0;
        }
      }
      // Corners shared by two dirichlet sides take the mean of both walls.
      if (pinned_count > 0) lay.pinned[p] = pinned_sum / pinned_count;
    }
  }
  return lay;
}

double harmonic(double a, double b) { return 2.0 * a * b / (a + b); }

std::vector<double> node_conductivity(const std::vector<double>& t, const ConductivityModel& cond) {
  std::vector<double> k(t.size());
  for (std::size_t p = 0; p < t.size(); ++p) {
    k[p] = cond.at(t[p]);
    if (!(k[p] > 0.0) || !std::isfinite(k[p])) {
      throw NumericError("thermal conductivity became non-positive (lambda = " + std::to_string(k[p]) +
                         " at T = " + std::to_string(t[p]) + " K)");
    }
  }
  return k;
}

// Calls visit(p, q, conductance) once per interior face, p < q.
template <class Visit>
void for_each_face(const Grid& g, const std::vector<double>& k, Visit&& visit) {
  const double hx = g.hx();
  const double hy = g.hy();
  for (int i = 0; i < g.ny; ++i) {
    const double wy = (i == 0 || i == g.ny - 1) ? 0.5 * hy : hy;
    for (int j = 0; j + 1 < g.nx; ++j) {
      const std::size_t p = g.flat(i, j);
      const std::size_t q = p + 1;
      visit(p, q, harmonic(k[p], k[q]) * wy / hx);
    }
  }
  for (int i = 0; i + 1 < g.ny; ++i) {
    for (int j = 0; j < g.nx; ++j) {
      const double wx = (j == 0 || j == g.nx - 1) ? 0.5 * hx : hx;
      const std::size_t p = g.flat(i, j);
      const std::size_t q = p + g.nx;
      visit(p, q, harmonic(k[p], k[q]) * wx / hy);
    }
  }
}

class LinearSystem {
 public:
  explicit LinearSystem(const Layout& lay) : lay_(lay) {
    const std::size_t n = lay.grid.node_count();
    unknown_.assign(n, -1);
    for (std::size_t p = 0; p < n; ++p) {
      if (!lay.pinned[p]) unknown_[p] = unknowns_++;
    }
  }

  int unknowns() const { return unknowns_; }

  // Solves with conductivity frozen at node values k; returns the full field
  // and writes the relative residual.
  std::vector<double> solve(const std::vector<double>& k, double& rel_residual) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(unknowns_) * 5);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(unknowns_);
    std::vector<double> diag(unknowns_, 0.0);
    for (std::size_t p = 0; p < unknown_.size(); ++p) {
      const int u = unknown_[p];
      if (u < 0) continue;
      rhs[u] += lay_.source[p] + lay_.robin_rhs[p];
      diag[u] += lay_.robin_coef[p];
    }
    for_each_face(lay_.grid, k, [&](std::size_t p, std::size_t q, double c) {
      const int up = unknown_[p];
      const int uq = unknown_[q];
      if (up >= 0) diag[up] += c;
      if (uq >= 0) diag[uq] += c;
      if (up >= 0 && uq >= 0) {
        trip.emplace_back(up, uq, -c);
        trip.emplace_back(uq, up, -c);
      } else if (up >= 0) {
        rhs[up] += c * *lay_.pinned[q];
      } else if (uq >= 0) {
        rhs[uq] += c * *lay_.pinned[p];
      }
    });
    for (int u = 0; u < unknowns_; ++u) trip.emplace_back(u, u, diag[u]);

    Eigen::SparseMatrix<double> a(unknowns_, unknowns_);
    a.setFromTriplets(trip.begin(), trip.end());
    if (!analyzed_) {
      chol_.analyzePattern(a);
      analyzed_ = true;
    }
    chol_.factorize(a);
    if (chol_.info() != Eigen::Success) throw NumericError("conduction matrix factorisation failed");
    Eigen::VectorXd x = chol_.solve(rhs);
    // One step of iterative refinement keeps the residual at round-off level.
    Eigen::VectorXd r = rhs - a * x;
    x += chol_.solve(r);
    r = rhs - a * x;
    const double denom = std::max(rhs.norm(), 1e-300);
    rel_residual = r.norm() / denom;

    std::vector<double> t(unknown_.size());
    for (std::size_t p = 0; p < unknown_.size(); ++p) {
      t[p] = unknown_[p] >= 0 ? x[unknown_[p]] : *lay_.pinned[p];
    }
    return t;
  }

 private:
  const Layout& lay_;
  std::vector<int> unknown_;
  int unknowns_ = 0;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> chol_;
  bool analyzed_ = false;
};

void check_inputs(const Grid& grid, std::span<const HeatSource> sources, const BoundarySpec& boundary,
                  const ConductivityModel& cond) {
  make_grid(grid.nx, grid.ny, grid.lx, grid.ly);
  boundary.validate();
  for (const auto& s : sources) s.validate(grid);
  if (!(cond.lambda0 > 0.0)) throw ConfigError("conductivity lambda0 must be positive");
}

}  // namespace

SolveResult solve_steady(const Grid& grid, std::span<const HeatSource> sources, const BoundarySpec& boundary,
                         const ConductivityModel& cond, const SolveOptions& opts) {
  check_inputs(grid, sources, boundary, cond);
  if (!boundary.has_dirichlet_or_robin()) {
    throw ConfigError("all-Neumann boundary leaves the steady problem singular");
  }
  const Layout lay = build_layout(grid, sources, boundary);
  LinearSystem system(lay);

  double start = 298.0;
  if (boundary.has_dirichlet()) {
    double sum = 0.0;
    int count = 0;
    for (const auto& v : lay.pinned) {
      if (v) {
        sum += *v;
        ++count;
      }
    }
    start = sum / count;
  }

  SolveResult result;
  SolveReport& rep = result.report;
  std::vector<double> t(grid.node_count(), start);

  if (cond.is_linear()) {
    t = system.solve(node_conductivity(t, cond), rep.linear_residual);
    rep.iterations = 1;
    rep.nonlinear_delta = 0.0;
    rep.converged = rep.linear_residual <= opts.linear_tol;
  } else {
    for (int it = 0; it < opts.max_picard; ++it) {
      std::vector<double> next = system.solve(node_conductivity(t, cond), rep.linear_residual);
      double delta = 0.0;
      for (std::size_t p = 0; p < t.size(); ++p) delta = std::max(delta, std::abs(next[p] - t[p]));
      t = std::move(next);
      rep.iterations = it + 1;
      rep.nonlinear_delta = delta;
      rep.delta_history.push_back(delta);
      if (!std::isfinite(delta)) throw NumericError("Picard iteration diverged");
      if (delta <= opts.nonlinear_tol) break;
    }
    // Conductivity must stay positive at the returned iterate as well.
    node_conductivity(t, cond);
    rep.converged = rep.nonlinear_delta <= opts.nonlinear_tol && rep.linear_residual <= opts.linear_tol;
  }
  result.field = ScalarField(grid, std::move(t));
  return result;
}

std::vector<double> pde_residual_map(const ScalarField& field, std::span<const HeatSource> sources,
                                     const BoundarySpec& boundary, const ConductivityModel& cond,
                                     bool per_area) {
  const Grid& g = field.grid;
  if (field.values.size() != g.node_count()) throw ConfigError("field shape does not match its grid");
  check_inputs(g, sources, boundary, cond);
  const Layout lay = build_layout(g, sources, boundary);
  const auto k = node_conductivity(field.values, cond);
  const auto& t = field.values;

  std::vector<double> r(g.node_count(), 0.0);
  for (std::size_t p = 0; p < r.size(); ++p) {
    r[p] = lay.source[p] + lay.robin_rhs[p] - lay.robin_coef[p] * t[p];
  }
  for_each_face(g, k, [&](std::size_t p, std::size_t q, double c) {
    const double flux = c * (t[q] - t[p]);
    r[p] += flux;
    r[q] -= flux;
  });
  for (std::size_t p = 0; p < r.size(); ++p) {
    if (lay.pinned[p]) {
      r[p] = 0.0;
    } else if (per_area) {
      r[p] /= lay.volume[p];
    }
  }
  return r;
}

namespace {

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

double pde_residual(const ScalarField& field, std::span<const HeatSource> sources, const BoundarySpec& boundary,
                    const ConductivityModel& cond) {
  return max_abs(pde_residual_map(field, sources, boundary, cond, false));
}

double pde_residual_density(const ScalarField& field, std::span<const HeatSource> sources,
                            const BoundarySpec& boundary, const ConductivityModel& cond) {
  return max_abs(pde_residual_map(field, sources, boundary, cond, true));
}

}  // namespace tfr
