#pragma once

#include <span>
#include <vector>

#include "tfr/domain.hpp"

namespace tfr {

/// Power density of one source at (x, y): Q inside the source rectangle
/// (uniform) or Q * exp(-sigma * r2 / radius^2) (gaussian); 0 outside.
double source_density(const HeatSource& src, double x, double y);

struct SolveOptions {
  double nonlinear_tol = 1e-8;  // K, max-norm change between Picard iterates
  int max_picard = 100;
  double linear_tol = 1e-9;     // relative residual of each linear solve

  friend bool operator==(const SolveOptions&, const SolveOptions&) = default;
};

struct SolveReport {
  int iterations = 0;             // number of linear solves
  double linear_residual = 0.0;   // relative, last solve
  double nonlinear_delta = 0.0;   // K, max-norm change in the last Picard step
  bool converged = false;
  std::vector<double> delta_history;  // one entry per Picard step
};

struct SolveResult {
  ScalarField field;
  SolveReport report;
};

/// Steady conduction div(lambda grad T) + sum(phi_i) = 0 on a node-centred
/// finite-volume stencil (five points, harmonic-mean face conductivity).
/// Dirichlet nodes are pinned, Neumann faces carry no flux, Robin faces lose
/// h * (T - T0) to the ambient. Affine conductivity is handled by Picard
/// iteration from a uniform start at the mean wall temperature.
///
/// Throws ConfigError for an all-Neumann boundary or invalid inputs, and
/// NumericError if lambda(T) <= 0 is encountered. Non-convergence is not an
/// error: it is reported through SolveReport::converged.
SolveResult solve_steady(const Grid& grid, std::span<const HeatSource> sources,
                         const BoundarySpec& boundary, const ConductivityModel& cond,
                         const SolveOptions& opts = {});

/// Max-norm of the assembled finite-volume balance (face fluxes plus the
/// source integrated over each control volume, minus Robin losses) over all
/// nodes not pinned by a Dirichlet side. This is the residual of the linear
/// system the solver factorises. Conductivity is evaluated at the given field.
double pde_residual(const ScalarField& field, std::span<const HeatSource> sources,
                    const BoundarySpec& boundary, const ConductivityModel& cond);

/// Same balance divided by each node's control-volume area.
double pde_residual_density(const ScalarField& field, std::span<const HeatSource> sources,
                            const BoundarySpec& boundary, const ConductivityModel& cond);

/// Per-node residual map behind pde_residual(); zero on Dirichlet nodes.
std::vector<double> pde_residual_map(const ScalarField& field, std::span<const HeatSource> sources,
                                     const BoundarySpec& boundary, const ConductivityModel& cond,
                                     bool per_area = false);

}  // namespace tfr
