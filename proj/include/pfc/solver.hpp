#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "pfc/grid.hpp"

namespace pfc {

/// Order parameter on the grid with its interface width and time stamp.
struct PhaseField {
  ScalarField u;
  double eps = 0.0;
  double t = 0.0;
};

enum class Scheme {
  /// Implicit 2u^3, explicit -2u, boundary density stabilised by its curvature bound.
  convex_splitting,
  /// Linear: W'(u) ~ W'(u^n) + S (u - u^n); same boundary treatment.
  stabilized_semi_implicit,
  /// Difference-quotient (average vector field) scheme; exact discrete energy law.
  discrete_gradient,
};

std::string_view scheme_name(Scheme s);
Scheme parse_scheme(std::string_view name);

struct SolverConfig {
  double tau = 0.0;
  Scheme scheme = Scheme::convex_splitting;
  double stabilization = 2.0;
  double t_end = 0.0;
  /// 0 selects a stride giving at most 200 snapshots.
  int snapshot_stride = 0;
  double linear_tolerance = 1e-10;
  double newton_tolerance = 1e-12;
  int max_newton = 50;
  int max_cg = 5000;
};

struct EnergyParts {
  double gradient = 0.0;
  double potential = 0.0;
  double boundary = 0.0;

  double bulk() const { return gradient + potential; }
  double total() const { return gradient + potential + boundary; }
};

/// Discrete Lyapunov functional of the schemes: face differences for the gradient
/// term, cell values on the boundary faces for sigma.
EnergyParts discrete_energy_parts(const Grid& grid, const PhaseField& state, const Walls& walls);
double discrete_energy(const Grid& grid, const PhaseField& state, const Walls& walls);

struct StepStats {
  int newton_iterations = 0;
  int cg_iterations = 0;
};

/// One time step; throws RuntimeFailure on solver non-convergence and
/// ConfigError when tau exceeds the scheme's cap.
PhaseField step(const Grid& grid, const PhaseField& state, const SolverConfig& cfg,
                const Walls& walls, StepStats* stats = nullptr);

/// Largest admissible tau for the scheme (infinity when unconditional).
double stability_cap(Scheme scheme, double eps);

struct LedgerRow {
  int step = 0;
  double t = 0.0;
  double energy = 0.0;
  double bulk = 0.0;
  double boundary = 0.0;
  double dissipation = 0.0;  // tau * sum h^2 eps ((u+ - u)/tau)^2 for this step
  double max_abs_u = 0.0;
};

struct Trajectory {
  Grid grid;
  Walls walls;
  SolverConfig config;
  double eps = 0.0;
  std::vector<PhaseField> snapshots;
  std::vector<LedgerRow> ledger;  // row 0 is the initial state

  const PhaseField& final_state() const { return snapshots.back(); }
};

using StepObserver = std::function<void(const PhaseField&, const LedgerRow&)>;

Trajectory run(const Grid& grid, const PhaseField& initial, const SolverConfig& cfg,
               const Walls& walls, const StepObserver& observer = {});

/// Space-time test function with analytic spatial gradient.
struct SpaceTimeTest {
  std::function<double(const Vec2&, double)> value;
  std::function<Vec2(const Vec2&, double)> gradient;
};

/// |int int zeta d_t u + grad zeta . grad u + zeta W'(u)/eps^2 + int_dOmega zeta sigma'(u)/eps|
/// by midpoint-in-time quadrature over consecutive snapshots.
double weak_form_residual(const Trajectory& trajectory, const SpaceTimeTest& zeta);

/// u = clamp(tanh(d / eps)) for a signed distance d (positive inside the +1 phase).
PhaseField well_prepared(const Grid& grid, double eps,
                         const std::function<double(const Vec2&)>& signed_distance);

/// Text checkpoint: comment line, "nx ny h eps t", then ny rows of nx values.
void write_checkpoint(const std::string& path, const Grid& grid, const PhaseField& state);
PhaseField read_checkpoint(const std::string& path, Grid* grid_out);

}  // namespace pfc
