#pragma once

#include <functional>
#include <vector>

#include "pfc/grid.hpp"
#include "pfc/solver.hpp"

namespace pfc {

/// Weight eta and direction field xi, sampled pointwise.
struct TestFieldPair {
  std::function<double(const Vec2&)> eta;
  std::function<Vec2(const Vec2&)> xi;

  static TestFieldPair unit_weight(std::function<Vec2(const Vec2&)> xi);
};

struct PairCheck {
  double max_length = 0.0;          // max |xi| over centres and faces
  double max_boundary_error = 0.0;  // max |xi . n_in - cos(alpha)| over boundary faces
  bool ok = false;
};

/// |xi| <= 1 + 1e-12 and the wall condition to 1e-10.
PairCheck check_pair(const Grid& grid, const Walls& walls, const TestFieldPair& pair);

/// Centred gradient; at wall cells the missing neighbour is mirrored.
std::vector<Vec2> centered_gradient(const Grid& grid, const ScalarField& u);

/// grad u / |grad u|, or the fallback where |grad u| <= 1e-14.
std::vector<Vec2> phase_field_normal(const Grid& grid, const ScalarField& u, Vec2 fallback = {1.0, 0.0});

/// Energy with density weighted by eta; eta == 1 reproduces discrete_energy.
double localized_energy(const Grid& grid, const PhaseField& state, const Walls& walls,
                        const std::function<double(const Vec2&)>& eta);

/// E(u; eta) - int eta xi . grad psi(u) - int_wall eta cos(alpha) psi(u).
double relative_entropy_primal(const Grid& grid, const PhaseField& state, const Walls& walls,
                               const TestFieldPair& pair);

/// E(u; eta) + int psi(u) div(eta xi); equals the primal form by summation by parts.
double relative_entropy_phasefield(const Grid& grid, const PhaseField& state, const Walls& walls,
                                   const TestFieldPair& pair);

struct DefectReport {
  double equipartition = 0.0;
  double boundary = 0.0;
  double tilt_excess = 0.0;
  /// int eta (1 - xi . nu) |grad psi(u)|; dominates tilt_excess.
  double tilt = 0.0;
  ScalarField psi;
  std::vector<Vec2> normal;

  /// equipartition + tilt + boundary, the defect form of the relative entropy.
  double sum() const { return equipartition + tilt + boundary; }
};

/// Throws RuntimeFailure when |u| exceeds 1 + 1e-8.
DefectReport defects(const Grid& grid, const PhaseField& state, const Walls& walls,
                     const TestFieldPair& pair);

}  // namespace pfc
