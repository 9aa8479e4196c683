#pragma once

#include <array>
#include <functional>
#include <optional>
#include <vector>

#include "pfc/grid.hpp"
#include "pfc/potentials.hpp"
#include "pfc/solver.hpp"

namespace pfc {

/// One connected piece of the zero level set of psi(u) - c0/2, oriented with
/// phase A = {u > 0} on its left, so normals = perp(tangent) point into A.
struct Polyline {
  std::vector<Vec2> points;
  std::vector<Vec2> normals;  // per vertex, unit
  bool closed = false;
  std::optional<Wall> start_wall;  // set for open chains
  std::optional<Wall> end_wall;
};

struct ContactPoint {
  Vec2 position;
  Wall wall;
  std::size_t chain;
  bool at_start;
};

struct WettedInterval {
  Wall wall;
  Vec2 from;
  Vec2 to;
};

struct InterfaceCurve {
  std::vector<Polyline> chains;
  std::vector<ContactPoint> contacts;
  std::vector<WettedInterval> wetted_intervals;
  double interior_length = 0.0;
  double area = 0.0;                  // |A|
  std::array<double, 4> wetted{};     // |A cap wall| per wall, kAllWalls order
  double t = 0.0;
  double lx = 0.0;
  double ly = 0.0;

  double wetted_length() const { return wetted[0] + wetted[1] + wetted[2] + wetted[3]; }
  std::size_t vertex_count() const;
  bool empty() const { return chains.empty(); }
};

/// Marching squares on the lattice of cell centres extended by wall traces.
InterfaceCurve extract_interface(const Grid& grid, const PhaseField& state);

/// c0 |interior| + sum over contact walls of the jump of sigma_hat times the wetted length.
double sharp_energy(const InterfaceCurve& curve, const Walls& walls);
/// Same with a single energy model for every wall it is handed.
double sharp_energy(const InterfaceCurve& curve, const EnergyModel& model);

/// Fitting band in arclength from the contact point, in units of eps.
struct AngleOptions {
  double band_min = 3.0;
  double band_max = 12.0;
  int min_vertices = 4;
  int fit_degree = 2;
};

struct ContactAngle {
  ContactPoint contact;
  double angle;  // arccos(nu_A . n_wall); equals alpha at equilibrium
  int vertices_used;
};

/// Angles at every contact point on the wall from a polynomial fit of the chain
/// over the band; throws RuntimeFailure when the chain does not reach past the
/// band or has too few vertices in it.
std::vector<ContactAngle> contact_angle(const InterfaceCurve& curve, Wall wall, double eps,
                                        const AngleOptions& options = {});

/// Normal speed V = v . nu_A at a vertex, positive when A recedes.
struct VelocitySample {
  Vec2 position;
  Vec2 normal;
  double V;
};

/// Displacement along nu_A from each vertex of a to curve b, divided by dt.
/// Throws RuntimeFailure if some displacement exceeds max_shift.
std::vector<VelocitySample> normal_velocity(const InterfaceCurve& a, const InterfaceCurve& b, double dt,
                                            double max_shift);

/// Central version from the neighbouring snapshots.
std::vector<VelocitySample> normal_velocity_centered(const InterfaceCurve& prev, const InterfaceCurve& cur,
                                                     const InterfaceCurve& next, double max_shift);

struct VectorTestField {
  std::function<Vec2(const Vec2&)> value;
  std::function<Mat2(const Vec2&)> gradient;  // m.xy = d B_x / d y
};

/// Signed motion-law defect
///   c0 int (I - nu x nu) : grad B + sum_walls jump int_wetted d_tau B_tau + c0 int V B . nu
/// (zero for an exact flow in the V = v . nu_A convention). Throws ConfigError if B is
/// not tangential on the walls.
double motion_law_defect(const Grid& grid, const InterfaceCurve& curve,
                         const std::vector<VelocitySample>& velocity, const VectorTestField& b,
                         const Walls& walls);
/// |motion_law_defect|.
double motion_law_residual(const Grid& grid, const InterfaceCurve& curve,
                           const std::vector<VelocitySample>& velocity, const VectorTestField& b,
                           const Walls& walls);

/// c0 int V^2 over the curve (trapezoid along chains).
double dissipation_rate(const InterfaceCurve& curve, const std::vector<VelocitySample>& velocity);

struct DissipationReport {
  double energy_start = 0.0;
  double energy_end = 0.0;
  double dissipation = 0.0;
  double slack = 0.0;  // energy_end + dissipation - energy_start
  double holder_worst = 0.0;  // max over pairs of c0 |dA| / (sqrt(2 dt) E_eps(u0))
  bool dissipation_ok = false;
  bool holder_ok = false;
};

/// Energy dissipation inequality and the 1/2-Hoelder volume bound over a curve history.
DissipationReport bv_dissipation_check(const std::vector<InterfaceCurve>& curves, const Walls& walls,
                                       double initial_phase_energy, double max_shift,
                                       double energy_tolerance = 0.05, double holder_tolerance = 0.10);

/// Max over the vertices of a of the distance to b, and vice versa.
double hausdorff_distance(const InterfaceCurve& a, const InterfaceCurve& b);
double max_distance_to(const InterfaceCurve& curve, const std::function<double(const Vec2&)>& distance);

}  // namespace pfc
