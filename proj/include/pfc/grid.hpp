#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <string_view>
#include <vector>

#include "pfc/potentials.hpp"
#include "pfc/types.hpp"

namespace pfc {

using ScalarField = std::vector<double>;

/// Uniform cell-centred grid on (0, nx h) x (0, ny h).
struct Grid {
  int nx = 0;
  int ny = 0;
  double h = 0.0;

  double lx() const { return nx * h; }
  double ly() const { return ny * h; }
  std::size_t size() const { return static_cast<std::size_t>(nx) * ny; }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
  Vec2 center(int i, int j) const { return {(i + 0.5) * h, (j + 0.5) * h}; }
  double cell_area() const { return h * h; }
  bool contains(const Vec2& p) const { return p.x >= 0 && p.y >= 0 && p.x <= lx() && p.y <= ly(); }
  /// Distance from p to the nearest wall.
  double wall_distance(const Vec2& p) const;
};

/// Builds the grid for extents lx x ly with spacing h; h must divide both.
Grid build_grid(double lx, double ly, double h);

enum class Wall { left = 0, right = 1, bottom = 2, top = 3 };
inline constexpr std::array<Wall, 4> kAllWalls{Wall::left, Wall::right, Wall::bottom, Wall::top};

std::string_view wall_name(Wall w);
Wall parse_wall(std::string_view name);
/// Inward-pointing unit normal.
Vec2 inward_normal(Wall w);
/// Unit tangent (counter-clockwise along the boundary).
Vec2 wall_tangent(Wall w);

struct WallSpec {
  Wall wall = Wall::left;
  bool contact = false;
  BoundaryEnergy energy = BoundaryEnergy::neumann();

  double cos_alpha() const { return energy.cos_alpha(); }
};

/// One condition per wall.
class Walls {
 public:
  Walls();
  static Walls neumann() { return Walls(); }
  /// Contact condition with angle alpha on the listed walls, Neumann elsewhere.
  static Walls with_contact(double alpha, std::initializer_list<Wall> contact_walls);

  const WallSpec& operator[](Wall w) const { return specs_[static_cast<int>(w)]; }
  const std::array<WallSpec, 4>& all() const { return specs_; }
  void set(const WallSpec& spec) { specs_[static_cast<int>(spec.wall)] = spec; }
  /// True if some contact wall carries a swapped (alpha > pi/2) energy.
  bool swapped() const;
  /// Walls with pi - alpha; pairs with u -> -u.
  Walls phase_swapped() const;

 private:
  std::array<WallSpec, 4> specs_;
};

/// Ghost value closing the Laplacian so that (u_in - u_ghost)/h = sigma'(u_prev)/eps.
double ghost_value(double u_in, const WallSpec& wall, double eps, double h, double u_prev_boundary);

/// Linear extrapolation to the wall from the two nearest interior cells.
inline double boundary_trace(double u_near, double u_next) { return 1.5 * u_near - 0.5 * u_next; }

struct BoundaryFace {
  Wall wall;
  int i;
  int j;
  Vec2 midpoint;
};

/// All boundary faces, walls in kAllWalls order, cells along each wall ascending.
std::vector<BoundaryFace> boundary_faces(const Grid& grid);

}  // namespace pfc
