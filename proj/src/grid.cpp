#include "pfc/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace pfc {

double Grid::wall_distance(const Vec2& p) const {
  return std::min({p.x, lx() - p.x, p.y, ly() - p.y});
}

Grid build_grid(double lx, double ly, double h) {
  if (!(lx > 0.0 && ly > 0.0 && h > 0.0)) throw ConfigError("domain extents and h must be positive");
  const double fx = lx / h, fy = ly / h;
  const long nx = std::lround(fx), ny = std::lround(fy);
  if (std::abs(nx * h - lx) > 1e-9 * lx || std::abs(ny * h - ly) > 1e-9 * ly) {
    throw ConfigError("h does not divide the domain extents");
  }
  if (nx < 8 || ny < 8) throw ConfigError("grid needs at least 8 cells per direction");
  return Grid{static_cast<int>(nx), static_cast<int>(ny), h};
}

std::string_view wall_name(Wall w) {
  switch (w) {
    case Wall::left: return "left";
    case Wall::right: return "right";
    case Wall::bottom: return "bottom";
    case Wall::top: return "top";
  }
  return "?";
}

Wall parse_wall(std::string_view name) {
  for (Wall w : kAllWalls) {
    if (wall_name(w) == name) return w;
  }
  throw ConfigError("unknown wall '" + std::string(name) + "'");
}

Vec2 inward_normal(Wall w) {
  switch (w) {
    case Wall::left: return {1.0, 0.0};
    case Wall::right: return {-1.0, 0.0};
    case Wall::bottom: return {0.0, 1.0};
    case Wall::top: return {0.0, -1.0};
  }
  return {};
}

Vec2 wall_tangent(Wall w) { return -perp(inward_normal(w)); }

Walls::Walls() {
  for (Wall w : kAllWalls) specs_[static_cast<int>(w)] = WallSpec{w, false, BoundaryEnergy::neumann()};
}

Walls Walls::with_contact(double alpha, std::initializer_list<Wall> contact_walls) {
  Walls walls;
  for (Wall w : contact_walls) walls.set(WallSpec{w, true, BoundaryEnergy(alpha)});
  return walls;
}

bool Walls::swapped() const {
  return std::any_of(specs_.begin(), specs_.end(),
                     [](const WallSpec& s) { return s.contact && s.energy.swapped(); });
}

Walls Walls::phase_swapped() const {
  Walls out;
  for (const auto& s : specs_) {
    if (s.contact) out.set(WallSpec{s.wall, true, s.energy.phase_swapped()});
  }
  return out;
}

double ghost_value(double u_in, const WallSpec& wall, double eps, double h, double u_prev_boundary) {
  if (!wall.contact) return u_in;
  return u_in - (h / eps) * wall.energy.derivative(u_prev_boundary);
}

std::vector<BoundaryFace> boundary_faces(const Grid& g) {
  std::vector<BoundaryFace> faces;
  faces.reserve(2 * (g.nx + g.ny));
  for (int j = 0; j < g.ny; ++j) faces.push_back({Wall::left, 0, j, {0.0, (j + 0.5) * g.h}});
  for (int j = 0; j < g.ny; ++j) faces.push_back({Wall::right, g.nx - 1, j, {g.lx(), (j + 0.5) * g.h}});
  for (int i = 0; i < g.nx; ++i) faces.push_back({Wall::bottom, i, 0, {(i + 0.5) * g.h, 0.0}});
  for (int i = 0; i < g.nx; ++i) faces.push_back({Wall::top, i, g.ny - 1, {(i + 0.5) * g.h, g.ly()}});
  return faces;
}

}  // namespace pfc
