#include <doctest.h>

#include <numbers>

#include "pfc/grid.hpp"

using namespace pfc;

TEST_CASE("grid geometry") {
  const Grid g = build_grid(1.0, 0.5, 0.0625);
  CHECK(g.nx == 16);
  CHECK(g.ny == 8);
  CHECK(g.lx() == doctest::Approx(1.0));
  CHECK(g.index(3, 2) == 35);
  CHECK(g.center(0, 0).x == doctest::Approx(0.03125));
  CHECK(g.wall_distance({0.2, 0.45}) == doctest::Approx(0.05));
  CHECK_THROWS_AS(build_grid(1.0, 0.5, 0.3), ConfigError);
  CHECK_THROWS_AS(build_grid(1.0, 0.5, 0.1), ConfigError);  // fewer than 8 cells
}

TEST_CASE("wall normals point inward and tangents run counter-clockwise") {
  CHECK(inward_normal(Wall::left).x == 1.0);
  CHECK(inward_normal(Wall::top).y == -1.0);
  CHECK(wall_tangent(Wall::bottom).x == doctest::Approx(1.0));
  CHECK(wall_tangent(Wall::right).y == doctest::Approx(1.0));
  CHECK(wall_tangent(Wall::top).x == doctest::Approx(-1.0));
  for (Wall w : kAllWalls) CHECK(parse_wall(wall_name(w)) == w);
  CHECK_THROWS_AS(parse_wall("front"), ConfigError);
}

TEST_CASE("boundary faces enumerate every wall cell once per wall") {
  const Grid g = build_grid(1.0, 1.0, 0.125);
  const auto faces = boundary_faces(g);
  CHECK(faces.size() == 32);
  CHECK(faces.front().wall == Wall::left);
  CHECK(faces.back().wall == Wall::top);
  CHECK(faces.back().midpoint.y == doctest::Approx(1.0));
}

TEST_CASE("ghost values: mirror on Neumann walls, flux on contact walls") {
  const Walls w = Walls::with_contact(std::numbers::pi / 3, {Wall::left});
  CHECK(w[Wall::left].contact);
  CHECK_FALSE(w[Wall::right].contact);
  CHECK(ghost_value(0.3, w[Wall::right], 0.05, 0.01, 0.3) == 0.3);
  const double ghost = ghost_value(0.3, w[Wall::left], 0.05, 0.01, 0.3);
  const double flux = (0.3 - ghost) / 0.01;
  CHECK(flux == doctest::Approx(w[Wall::left].energy.derivative(0.3) / 0.05));
  CHECK(boundary_trace(1.0, 0.0) == 1.5);
}

TEST_CASE("phase swap maps alpha to pi - alpha on contact walls") {
  const Walls w = Walls::with_contact(2.0, {Wall::bottom, Wall::top});
  CHECK(w.swapped());
  const Walls s = w.phase_swapped();
  CHECK_FALSE(s.swapped());
  CHECK(s[Wall::bottom].energy.alpha() == doctest::Approx(std::numbers::pi - 2.0));
  CHECK_FALSE(s[Wall::left].contact);
}
