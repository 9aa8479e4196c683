#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pfc/interface.hpp"

using namespace pfc;
using std::numbers::pi;

namespace {

PhaseField half_disk(const Grid& g, double eps, double r, Vec2 c = {0.5, 0.0}) {
  return well_prepared(g, eps, [=](const Vec2& p) { return r - norm(p - c); });
}

PhaseField vertical(const Grid& g, double eps, double x0) {
  return well_prepared(g, eps, [=](const Vec2& p) { return p.x - x0; });
}

// Grim reaper graph over the unit strip whose walls sit at angle alpha.
struct Reaper {
  double alpha = pi / 3, y0 = 0.1;
  double a() const { return pi - 2 * alpha; }
  double graph(double x, double t) const { return y0 + a() * t - std::log(std::cos(a() * (x - 0.5))) / a(); }
};

}  // namespace

TEST_CASE("uniform phases have no interface") {
  const Grid g = build_grid(1.0, 0.5, 1.0 / 32);
  const auto minus = extract_interface(g, {ScalarField(g.size(), -1.0), 0.05, 0.0});
  CHECK(minus.empty());
  CHECK(minus.area == 0.0);
  CHECK(sharp_energy(minus, Walls::neumann()) == 0.0);
  const auto plus = extract_interface(g, {ScalarField(g.size(), 1.0), 0.05, 0.0});
  CHECK(plus.empty());
  CHECK(plus.area == doctest::Approx(0.5));
  CHECK(plus.wetted[static_cast<int>(Wall::bottom)] == doctest::Approx(1.0));
  CHECK(plus.wetted_length() == doctest::Approx(3.0));
}

TEST_CASE("vertical profile gives one oriented segment") {
  const Grid g = build_grid(1.0, 1.0, 1.0 / 64);
  const auto c = extract_interface(g, vertical(g, 0.05, 0.5));
  REQUIRE(c.chains.size() == 1);
  const auto& ch = c.chains[0];
  CHECK_FALSE(ch.closed);
  CHECK(ch.start_wall == Wall::top);
  CHECK(ch.end_wall == Wall::bottom);
  CHECK(std::abs(c.interior_length - 1.0) <= g.h);
  CHECK(std::abs(c.area - 0.5) <= g.h);
  for (const auto& n : ch.normals) CHECK(n.x == doctest::Approx(1.0));
  CHECK(c.contacts.size() == 2);
  const auto angles = contact_angle(c, Wall::bottom, 0.05);
  REQUIRE(angles.size() == 1);
  CHECK(angles[0].angle == doctest::Approx(pi / 2).epsilon(1e-9));

  const Walls left = Walls::with_contact(pi / 3, {Wall::left});
  CHECK(sharp_energy(c, left) == doctest::Approx(4.0 / 3.0).epsilon(g.h));
}

TEST_CASE("half-disk geometry") {
  const double eps = 0.01, r = 0.3;
  const Grid g = build_grid(1.0, 0.5, eps / 4);
  const auto c = extract_interface(g, half_disk(g, eps, r));
  REQUIRE(c.chains.size() == 1);
  CHECK(std::abs(c.interior_length - pi * r) <= 2 * g.h);
  CHECK(std::abs(c.wetted[static_cast<int>(Wall::bottom)] - 2 * r) <= 2 * g.h);
  CHECK(std::abs(c.area - 0.5 * pi * r * r) <= 2 * g.h * pi * r);
  for (std::size_t k = 0; k < c.chains[0].points.size(); ++k) {
    const Vec2 p = c.chains[0].points[k];
    const Vec2 radial_in = (Vec2{0.5, 0.0} - p) / norm(Vec2{0.5, 0.0} - p);
    CHECK(dot(c.chains[0].normals[k], radial_in) > 0.99);
  }
  const auto angles = contact_angle(c, Wall::bottom, eps);
  REQUIRE(angles.size() == 2);
  for (const auto& a : angles) CHECK(std::abs(a.angle - pi / 2) <= 0.03);
  const double e = sharp_energy(c, Walls::neumann());
  CHECK(e == doctest::Approx(4.0 / 3.0 * pi * r).epsilon(0.01));
  CHECK_THROWS_AS(contact_angle(c, Wall::bottom, 0.2), RuntimeFailure);
  CHECK(contact_angle(c, Wall::top, eps).empty());
}

TEST_CASE("closed loops and orientation") {
  const Grid g = build_grid(1.0, 1.0, 1.0 / 64);
  const auto blob = well_prepared(g, 0.03, [](const Vec2& p) { return 0.2 - norm(p - Vec2{0.5, 0.5}); });
  const auto c = extract_interface(g, blob);
  REQUIRE(c.chains.size() == 1);
  CHECK(c.chains[0].closed);
  CHECK(c.contacts.empty());
  CHECK(c.area == doctest::Approx(pi * 0.04).epsilon(0.02));
  // Complement: the hole is now the minus phase.
  PhaseField inv = blob;
  for (double& x : inv.u) x = -x;
  const auto ci = extract_interface(g, inv);
  CHECK(ci.area == doctest::Approx(1.0 - c.area).epsilon(1e-12));
  CHECK(ci.interior_length == doctest::Approx(c.interior_length).epsilon(1e-12));
  for (std::size_t k = 0; k < ci.chains[0].points.size(); ++k) {
    const Vec2 out = ci.chains[0].points[k] - Vec2{0.5, 0.5};
    CHECK(dot(ci.chains[0].normals[k], out / norm(out)) > 0.99);
  }
}

TEST_CASE("extraction recovers seed geometries") {
  const double eps = 0.02;
  const Grid g = build_grid(1.0, 0.5, eps / 4);
  const double tol = 2 * g.h + 2 * eps;
  const auto line = extract_interface(g, vertical(g, eps, 0.37));
  CHECK(max_distance_to(line, [](const Vec2& p) { return p.x - 0.37; }) <= tol);
  const auto disk = extract_interface(g, half_disk(g, eps, 0.3));
  CHECK(max_distance_to(disk, [](const Vec2& p) { return 0.3 - norm(p - Vec2{0.5, 0}); }) <= tol);
  const Reaper rp;
  const auto graph = extract_interface(g, well_prepared(g, eps, [&](const Vec2& p) { return p.y - rp.graph(p.x, 0); }));
  CHECK(max_distance_to(graph, [&](const Vec2& p) { return p.y - rp.graph(p.x, 0); }) <= tol);
  CHECK(hausdorff_distance(disk, disk) == 0.0);
}

TEST_CASE("sharp energy tracks the phase-field energy") {
  const double eps = 0.01;
  const Grid g = build_grid(1.0, 0.5, eps / 4);
  const Reaper rp;
  const Walls side = Walls::with_contact(rp.alpha, {Wall::left, Wall::right});
  struct Case {
    PhaseField u;
    Walls w;
  };
  const Case cases[] = {
      {vertical(g, eps, 0.5), Walls::neumann()},
      {half_disk(g, eps, 0.3), Walls::neumann()},
      {well_prepared(g, eps, [&](const Vec2& p) { return p.y - rp.graph(p.x, 0); }), side},
  };
  for (const auto& c : cases) {
    const double sharp = sharp_energy(extract_interface(g, c.u), c.w);
    const double diffuse = discrete_energy(g, c.u, c.w);
    CHECK(std::abs(sharp - diffuse) <= 0.10 * std::abs(sharp));
  }
}

TEST_CASE("normal velocity of synthetic motions") {
  const double eps = 0.01;
  const Grid g = build_grid(1.0, 0.5, eps / 4);
  auto c0 = extract_interface(g, half_disk(g, eps, 0.3));
  const auto still = normal_velocity(c0, c0, 1e-3, 10 * g.h);
  for (const auto& v : still) CHECK(v.V == 0.0);

  // R -> R - dR over dt = R dR: V = 1 / R.
  const double r = 0.3, dr = 0.004, dt = r * dr;
  auto c1 = extract_interface(g, half_disk(g, eps, r - dr));
  c1.t = dt;
  for (const auto& v : normal_velocity(c0, c1, dt, 10 * g.h)) CHECK(std::abs(v.V * r - 1.0) <= 0.05);
  auto cm = extract_interface(g, half_disk(g, eps, r + dr));
  cm.t = -dt;
  for (const auto& v : normal_velocity_centered(cm, c0, c1, 10 * g.h)) CHECK(std::abs(v.V * r - 1.0) <= 0.05);

  const Reaper rp;
  const double tau = 0.004;
  const auto ga = extract_interface(g, well_prepared(g, eps, [&](const Vec2& p) { return p.y - rp.graph(p.x, 0); }));
  const auto gb = extract_interface(g, well_prepared(g, eps, [&](const Vec2& p) { return p.y - rp.graph(p.x, tau); }));
  for (const auto& v : normal_velocity(ga, gb, tau, 10 * g.h))
    CHECK(std::abs(v.V - rp.a() * v.normal.y) <= 0.05 * rp.a() * v.normal.y);

  const auto far = extract_interface(g, half_disk(g, eps, 0.2));
  CHECK_THROWS_AS(normal_velocity(c0, far, 1.0, 10 * g.h), RuntimeFailure);
}

TEST_CASE("motion law on a stationary chord") {
  const double eps = 0.02;
  const Grid g = build_grid(1.0, 1.0, eps / 4);
  const auto c = extract_interface(g, vertical(g, eps, 0.5));
  const std::vector<VelocitySample> v = normal_velocity(c, c, 1.0, g.h);
  const VectorTestField zero{[](const Vec2&) { return Vec2{}; }, [](const Vec2&) { return Mat2{}; }};
  CHECK(motion_law_residual(g, c, v, zero, Walls::neumann()) == 0.0);
  // B_x = x(1-x) y, B_y = y(1-y) x^2: tangential on the unit square.
  const VectorTestField b{[](const Vec2& p) { return Vec2{p.x * (1 - p.x) * p.y, p.y * (1 - p.y) * p.x * p.x}; },
                          [](const Vec2& p) {
                            return Mat2{(1 - 2 * p.x) * p.y, p.x * (1 - p.x), 2 * p.x * p.y * (1 - p.y),
                                        (1 - 2 * p.y) * p.x * p.x};
                          }};
  CHECK(motion_law_residual(g, c, v, b, Walls::neumann()) <= 1e-2 * 1.0);
  const VectorTestField leaky{[](const Vec2&) { return Vec2{1.0, 0.0}; }, [](const Vec2&) { return Mat2{}; }};
  CHECK_THROWS_AS(motion_law_residual(g, c, v, leaky, Walls::neumann()), ConfigError);
}

TEST_CASE("dissipation and Hoelder checks") {
  const double eps = 0.02;
  const Grid g = build_grid(1.0, 0.5, eps / 4);
  std::vector<InterfaceCurve> still;
  for (int k = 0; k < 4; ++k) {
    auto c = extract_interface(g, vertical(g, eps, 0.5));
    c.t = 0.001 * k;
    still.push_back(c);
  }
  const double e0 = discrete_energy(g, vertical(g, eps, 0.5), Walls::neumann());
  const auto rs = bv_dissipation_check(still, Walls::neumann(), e0, 10 * g.h);
  CHECK(rs.dissipation == 0.0);
  CHECK(std::abs(rs.slack) <= 1e-12);
  CHECK(rs.dissipation_ok);
  CHECK(rs.holder_ok);

  // Exact circle law sampled along R(t)^2 = R0^2 - 2t.
  std::vector<InterfaceCurve> disk;
  const double r0 = 0.3, T = 0.02;
  for (int k = 0; k <= 40; ++k) {
    const double t = T * k / 40;
    auto c = extract_interface(g, half_disk(g, eps, std::sqrt(r0 * r0 - 2 * t)));
    c.t = t;
    disk.push_back(c);
  }
  const auto rd = bv_dissipation_check(disk, Walls::neumann(), discrete_energy(g, half_disk(g, eps, r0), Walls::neumann()),
                                       10 * g.h);
  const double rt = std::sqrt(r0 * r0 - 2 * T);
  CHECK(rd.dissipation == doctest::Approx(kSurfaceTension * pi * (r0 - rt)).epsilon(0.05));
  CHECK(std::abs(rd.slack) <= 0.05 * rd.energy_start);
  CHECK(rd.holder_ok);
}
