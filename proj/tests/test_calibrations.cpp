#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "pfc/calibrations.hpp"

using namespace pfc;
using std::numbers::pi;

namespace {

FlowParams disk_params() {
  FlowParams p;
  p.lx = 1.0;
  p.ly = 0.5;
  p.r0 = 0.3;
  p.horizon = 0.02;
  return p;
}

FlowParams translator_params() {
  FlowParams p;
  p.horizon = 0.2;
  return p;
}

void check_only_length_fails(const CalibrationReport& rep) {
  const auto failed = rep.failed();
  REQUIRE(failed.size() == 1);
  CHECK(failed.front() == "xi_length");
  CHECK(rep.find("xi_length")->worst_ratio > 1.04);
}

}  // namespace

TEST_CASE("reference flows follow their closed forms") {
  const auto disk = build_reference(FlowKind::shrinking_half_disk, disk_params());
  CHECK(disk.radius(0.02) * disk.radius(0.02) == doctest::Approx(0.05).epsilon(1e-14));
  CHECK(disk.contact_angle() == doctest::Approx(pi / 2));
  const auto s = disk.interface(0.01, 9);
  for (const auto& q : s) {
    CHECK(q.V == doctest::Approx(1.0 / disk.radius(0.01)));
    CHECK(disk.distance(q.point, 0.01) < 1e-14);
  }
  CHECK(disk.area(0.0) == doctest::Approx(0.5 * pi * 0.09));

  const auto tr = build_reference(FlowKind::strip_translator, translator_params());
  CHECK(tr.speed() == doctest::Approx(pi / 3).epsilon(1e-14));
  // The graph meets both side walls at the angle alpha.
  for (const auto& c : tr.interface(0.1, 2)) {
    const Vec2 n = c.point.x < 0.5 ? inward_normal(Wall::left) : inward_normal(Wall::right);
    CHECK(std::acos(dot(c.normal, n)) == doctest::Approx(pi / 3).epsilon(1e-12));
  }
  CHECK(tr.height(0.5, 0.1) - tr.height(0.5, 0.0) == doctest::Approx(0.1 * pi / 3));

  FlowParams flat = translator_params();
  flat.alpha = pi / 2;
  const auto f = build_reference(FlowKind::strip_translator, flat);
  CHECK(f.speed() == 0.0);
  CHECK(f.height(0.1, 0.2) == f.height(0.9, 0.0));
}

TEST_CASE("translator distance is the Euclidean distance to the graph") {
  const auto tr = build_reference(FlowKind::strip_translator, translator_params());
  for (double x : {0.1, 0.37, 0.5, 0.81})
    for (double off : {-0.1, 0.02, 0.2}) {
      const double th = tr.speed() * (x - 0.5);
      const Vec2 foot{x, tr.height(x, 0.05)};
      const Vec2 p = foot + Vec2{-std::sin(th), std::cos(th)} * off;
      CHECK(tr.signed_distance(p, 0.05) == doctest::Approx(off).epsilon(1e-9));
    }
}

TEST_CASE("invalid flows are rejected") {
  FlowParams p = disk_params();
  p.horizon = 0.045;
  CHECK_THROWS_AS(build_reference(FlowKind::shrinking_half_disk, p), ConfigError);
  p.horizon = 0.04;
  p.eps = 0.03;  // R(T) = 0.1 is within 4 eps of extinction
  CHECK_THROWS_AS(build_reference(FlowKind::shrinking_half_disk, p), ConfigError);
  FlowParams t = translator_params();
  t.horizon = 1.0;
  CHECK_THROWS_AS(build_reference(FlowKind::strip_translator, t), ConfigError);
  t = translator_params();
  t.center_x = 0.3;
  CHECK_THROWS_AS(build_reference(FlowKind::strip_translator, t), ConfigError);
  CHECK_THROWS_AS(parse_flow("ellipse"), ConfigError);
}

TEST_CASE("calibrations meet the wall conditions") {
  const auto tr = build_reference(FlowKind::strip_translator, translator_params());
  const auto cal = build_calibration(tr, build_grid(1.0, 1.0, 1.0 / 64));
  for (double y : {0.3, 0.5, 0.9}) {
    CHECK(std::abs(dot(cal.xi({1.0, y}, 0.1), inward_normal(Wall::right)) - std::cos(pi / 3)) < 1e-10);
    CHECK(std::abs(dot(cal.xi({0.0, y}, 0.1), inward_normal(Wall::left)) - std::cos(pi / 3)) < 1e-10);
  }
  for (const auto& q : tr.interface(0.1, 33)) CHECK(std::abs(cal.weight(q.point, 0.1)) < 1e-12);

  const auto disk = build_reference(FlowKind::shrinking_half_disk, disk_params());
  const auto dc = build_calibration(disk, build_grid(1.0, 0.5, 1.0 / 128));
  for (double x : {0.05, 0.3, 0.5, 0.52, 0.9}) CHECK(dc.velocity({x, 0.0}, 0.01).y == 0.0);
  for (const auto& q : disk.interface(0.01, 33)) CHECK(std::abs(dc.weight(q.point, 0.01)) < 1e-12);
}

TEST_CASE("coarse grids are rejected") {
  const auto disk = build_reference(FlowKind::shrinking_half_disk, disk_params());
  CHECK_THROWS_AS(build_calibration(disk, build_grid(1.0, 0.5, 1.0 / 16)), ConfigError);
}

TEST_CASE("all three calibrations verify on 256^2 grids and the negative control fails only the length") {
  {
    FlowParams p;
    const auto flow = build_reference(FlowKind::stationary_chord, p);
    const auto cal = build_calibration(flow, build_grid(1.0, 1.0, 1.0 / 256));
    CHECK(verify_calibration(cal, flow).pass());
    check_only_length_fails(verify_calibration(corrupt_length(cal, flow), flow));
  }
  {
    const auto flow = build_reference(FlowKind::shrinking_half_disk, disk_params());
    const auto cal = build_calibration(flow, build_grid(1.0, 0.5, 1.0 / 256));
    const auto rep = verify_calibration(cal, flow);
    CHECK(rep.pass());
    // Away from the mollified core B . xi + div xi is the curvature mismatch 1/R - 1/|x|.
    CHECK(rep.find("motion_compatibility")->worst_ratio < 1.0);
    check_only_length_fails(verify_calibration(corrupt_length(cal, flow), flow));
  }
  {
    const auto flow = build_reference(FlowKind::strip_translator, translator_params());
    const auto cal = build_calibration(flow, build_grid(1.0, 1.0, 1.0 / 256));
    CHECK(verify_calibration(cal, flow).pass());
    check_only_length_fails(verify_calibration(corrupt_length(cal, flow), flow));
  }
}

TEST_CASE("swapped translator negates xi and theta and mirrors the standard one") {
  FlowParams p = translator_params();
  const auto standard = build_reference(FlowKind::strip_translator, p);
  p.alpha = pi - p.alpha;  // cap-shaped graph moving down
  p.y0 = 0.75;
  const auto cap = build_reference(FlowKind::strip_translator, p);
  p.swap_phases = true;
  const auto swapped = build_reference(FlowKind::strip_translator, p);
  CHECK(swapped.contact_angle() == doctest::Approx(pi / 3));
  CHECK(swapped.walls()[Wall::left].cos_alpha() == doctest::Approx(0.5));

  const Grid g = build_grid(1.0, 1.0, 1.0 / 128);
  const auto cal = build_calibration(swapped, g);
  CHECK(verify_calibration(cal, swapped).pass());
  const auto cal_cap = build_calibration(cap, g);
  const auto cal_std = build_calibration(standard, g);
  for (const Vec2 q : {Vec2{0.3, 0.42}, Vec2{0.71, 0.6}, Vec2{0.02, 0.9}}) {
    CHECK(cal.xi(q, 0.05).x == -cal_cap.xi(q, 0.05).x);
    CHECK(cal.xi(q, 0.05).y == -cal_cap.xi(q, 0.05).y);
    CHECK(cal.weight(q, 0.05) == -cal_cap.weight(q, 0.05));
    CHECK(swapped.inside(q, 0.05) != cap.inside(q, 0.05));
    // Reflection y -> 1 - y of the standard flow.
    const Vec2 m{q.x, 1.0 - q.y};
    CHECK(cal.xi(q, 0.05).x == doctest::Approx(cal_std.xi(m, 0.05).x));
    CHECK(cal.xi(q, 0.05).y == doctest::Approx(-cal_std.xi(m, 0.05).y));
    CHECK(cal.weight(q, 0.05) == doctest::Approx(cal_std.weight(m, 0.05)));
  }
}

TEST_CASE("sharp relative entropy") {
  const EnergyModel model(pi / 2);
  const auto flow = build_reference(FlowKind::shrinking_half_disk, disk_params());
  const auto cal = build_calibration(flow, build_grid(1.0, 0.5, 1.0 / 128));
  auto curve = flow.curve(0.01, 400);
  const double len = curve.interior_length;
  CHECK(relative_entropy_sharp(curve, cal, model) <= 1e-3 * model.c0() * len);
  CHECK(relative_entropy_sharp(curve, cal, model) >= -1e-10);

  const double theta = 0.3;
  for (auto& n : curve.chains.front().normals)
    n = {std::cos(theta) * n.x - std::sin(theta) * n.y, std::sin(theta) * n.x + std::cos(theta) * n.y};
  CHECK(relative_entropy_sharp(curve, cal, model) ==
        doctest::Approx(model.c0() * len * (1.0 - std::cos(theta))).epsilon(1e-3));

  CHECK(relative_entropy_sharp(InterfaceCurve{}, cal, model) == 0.0);
}

TEST_CASE("bulk error") {
  FlowParams p;
  const auto chord = build_reference(FlowKind::stationary_chord, p);
  const Grid g = build_grid(1.0, 1.0, 1.0 / 128);
  const auto cal = build_calibration(chord, g);
  CHECK(bulk_error([&](const Vec2& q) { return chord.inside(q, 0.0); }, cal, chord, 0.0) == 0.0);

  // Flat interface shifted by d inside the linear band of theta.
  const double d = 4.0 * g.h;
  const double shifted = bulk_error([&](const Vec2& q) { return q.x > 0.5 + d; }, cal, chord, 0.0);
  CHECK(shifted == doctest::Approx(d * d / (2.0 * cal.ell) * 1.0).epsilon(1e-12));

  // Empty A against the half-disk: polar quadrature of |theta| over the disk.
  const auto disk = build_reference(FlowKind::shrinking_half_disk, disk_params());
  const Grid gd = build_grid(1.0, 0.5, 1.0 / 256);
  const auto dc = build_calibration(disk, gd);
  const double R = disk.radius(0.0), ell = dc.ell;
  auto sat = [](double z) {
    if (z <= 0.5) return z;
    if (z >= 1.5) return 1.0;
    return 0.5 + (z - 0.5) - 0.5 * (z - 0.5) * (z - 0.5);
  };
  const double oracle_value = pi * oracle::integrate([&](double r) { return sat((R - r) / ell) * r; }, 0.0, R, 1e-12);
  const double empty = bulk_error([](const Vec2&) { return false; }, dc, disk, 0.0);
  CHECK(empty == doctest::Approx(oracle_value).epsilon(5e-3));
}

TEST_CASE("phase swap leaves both error functionals invariant") {
  const EnergyModel model(pi / 2);
  const auto flow = build_reference(FlowKind::shrinking_half_disk, disk_params());
  FlowParams sp = disk_params();
  sp.swap_phases = true;
  const auto swapped = build_reference(FlowKind::shrinking_half_disk, sp);
  const Grid g = build_grid(1.0, 0.5, 1.0 / 128);
  const auto cal = build_calibration(flow, g);
  const auto cal_s = build_calibration(swapped, g);

  // A slightly off-centre disk as the competitor.
  PhaseField u = well_prepared(g, 0.02, [](const Vec2& q) { return 0.28 - norm(q - Vec2{0.52, 0.0}); });
  PhaseField v = u;
  for (auto& x : v.u) x = -x;
  const double e1 = relative_entropy_sharp(extract_interface(g, u), cal, model);
  const double e2 = relative_entropy_sharp(extract_interface(g, v), cal_s, model);
  CHECK(e1 > 1e-6);
  CHECK(e2 == doctest::Approx(e1).epsilon(1e-12));
  const double b1 = bulk_error(u, cal, flow), b2 = bulk_error(v, cal_s, swapped);
  CHECK(b1 > 1e-6);
  CHECK(b2 == b1);
}

TEST_CASE("Gronwall check") {
  std::vector<StabilitySample> zero;
  for (int k = 0; k <= 10; ++k) zero.push_back({0.1 * k, 0.0, 0.0});
  for (double C : {0.0, 1.0, 50.0}) CHECK(gronwall_check(zero, C).ok());
  CHECK(gronwall_check(zero, 0.0).smallest_constant == 0.0);
  CHECK(gronwall_check(zero, 0.0).uniqueness_ok);

  std::vector<StabilitySample> growth;
  for (int k = 0; k <= 100; ++k) {
    const double t = 0.01 * k;
    growth.push_back({t, 1e-3 * std::exp(2.0 * t), 0.0});
  }
  const auto rep = gronwall_check(growth, 2.0);
  CHECK(rep.smallest_constant == doctest::Approx(2.0).epsilon(0.05));
  CHECK(rep.rel_entropy_ok);
  CHECK_FALSE(gronwall_check(growth, 1.5).rel_entropy_ok);
  CHECK(rep.rhs_rel_entropy.size() == growth.size());

  std::vector<StabilitySample> bad{{0.0, 0.0, 0.0}, {0.2, 0.0, 0.0}, {0.1, 0.0, 0.0}};
  CHECK_THROWS_AS(gronwall_check(bad, 1.0), ConfigError);
}

TEST_CASE("stationary chord: errors stay at the initial quadrature noise") {
  const double eps = 0.05, h = eps / 4;
  const Grid g = build_grid(1.0, 1.0, h);
  FlowParams p;
  p.horizon = 0.01;
  const auto flow = build_reference(FlowKind::stationary_chord, p);
  const auto cal = build_calibration(flow, g);
  const EnergyModel model(pi / 2);
  SolverConfig cfg;
  cfg.scheme = Scheme::discrete_gradient;
  cfg.tau = eps * eps / 4;
  cfg.t_end = p.horizon;
  const auto traj = run(g, well_prepared(g, eps, [](const Vec2& q) { return q.x - 0.5; }), cfg, Walls::neumann());
  const double floor_e = model.c0() * 1.0 * h * h, floor_b = 1.0 * h * h / (2.0 * cal.ell);
  double e0 = -1, b0 = -1;
  for (const auto& s : traj.snapshots) {
    const double e = relative_entropy_sharp(extract_interface(g, s), cal, model);
    const double b = bulk_error(s, cal, flow);
    if (e0 < 0) {
      e0 = std::max(e, floor_e);
      b0 = std::max(b, floor_b);
    }
    CHECK(e <= 3.0 * e0);
    CHECK(b <= 3.0 * b0);
  }
}
