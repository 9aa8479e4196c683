#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "oracles.hpp"
#include "pfc/harness.hpp"

using namespace pfc;
namespace fs = std::filesystem;

namespace {

constexpr double pi = std::numbers::pi;

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pfc_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string first_data_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') return line;
  return {};
}

const char* kChord = R"(
[domain]
lx = 1
ly = 1
h = eps/4
[model]
eps = 0.05
[solver]
tau = eps^2/4
t_end = 10 * 0.05^2/4
snapshots = 5
[initial]
geometry = chord
)";

const char* kDisk = R"(
[domain]
lx = 1
ly = 0.5
[model]
eps = 0.04
[solver]
t_end = 0.0032
snapshots = 8
[initial]
geometry = half_disk
r0 = 0.3
)";

}  // namespace

TEST_CASE("expressions follow the usual precedence") {
  CHECK(evaluate("1 + 2 * 3") == 7.0);
  CHECK(evaluate("(1 + 2) * 3") == 9.0);
  CHECK(evaluate("2^3^2") == 512.0);
  CHECK(evaluate("-2^2") == -4.0);
  CHECK(evaluate("2 * -3") == -6.0);
  CHECK(evaluate("8 / 4 / 2") == 1.0);
  CHECK(evaluate("1e-3 * 2") == doctest::Approx(2e-3));
  CHECK(evaluate("pi") == pi);
  CHECK(evaluate("cos(pi/3)") == doctest::Approx(0.5));
  CHECK(evaluate("hypot(3, 4) + max(1, 2) - min(1, 2)") == 6.0);
  CHECK(evaluate("atan2(1, 1)") == doctest::Approx(pi / 4));
  CHECK(evaluate("eps^2/4", {{"eps", 0.02}}) == doctest::Approx(1e-4));

  const Expression phi("0.3 - hypot(x - 0.5, y)", {"x", "y"});
  CHECK(phi({0.5, 0.0}) == doctest::Approx(0.3));
  CHECK(phi({0.5, 0.3}) == doctest::Approx(0.0));
  CHECK_THROWS_AS(phi({0.5}), ConfigError);

  CHECK_THROWS_AS(evaluate("1 +"), ConfigError);
  CHECK_THROWS_AS(evaluate("(1"), ConfigError);
  CHECK_THROWS_AS(evaluate("1 2"), ConfigError);
  CHECK_THROWS_AS(evaluate("foo(1)"), ConfigError);
  CHECK_THROWS_AS(evaluate("x + 1"), ConfigError);
  CHECK_THROWS_AS(evaluate("min(1)"), ConfigError);
}

TEST_CASE("config parsing and defaults") {
  const auto c = parse_config(R"(
; comment line
[domain]
lx = 1
ly = 0.5
h = eps/8
[walls]
bottom = contact
alpha = pi/3
left = contact
left_alpha = 2*pi/3
[model]
eps = 0.04, 0.02, min(0.01, 1)
[solver]
scheme = convex_splitting
tau = eps^2/8
t_end = 0.01
snapshots = 10
[initial]
geometry = expression
expression = 0.25 - hypot(x - 0.5, y)
bump_amplitude = 2
bump_center = 0.5, 0.25
[reference]
flow = none
[output]
dir = somewhere
)");
  REQUIRE(c.eps.size() == 3);
  CHECK(c.eps[2] == 0.01);
  CHECK(c.h_for(0.04) == doctest::Approx(0.005));
  CHECK(c.tau_for(0.02) == doctest::Approx(0.00005));
  CHECK(c.scheme == Scheme::convex_splitting);
  CHECK(c.snapshots == 10);
  CHECK(c.geometry == Geometry::expression);
  CHECK_FALSE(c.reference.has_value());
  REQUIRE(c.bump_center.has_value());
  CHECK(c.bump_center->y == 0.25);
  CHECK(c.output_dir == "somewhere");
  const Walls w = c.build_walls();
  CHECK(w[Wall::bottom].contact);
  CHECK(w[Wall::bottom].energy.alpha() == doctest::Approx(pi / 3));
  CHECK(w[Wall::left].energy.alpha() == doctest::Approx(2 * pi / 3));
  CHECK_FALSE(w[Wall::top].contact);

  const auto d = parse_config(kDisk);
  CHECK(d.h_for(0.04) == doctest::Approx(0.01));
  CHECK(d.tau_for(0.04) == doctest::Approx(0.0004));
  CHECK(d.scheme == Scheme::discrete_gradient);
  CHECK(d.reference == FlowKind::shrinking_half_disk);
  CHECK_FALSE(d.build_walls()[Wall::bottom].contact);
}

TEST_CASE("malformed configs are rejected with a reason") {
  auto rejects = [](const std::string& text, const std::string& needle) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos, e.what());
      return;
    }
    FAIL("accepted: " << text);
  };
  const std::string base = "[model]\neps = 0.05\n[solver]\nt_end = 0.01\n";
  rejects(base + "[domain]\nbogus = 1\n", "unknown key");
  rejects(base + "[nonsense]\na = 1\n", "unknown section");
  rejects("[solver]\nt_end = 0.01\n", "model.eps");
  rejects(base + "[domain]\nh = 0.02\n", "eps >= 4h");
  rejects(base + "[domain]\nh = 0.3\n", "eps >= 4h");
  rejects(base + "[domain]\nh = eps/4 +\n", "expression");
  rejects("[model]\neps = 0.05\n", "t_end");
  rejects(base + "[solver]\n", "duplicate");
  rejects(base + "[initial]\ngeometry = blob\n", "geometry");
  rejects(base + "[initial]\ngeometry = expression\n", "initial.expression");
  rejects(base + "[initial]\ngeometry = expression\nexpression = 0.2 - z\n", "identifier");
  rejects(base + "[walls]\nbottom = sticky\n", "walls.bottom");
  // Translator contact walls must match the strip.
  rejects("[model]\neps = 0.01\n[solver]\nt_end = 0.1\n[initial]\ngeometry = translator\nalpha = pi/3\n"
          "[walls]\nleft = contact\nright = neumann\nalpha = pi/3\n",
          "walls.right");
  rejects("[model]\neps = 0.02\n[solver]\nt_end = 0.02\n[initial]\ngeometry = half_disk\n"
          "[walls]\nbottom = contact\nalpha = pi/3\n",
          "walls.bottom");
  // Too close to extinction for the half-disk.
  rejects("[domain]\nly = 0.5\n[model]\neps = 0.02\n[solver]\nt_end = 0.045\n", "extinction");
}

TEST_CASE("the test-field catalogue is tangential with exact gradients") {
  const double lx = 1.0, ly = 0.5;
  const auto cat = tangential_catalogue(lx, ly);
  REQUIRE(cat.size() == 6);
  const Grid g = build_grid(lx, ly, 1.0 / 32);
  for (const auto& b : cat) {
    double maxval = 0.0;
    for (const auto& f : boundary_faces(g)) CHECK(std::abs(dot(b.value(f.midpoint), inward_normal(f.wall))) < 1e-15);
    for (const Vec2 p : {Vec2{0.3, 0.2}, Vec2{0.71, 0.05}, Vec2{0.5, 0.4}, Vec2{0.9, 0.33}}) {
      const double d = 1e-5;
      auto fd = [&](Vec2 e) { return (b.value(p + e * d) - b.value(p - e * d)) / (2 * d); };
      const Vec2 gx = fd({1, 0}), gy = fd({0, 1});
      const Mat2 m = b.gradient(p);
      CHECK(m.xx == doctest::Approx(gx.x).epsilon(1e-8));
      CHECK(m.xy == doctest::Approx(gy.x).epsilon(1e-8));
      CHECK(m.yx == doctest::Approx(gx.y).epsilon(1e-8));
      CHECK(m.yy == doctest::Approx(gy.y).epsilon(1e-8));
      maxval = std::max(maxval, norm(b.value(p)));
    }
    CHECK(maxval > 0.0);
  }
}

TEST_CASE("initial data: reference profile, bump and seeded noise") {
  auto c = parse_config(kDisk);
  const Grid g = build_grid(1.0, 0.5, 0.01);
  const PhaseField plain = initial_state(c, g, 0.04, 0);
  const double area0 = extract_interface(g, plain).area;
  CHECK(area0 == doctest::Approx(0.5 * pi * 0.09).epsilon(0.02));

  c.bump_amplitude = 2.0;
  const PhaseField bumped = initial_state(c, g, 0.04, 0);
  const double grown = extract_interface(g, bumped).area - area0;
  // 2h normal displacement on a Gaussian of width 0.05 adds about 2h * sqrt(pi) * 0.05.
  CHECK(grown == doctest::Approx(2 * 0.01 * std::sqrt(pi) * 0.05).epsilon(0.15));

  c.bump_amplitude = 0.0;
  c.noise = 0.1;
  const PhaseField a = initial_state(c, g, 0.04, 7), b = initial_state(c, g, 0.04, 7), d = initial_state(c, g, 0.04, 8);
  CHECK(a.u == b.u);
  CHECK(a.u != d.u);
  for (double u : a.u) CHECK(std::abs(u) <= 1.0);
}

TEST_CASE("chord run writes the four tables with headers") {
  const auto c = parse_config(kChord);
  const RunResult r = simulate(c, c.eps.front());
  CHECK(r.trajectory.ledger.size() == 11);
  CHECK(r.report.size() == 6);
  const fs::path dir = scratch_dir("chord");
  write_run_outputs(r, dir);
  CHECK(first_data_line(dir / "energy.csv") == "step,t,energy,bulk,boundary,dissipation,max_abs_u");
  CHECK(first_data_line(dir / "interface.csv") == "t,chain,vertex_index,x,y,nu_x,nu_y,V");
  CHECK(first_data_line(dir / "stability.csv") == "t,rel_entropy,bulk_error,gronwall_rhs_relEn,gronwall_rhs_bulk");
  CHECK(first_data_line(dir / "defects.csv") ==
        "t,phase_energy,equipartition,boundary_defect,tilt,rel_entropy_phasefield");
  CHECK(slurp(dir / "energy.csv").rfind("# schema_version=1\n", 0) == 0);
  CHECK(slurp(dir / "geometry.json").find("\"schema_version\": 1") != std::string::npos);

  const CsvTable e = read_csv(dir / "energy.csv");
  REQUIRE(e.rows.size() == 11);
  CHECK(e.rows.back()[e.column("energy")] == r.trajectory.ledger.back().energy);

  // The stationary chord stays put: errors at the quadrature floor.
  CHECK(r.summary.energy_monotone);
  CHECK(r.summary.holder_ok);
  CHECK(r.summary.radius_or_speed_error < 0.1 * r.h);
  CHECK(r.summary.contact_angle_error < 1e-6);
  // Midpoint quadrature of the cubic fields along the chord is O(h^2).
  CHECK(r.summary.motion_law_residual < r.h * r.h);
  CHECK(r.summary.ledger_closure < 1e-10);
  REQUIRE(r.gronwall.has_value());
  CHECK(r.gronwall->ok());

  write_report(dir);
  CHECK(slurp(dir / "summary.json").find("\"ledger_closure\"") != std::string::npos);
  CHECK_THROWS_AS(write_report(scratch_dir("empty")), ConfigError);
}

TEST_CASE("half-disk run records the radius series and is deterministic") {
  const auto c = parse_config(kDisk);
  const RunResult r = simulate(c, 0.04);
  const fs::path a = scratch_dir("disk_a"), b = scratch_dir("disk_b");
  write_run_outputs(r, a);
  write_run_outputs(simulate(c, 0.04), b);
  for (const char* f : {"energy.csv", "interface.csv", "stability.csv", "defects.csv", "geometry.json"})
    CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);

  const std::string g = slurp(a / "geometry.json");
  CHECK(g.find("\"measured_radius\"") != std::string::npos);
  REQUIRE(r.report.size() == 9);
  for (std::size_t k = 0; k < r.report.size(); ++k) {
    const double R = std::sqrt(0.09 - 2 * r.report.t[k]);
    CHECK(r.report.measured_radius[k] == doctest::Approx(R).epsilon(0.01));
  }
  CHECK(std::isnan(r.report.measured_speed[0]));
  CHECK(r.report.contact_angles[0].size() == 2);
  CHECK(r.summary.radius_or_speed_error < 0.02);
}

TEST_CASE("sweeps: ordering, single rows and convergence orders") {
  auto c = parse_config(kChord);
  c.eps = {0.05};
  const SweepResult one = sweep(c, 1);
  CHECK(one.rows.size() == 1);
  CHECK(one.orders.empty());
  CHECK_FALSE(one.partial);
  const fs::path dir = scratch_dir("sweep");
  write_sweep(one, dir);
  const CsvTable t = read_csv(dir / "sweep.csv");
  CHECK(t.header.size() == 2 + 2 * sweep_columns().size());
  CHECK(t.rows.size() == 1);
  CHECK(std::isnan(t.rows[0][t.column("order_energy_gap")]));
  CHECK(slurp(dir / "sweep.csv").find("# partial=false") != std::string::npos);

  c.eps = {0.05, 0.05};
  CHECK_THROWS_AS(sweep(c, 1), ConfigError);

  c.eps = {0.05, 0.025};
  const SweepResult two = sweep(c, 2);
  CHECK(two.failures.empty());
  REQUIRE(two.rows.size() == 2);
  REQUIRE(two.orders.size() == 1);
  CHECK(two.rows[0].eps == 0.05);
  CHECK(two.rows[1].h == 0.00625);
  const std::size_t gap = 2;  // energy_gap column
  CHECK(two.orders[0][gap] == doctest::Approx(std::log2(two.rows[0].energy_gap / two.rows[1].energy_gap)));
}

TEST_CASE("envelope command algebra") {
  std::vector<double> s;
  for (int k = 0; k <= 400; ++k) s.push_back(-1.0 + k / 200.0);
  auto table = [&](auto f) {
    std::vector<double> v;
    for (double x : s) v.push_back(f(x));
    return v;
  };

  const auto standard = table([](double x) { return std::cos(pi / 3) * oracle::psi(x); });
  const EnvelopeResult r = envelope(s, standard);
  for (std::size_t k = 0; k < s.size(); ++k) CHECK(r.sigma_hat[k] == doctest::Approx(standard[k]).epsilon(1e-12));
  REQUIRE(r.young_angle.has_value());
  CHECK(std::abs(*r.young_angle - pi / 3) < 1e-6);

  // Constant table: the envelope is recomputed by brute force in the psi metric.
  const auto three = table([](double) { return 3.0; });
  const EnvelopeResult c3 = envelope(s, three);
  std::vector<double> y;
  for (double x : s) y.push_back(oracle::psi(x));
  const auto brute = lipschitz_envelope_bruteforce(y, three);
  for (std::size_t k = 0; k < s.size(); ++k) CHECK(c3.sigma_hat[k] == doctest::Approx(brute[k]).epsilon(1e-12));
  CHECK(c3.jump == doctest::Approx(0.0));

  const auto two_psi = table([](double x) { return 2.0 * oracle::psi(x); });
  const EnvelopeResult np = envelope(s, two_psi);
  for (std::size_t k = 0; k < s.size(); ++k) CHECK(np.sigma_hat[k] == doctest::Approx(oracle::psi(s[k])).epsilon(1e-9));
  CHECK(np.jump == doctest::Approx(4.0 / 3.0));
  CHECK_FALSE(np.young_angle.has_value());

  CHECK_THROWS_AS(envelope({-1.0, 0.5, 0.2, 1.0}, {0, 1, 1, 2}), ConfigError);
  CHECK_THROWS_AS(envelope({-1.0, 0.5}, {0, 1}), ConfigError);

  const fs::path dir = scratch_dir("envelope");
  write_atomic(dir / "sigma.csv", "s,sigma\n-1,0\n0,0.3\n1,0.6\n");
  const EnvelopeResult f = envelope_from_csv(dir / "sigma.csv");
  CHECK(f.sigma_hat.size() == 3);
  write_envelope(f, dir);
  CHECK(slurp(dir / "envelope.json").find("\"young_angle_rad\"") != std::string::npos);
  CHECK(first_data_line(dir / "sigma_hat.csv") == "s,sigma_hat");
}

TEST_CASE("verify-calibration through the config") {
  auto c = parse_config(R"(
[model]
eps = 0.01
[solver]
t_end = 0.2
[initial]
geometry = translator
alpha = pi/3
[reference]
verify_h = 1/128
)");
  const CalibrationRun ok = verify_calibration(c);
  CHECK(ok.report.pass());
  c.corrupt_length = 1.05;
  const CalibrationRun bad = verify_calibration(c);
  REQUIRE(bad.report.failed().size() == 1);
  CHECK(bad.report.failed()[0] == "xi_length");

  const fs::path dir = scratch_dir("calib");
  write_calibration_report(bad, dir);
  const std::string j = slurp(dir / "calibration.json");
  CHECK(j.find("\"worst_ratio\"") != std::string::npos);
  CHECK(j.find("\"pass\": false") != std::string::npos);

  c.reference.reset();
  CHECK_THROWS_AS(verify_calibration(c), ConfigError);
}

TEST_CASE("atomic writes leave no temporary behind") {
  const fs::path dir = scratch_dir("atomic");
  write_atomic(dir / "a.txt", "one");
  write_atomic(dir / "a.txt", "two");
  CHECK(slurp(dir / "a.txt") == "two");
  CHECK_FALSE(fs::exists(dir / "a.txt.tmp"));
}
