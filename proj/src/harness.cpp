#include "pfc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "pfc/diagnostics.hpp"

namespace pfc {

namespace {

using json = nlohmann::ordered_json;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kPi = std::numbers::pi;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Splits at commas outside parentheses.
std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s[k] == '(') ++depth;
    else if (s[k] == ')') --depth;
    else if (s[k] == ',' && depth == 0) {
      out.push_back(trim(s.substr(start, k - start)));
      start = k + 1;
    }
  }
  out.push_back(trim(s.substr(start)));
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json num_array(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header) {
    out_ << "# schema_version=" << kSchemaVersion << '\n';
    for (std::size_t k = 0; k < header.size(); ++k) out_ << (k ? "," : "") << header[k];
    out_ << '\n';
  }
  void comment(const std::string& text) { out_ << "# " << text << '\n'; }
  template <typename... T>
  void row(const T&... values) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(values), first = false), ...);
    out_ << '\n';
  }
  void row(const std::vector<double>& values) {
    for (std::size_t k = 0; k < values.size(); ++k) out_ << (k ? "," : "") << fmt(values[k]);
    out_ << '\n';
  }
  std::string str() const { return out_.str(); }

 private:
  static std::string cell(double v) { return fmt(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  std::ostringstream out_;
};

double smoothed_bump(const Vec2& p, const Vec2& c, double w) {
  const Vec2 d = p - c;
  return std::exp(-dot(d, d) / (w * w));
}

// Least-squares slope of y against t.
double fit_slope(const std::vector<double>& t, const std::vector<double>& y) {
  const std::size_t n = t.size();
  if (n < 2) return kNaN;
  double mt = 0, my = 0;
  for (std::size_t k = 0; k < n; ++k) {
    mt += t[k];
    my += y[k];
  }
  mt /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < n; ++k) {
    sxy += (t[k] - mt) * (y[k] - my);
    sxx += (t[k] - mt) * (t[k] - mt);
  }
  return sxy / sxx;
}

double nan_max(double a, double b) {
  if (std::isnan(a)) return b;
  if (std::isnan(b)) return a;
  return std::max(a, b);
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

std::string_view geometry_name(Geometry g) {
  switch (g) {
    case Geometry::chord: return "chord";
    case Geometry::half_disk: return "half_disk";
    case Geometry::translator: return "translator";
    case Geometry::expression: return "expression";
  }
  return "?";
}

Geometry parse_geometry(std::string_view name) {
  for (Geometry g : {Geometry::chord, Geometry::half_disk, Geometry::translator, Geometry::expression})
    if (name == geometry_name(g)) return g;
  throw ConfigError("unknown geometry '" + std::string(name) + "'");
}

double ExperimentConfig::h_for(double e) const {
  return evaluate(h, {{"eps", e}, {"lx", lx}, {"ly", ly}});
}

double ExperimentConfig::tau_for(double e) const {
  return evaluate(tau, {{"eps", e}, {"h", h_for(e)}});
}

FlowParams ExperimentConfig::flow_params(double e) const {
  FlowParams p;
  p.lx = lx;
  p.ly = ly;
  p.horizon = t_end;
  p.eps = e;
  p.r0 = r0;
  p.alpha = contact_angle;
  p.width = width;
  p.center_x = center_x;
  p.y0 = y0;
  p.swap_phases = swap_phases;
  return p;
}

namespace {

std::optional<FlowKind> geometry_flow(Geometry g) {
  switch (g) {
    case Geometry::chord: return FlowKind::stationary_chord;
    case Geometry::half_disk: return FlowKind::shrinking_half_disk;
    case Geometry::translator: return FlowKind::strip_translator;
    case Geometry::expression: return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace

std::optional<ReferenceFlow> ExperimentConfig::reference_flow(double e) const {
  if (!reference) return std::nullopt;
  return build_reference(*reference, flow_params(e));
}

Walls ExperimentConfig::build_walls() const {
  if (walls_given) {
    Walls w;
    for (Wall wall : kAllWalls) {
      const int k = static_cast<int>(wall);
      if (contact[k]) w.set({wall, true, BoundaryEnergy(alpha[k])});
    }
    return w;
  }
  if (reference) return build_reference(*reference, flow_params(0.0)).walls();
  return Walls::neumann();
}

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"domain", {"lx", "ly", "h"}},
      {"walls", {"left", "right", "bottom", "top", "alpha", "left_alpha", "right_alpha", "bottom_alpha", "top_alpha"}},
      {"model", {"eps"}},
      {"solver", {"scheme", "tau", "t_end", "snapshots", "stabilization"}},
      {"initial",
       {"geometry", "r0", "alpha", "width", "center_x", "y0", "swap_phases", "expression", "bump_amplitude",
        "bump_width", "bump_center", "noise"}},
      {"reference", {"flow", "verify_h", "corrupt_length"}},
      {"output", {"dir"}},
  };
  return keys;
}

// Same wall condition in the sense that matters to the solver: Neumann and
// contact at pi/2 coincide.
bool same_wall(const WallSpec& a, const WallSpec& b) {
  const bool na = !a.contact || a.energy.is_neumann(), nb = !b.contact || b.energy.is_neumann();
  if (na || nb) return na && nb;
  return std::abs(a.energy.alpha() - b.energy.alpha()) <= 1e-12;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
  }

  for (const auto& [section, body] : tree) {
    const auto it = known_keys().find(section);
    if (it == known_keys().end()) {
      if (body.empty()) throw ConfigError("config: key '" + section + "' outside a section");
      throw ConfigError("config: unknown section [" + section + "]");
    }
    for (const auto& [key, value] : body)
      if (!it->second.count(key)) throw ConfigError("config: unknown key '" + section + "." + key + "'");
  }

  auto get = [&](const std::string& path) -> std::optional<std::string> {
    if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(path, '.'))) return trim(*v);
    return std::nullopt;
  };
  auto number = [&](const std::string& path, double& out) {
    if (auto v = get(path)) {
      try {
        out = evaluate(*v);
      } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
      }
    }
  };

  ExperimentConfig c;
  number("domain.lx", c.lx);
  number("domain.ly", c.ly);
  if (auto v = get("domain.h")) c.h = *v;

  if (auto v = get("model.eps")) {
    for (const auto& item : split_list(*v)) {
      try {
        c.eps.push_back(evaluate(item));
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("model.eps: ") + e.what());
      }
    }
  }

  if (auto v = get("solver.scheme")) {
    try {
      c.scheme = parse_scheme(*v);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("solver.scheme: ") + e.what());
    }
  }
  if (auto v = get("solver.tau")) c.tau = *v;
  number("solver.t_end", c.t_end);
  double snaps = c.snapshots;
  number("solver.snapshots", snaps);
  if (snaps != std::floor(snaps)) throw ConfigError("solver.snapshots must be an integer");
  c.snapshots = static_cast<int>(snaps);
  number("solver.stabilization", c.stabilization);

  if (auto v = get("initial.geometry")) c.geometry = parse_geometry(*v);
  number("initial.r0", c.r0);
  number("initial.alpha", c.contact_angle);
  number("initial.width", c.width);
  number("initial.center_x", c.center_x);
  number("initial.y0", c.y0);
  if (auto v = get("initial.swap_phases")) c.swap_phases = parse_bool("initial.swap_phases", *v);
  if (auto v = get("initial.expression")) c.expression = *v;
  number("initial.bump_amplitude", c.bump_amplitude);
  number("initial.bump_width", c.bump_width);
  if (auto v = get("initial.bump_center")) {
    const auto parts = split_list(*v);
    if (parts.size() != 2) throw ConfigError("initial.bump_center: expected 'x, y'");
    c.bump_center = Vec2{evaluate(parts[0]), evaluate(parts[1])};
  }
  number("initial.noise", c.noise);

  c.reference = geometry_flow(c.geometry);
  if (auto v = get("reference.flow")) {
    if (*v == "none") c.reference.reset();
    else if (*v != "auto") c.reference = parse_flow(*v);
  }
  if (auto v = get("reference.verify_h")) c.verify_h = *v;
  number("reference.corrupt_length", c.corrupt_length);

  if (tree.get_child_optional("walls")) {
    c.walls_given = true;
    double common = kPi / 2.0;
    number("walls.alpha", common);
    for (Wall w : kAllWalls) {
      const std::string name(wall_name(w));
      const int k = static_cast<int>(w);
      c.alpha[k] = common;
      number("walls." + name + "_alpha", c.alpha[k]);
      const std::string kind = get("walls." + name).value_or("neumann");
      if (kind == "contact") c.contact[k] = true;
      else if (kind != "neumann") throw ConfigError("walls." + name + ": expected 'neumann' or 'contact'");
    }
  }

  if (auto v = get("output.dir")) c.output_dir = *v;
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return parse_config(s.str());
}

void validate(const ExperimentConfig& c) {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(what) + " must be positive");
  };
  positive(c.lx, "domain.lx");
  positive(c.ly, "domain.ly");
  positive(c.t_end, "solver.t_end");
  positive(c.stabilization, "solver.stabilization");
  if (c.snapshots < 2) throw ConfigError("solver.snapshots must be at least 2");
  if (c.eps.empty()) throw ConfigError("model.eps is required");
  if (!(c.bump_amplitude >= 0.0)) throw ConfigError("initial.bump_amplitude must be non-negative");
  positive(c.bump_width, "initial.bump_width");
  if (!(c.noise >= 0.0 && c.noise <= 1.0)) throw ConfigError("initial.noise must lie in [0, 1]");
  if (c.corrupt_length != 0.0 && !(c.corrupt_length > 1.0))
    throw ConfigError("reference.corrupt_length must exceed 1");
  if (c.geometry == Geometry::expression) {
    if (c.expression.empty()) throw ConfigError("initial.expression is required for geometry = expression");
    Expression(c.expression, {"x", "y"});
    if (c.bump_amplitude > 0.0 && !c.bump_center)
      throw ConfigError("initial.bump_center is required to perturb an expression geometry");
  }
  if (c.walls_given)
    for (Wall w : kAllWalls) {
      const int k = static_cast<int>(w);
      if (c.contact[k] && !(c.alpha[k] > 0.0 && c.alpha[k] < kPi))
        throw ConfigError("walls." + std::string(wall_name(w)) + ": contact angle must lie in (0, pi)");
    }

  for (double e : c.eps) {
    positive(e, "model.eps");
    const double h = c.h_for(e);
    positive(h, "domain.h");
    if (e < 4.0 * h * (1.0 - 1e-12))
      throw ConfigError("eps = " + fmt(e) + " under-resolved: need eps >= 4h (h = " + fmt(h) + ")");
    build_grid(c.lx, c.ly, h);
    const double tau = c.tau_for(e);
    positive(tau, "solver.tau");
    if (tau > stability_cap(c.scheme, e))
      throw ConfigError("solver.tau = " + fmt(tau) + " exceeds the stability cap of " +
                        std::string(scheme_name(c.scheme)));
  }

  if (c.reference) {
    const ReferenceFlow flow = build_reference(*c.reference, c.flow_params(c.eps.back()));
    if (c.walls_given) {
      const Walls want = flow.walls(), have = c.build_walls();
      for (Wall w : kAllWalls)
        if (!same_wall(want[w], have[w])) {
          const WallSpec& s = want[w];
          const std::string need = s.contact && !s.energy.is_neumann()
                                       ? "contact with alpha = " + fmt(s.energy.alpha())
                                       : "neumann (or contact with alpha = pi/2)";
          throw ConfigError("walls." + std::string(wall_name(w)) + " must be " + need + " for the " +
                            std::string(flow_name(flow.kind())) + " flow");
        }
    }
  }
}

// ---------------------------------------------------------------------------
// Test fields

std::vector<VectorTestField> tangential_catalogue(double lx, double ly) {
  const double cx = 0.5 * lx, cy = 0.5 * ly;
  auto fx = [=](double x) { return x * (lx - x); };
  auto dfx = [=](double x) { return lx - 2.0 * x; };
  auto fy = [=](double y) { return y * (ly - y); };
  auto dfy = [=](double y) { return ly - 2.0 * y; };
  std::vector<VectorTestField> c;
  c.push_back({[=](const Vec2& p) { return Vec2{fx(p.x), 0.0}; },
               [=](const Vec2& p) { return Mat2{dfx(p.x), 0.0, 0.0, 0.0}; }});
  c.push_back({[=](const Vec2& p) { return Vec2{0.0, fy(p.y)}; },
               [=](const Vec2& p) { return Mat2{0.0, 0.0, 0.0, dfy(p.y)}; }});
  c.push_back({[=](const Vec2& p) { return Vec2{fx(p.x) * p.y, 0.0}; },
               [=](const Vec2& p) { return Mat2{dfx(p.x) * p.y, fx(p.x), 0.0, 0.0}; }});
  c.push_back({[=](const Vec2& p) { return Vec2{0.0, fy(p.y) * p.x}; },
               [=](const Vec2& p) { return Mat2{0.0, 0.0, fy(p.y), dfy(p.y) * p.x}; }});
  c.push_back({[=](const Vec2& p) { return Vec2{fx(p.x) * (p.x - cx), fy(p.y) * (p.y - cy)}; },
               [=](const Vec2& p) {
                 return Mat2{dfx(p.x) * (p.x - cx) + fx(p.x), 0.0, 0.0, dfy(p.y) * (p.y - cy) + fy(p.y)};
               }});
  c.push_back({[=](const Vec2& p) { return Vec2{fx(p.x) * p.y * p.y, fy(p.y) * p.x * p.x}; },
               [=](const Vec2& p) {
                 return Mat2{dfx(p.x) * p.y * p.y, 2.0 * fx(p.x) * p.y, 2.0 * fy(p.y) * p.x, dfy(p.y) * p.x * p.x};
               }});
  return c;
}

// ---------------------------------------------------------------------------
// Runs

void StabilityReport::check_invariants() const {
  for (std::size_t k = 1; k < t.size(); ++k)
    if (!(t[k] > t[k - 1])) throw RuntimeFailure("stability report: time stamps not increasing");
  auto finite = [&](const std::vector<double>& v, const char* what, bool optional) {
    if (v.size() != t.size()) throw RuntimeFailure(std::string("stability report: ") + what + " has wrong length");
    for (double x : v)
      if (std::isinf(x) || (!optional && std::isnan(x)))
        throw RuntimeFailure(std::string("stability report: non-finite ") + what);
  };
  finite(phase_energy, "phase_energy", false);
  finite(sharp_energy, "sharp_energy", false);
  finite(area, "area", false);
  finite(equipartition, "equipartition", false);
  finite(boundary_defect, "boundary_defect", false);
  finite(tilt, "tilt", false);
  finite(rel_entropy, "rel_entropy", true);
  finite(rel_entropy_phasefield, "rel_entropy_phasefield", true);
  finite(bulk_error, "bulk_error", true);
  finite(motion_law_residual, "motion_law_residual", true);
  finite(measured_radius, "measured_radius", true);
  finite(measured_speed, "measured_speed", true);
}

PhaseField initial_state(const ExperimentConfig& c, const Grid& grid, double eps, std::uint64_t seed) {
  std::function<double(const Vec2&)> dist;
  Vec2 bump_at{0.5 * c.lx, 0.5 * c.ly};
  if (c.geometry == Geometry::expression) {
    const Expression phi(c.expression, {"x", "y"});
    dist = [phi](const Vec2& p) { return phi({p.x, p.y}); };
  } else {
    const auto flow = std::make_shared<ReferenceFlow>(build_reference(*geometry_flow(c.geometry), c.flow_params(eps)));
    dist = [flow](const Vec2& p) { return flow->signed_distance(p, 0.0); };
    if (c.geometry == Geometry::half_disk) bump_at = {0.5 * c.lx, c.r0};
    if (c.geometry == Geometry::translator) bump_at = {c.center_x, flow->height(c.center_x, 0.0)};
  }
  if (c.bump_center) bump_at = *c.bump_center;
  if (c.bump_amplitude > 0.0) {
    const double amp = c.bump_amplitude * grid.h, w = c.bump_width;
    dist = [dist, amp, w, bump_at](const Vec2& p) { return dist(p) + amp * smoothed_bump(p, bump_at, w); };
  }
  PhaseField s = well_prepared(grid, eps, dist);
  if (c.noise > 0.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-c.noise, c.noise);
    for (double& u : s.u) u = std::clamp(u + d(rng), -1.0, 1.0);
  }
  return s;
}

RunResult simulate(const ExperimentConfig& config, double eps, const RunOptions& options) {
  validate(config);
  RunResult r;
  r.config = config;
  r.eps = eps;
  r.h = config.h_for(eps);
  r.tau = config.tau_for(eps);
  r.grid = build_grid(config.lx, config.ly, r.h);
  r.walls = config.build_walls();
  r.flow = config.reference_flow(eps);
  if (r.flow) r.fields = build_calibration(*r.flow, r.grid);

  SolverConfig sc;
  sc.scheme = config.scheme;
  sc.tau = r.tau;
  sc.t_end = config.t_end;
  sc.stabilization = config.stabilization;
  const long steps = std::lround(config.t_end / r.tau);
  if (steps < config.snapshots) throw ConfigError("solver.t_end holds fewer steps than snapshot intervals");
  sc.snapshot_stride = static_cast<int>(steps / config.snapshots);

  r.trajectory = run(r.grid, initial_state(config, r.grid, eps, options.seed), sc, r.walls);
  const auto& snaps = r.trajectory.snapshots;
  for (const auto& s : snaps) r.curves.push_back(extract_interface(r.grid, s));
  const std::size_t n = r.curves.size();

  // Velocity: centred in the interior, one-sided at the ends.
  const double max_shift = 0.1 * std::min(config.lx, config.ly);
  r.velocity.resize(n);
  for (std::size_t k = 0; k < n && n >= 2; ++k) {
    if (r.curves[k].empty()) continue;
    if (k > 0 && k + 1 < n && !r.curves[k - 1].empty() && !r.curves[k + 1].empty()) {
      r.velocity[k] = normal_velocity_centered(r.curves[k - 1], r.curves[k], r.curves[k + 1], max_shift);
    } else if (k + 1 < n && !r.curves[k + 1].empty()) {
      r.velocity[k] = normal_velocity(r.curves[k], r.curves[k + 1], r.curves[k + 1].t - r.curves[k].t, max_shift);
    } else if (k > 0 && !r.curves[k - 1].empty()) {
      r.velocity[k] = normal_velocity(r.curves[k], r.curves[k - 1], r.curves[k].t - r.curves[k - 1].t, max_shift);
      for (auto& v : r.velocity[k]) v.V = -v.V;
    }
  }

  const auto catalogue = tangential_catalogue(config.lx, config.ly);
  std::optional<EnergyModel> model;
  if (r.flow) model.emplace(r.flow->contact_angle());
  const bool disk = r.flow && r.flow->kind() == FlowKind::shrinking_half_disk;
  const bool translator = r.flow && r.flow->kind() == FlowKind::strip_translator;
  const double box = config.lx * config.ly;

  auto& rep = r.report;
  std::vector<std::vector<double>> defects_by_field(catalogue.size());
  std::vector<double> angle_errors;
  for (std::size_t k = 0; k < n; ++k) {
    const PhaseField& s = snaps[k];
    const InterfaceCurve& curve = r.curves[k];
    rep.t.push_back(s.t);
    rep.phase_energy.push_back(discrete_energy(r.grid, s, r.walls));
    rep.sharp_energy.push_back(sharp_energy(curve, r.walls));
    rep.area.push_back(curve.area);

    TestFieldPair pair = TestFieldPair::unit_weight([](const Vec2&) { return Vec2{0.0, 0.0}; });
    if (r.fields) {
      const auto xi = r.fields->xi;
      const double t = s.t;
      pair = TestFieldPair::unit_weight([xi, t](const Vec2& p) { return xi(p, t); });
      rep.rel_entropy.push_back(relative_entropy_sharp(curve, *r.fields, *model));
      rep.rel_entropy_phasefield.push_back(relative_entropy_primal(r.grid, s, r.walls, pair));
      rep.bulk_error.push_back(bulk_error(s, *r.fields, *r.flow));
    } else {
      rep.rel_entropy.push_back(kNaN);
      rep.rel_entropy_phasefield.push_back(kNaN);
      rep.bulk_error.push_back(kNaN);
    }
    const DefectReport d = defects(r.grid, s, r.walls, pair);
    rep.equipartition.push_back(d.equipartition);
    rep.boundary_defect.push_back(d.boundary);
    rep.tilt.push_back(d.tilt);

    double worst = kNaN;
    if (!r.velocity[k].empty()) {
      worst = 0.0;
      for (std::size_t f = 0; f < catalogue.size(); ++f) {
        const double m = std::abs(motion_law_defect(r.grid, curve, r.velocity[k], catalogue[f], r.walls));
        worst = std::max(worst, m);
        if (k > 0 && k + 1 < n) defects_by_field[f].push_back(m);
      }
    }
    rep.motion_law_residual.push_back(worst);

    std::vector<double> angles;
    double angle_error = kNaN;
    for (Wall w : kAllWalls) {
      const bool touches = std::any_of(curve.contacts.begin(), curve.contacts.end(),
                                       [w](const ContactPoint& c) { return c.wall == w; });
      if (!touches) continue;
      const WallSpec& ws = r.walls[w];
      const double want = !ws.contact ? kPi / 2.0 : (r.flow ? r.flow->contact_angle() : ws.energy.alpha());
      for (const auto& a : contact_angle(curve, w, eps)) {
        angles.push_back(a.angle);
        angle_error = nan_max(angle_error, std::abs(a.angle - want));
      }
    }
    rep.contact_angles.push_back(angles);
    angle_errors.push_back(angle_error);

    const double disk_area = config.swap_phases ? box - curve.area : curve.area;
    rep.measured_radius.push_back(disk ? std::sqrt(2.0 * disk_area / kPi) : kNaN);
  }
  // Translation speed from the area swept per unit width.
  const double sign = config.swap_phases ? 1.0 : -1.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!translator || n < 2) {
      rep.measured_speed.push_back(kNaN);
      continue;
    }
    const std::size_t a = k == 0 ? 0 : k - 1, b = k + 1 == n ? k : k + 1;
    rep.measured_speed.push_back(sign * (rep.area[b] - rep.area[a]) / (rep.t[b] - rep.t[a]) / config.lx);
  }
  rep.check_invariants();

  // Summary row.
  RunSummary& sum = r.summary;
  sum.eps = eps;
  sum.h = r.h;
  sum.tau = r.tau;
  const double t_from = 0.25 * config.t_end * (1.0 - 1e-12);
  std::vector<double> ct, ca;
  sum.contact_angle_error = kNaN;
  sum.radius_or_speed_error = kNaN;
  for (std::size_t k = 0; k < n; ++k) {
    sum.energy_gap = nan_max(sum.energy_gap,
                             std::abs(rep.phase_energy[k] - rep.sharp_energy[k]) / std::abs(rep.sharp_energy[k]));
    sum.equipartition = nan_max(sum.equipartition, rep.equipartition[k] / rep.phase_energy[k]);
    sum.boundary_defect = nan_max(sum.boundary_defect, std::abs(rep.boundary_defect[k]) / rep.phase_energy[k]);
    if (rep.t[k] < t_from) continue;
    sum.contact_angle_error = nan_max(sum.contact_angle_error, angle_errors[k]);
    if (disk) {
      const double R = r.flow->radius(rep.t[k]);
      const double m = rep.measured_radius[k];
      sum.radius_or_speed_error = nan_max(sum.radius_or_speed_error, std::abs(m * m - R * R) / (R * R));
    }
    ct.push_back(rep.t[k]);
    ca.push_back(rep.area[k]);
  }
  if (translator) {
    sum.speed = sign * fit_slope(ct, ca) / config.lx;
    sum.radius_or_speed_error = std::abs(sum.speed - r.flow->speed()) / std::abs(r.flow->speed());
  } else if (r.flow && r.flow->kind() == FlowKind::stationary_chord) {
    sum.radius_or_speed_error = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double t = rep.t[k];
      sum.radius_or_speed_error =
          std::max(sum.radius_or_speed_error,
                   max_distance_to(r.curves[k], [&](const Vec2& p) { return r.flow->distance(p, t); }));
    }
  }
  sum.motion_law_residual = kNaN;
  for (const auto& series : defects_by_field) {
    if (series.empty()) continue;
    double mean = 0.0;
    for (double x : series) mean += x;
    sum.motion_law_residual = nan_max(sum.motion_law_residual, mean / series.size());
  }
  sum.rel_entropy = kNaN;
  sum.bulk_error = kNaN;
  for (std::size_t k = 0; k < n; ++k) {
    sum.rel_entropy = nan_max(sum.rel_entropy, rep.rel_entropy[k]);
    sum.bulk_error = nan_max(sum.bulk_error, rep.bulk_error[k]);
  }

  if (n >= 2) {
    const DissipationReport dr =
        bv_dissipation_check(r.curves, r.walls, r.trajectory.ledger.front().energy, max_shift);
    sum.holder_worst = dr.holder_worst;
    sum.holder_ok = dr.holder_ok;
  }
  const auto& ledger = r.trajectory.ledger;
  double dissipated = 0.0;
  sum.energy_monotone = true;
  for (std::size_t k = 1; k < ledger.size(); ++k) {
    dissipated += ledger[k].dissipation;
    if (ledger[k].energy > ledger[k - 1].energy + 1e-8 * (1.0 + std::abs(ledger[k - 1].energy)))
      sum.energy_monotone = false;
  }
  sum.ledger_closure =
      std::abs(ledger.front().energy - ledger.back().energy - dissipated) / std::abs(ledger.front().energy);

  if (r.fields && options.gronwall) {
    const double length = r.curves.front().interior_length;
    r.noise_rel_entropy = kSurfaceTension * length * r.h * r.h;
    r.noise_bulk = length * r.h * r.h / (2.0 * r.fields->ell);
    std::vector<StabilitySample> series;
    for (std::size_t k = 0; k < n; ++k) series.push_back({rep.t[k], rep.rel_entropy[k], rep.bulk_error[k]});
    r.gronwall = gronwall_check(series, 10.0 * r.fields->C, std::max(r.noise_rel_entropy, r.noise_bulk));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Output

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeFailure("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out.flush()) throw RuntimeFailure("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

namespace {

json config_json(const ExperimentConfig& c, double eps, double h, double tau) {
  json j;
  j["geometry"] = geometry_name(c.geometry);
  j["reference"] = c.reference ? json(flow_name(*c.reference)) : json(nullptr);
  j["lx"] = c.lx;
  j["ly"] = c.ly;
  j["eps"] = eps;
  j["h"] = h;
  j["tau"] = tau;
  j["t_end"] = c.t_end;
  j["scheme"] = scheme_name(c.scheme);
  j["bump_amplitude"] = c.bump_amplitude;
  j["swap_phases"] = c.swap_phases;
  return j;
}

json summary_json(const RunSummary& s) {
  json j;
  j["eps"] = s.eps;
  j["h"] = s.h;
  j["tau"] = s.tau;
  j["contact_angle_error"] = num(s.contact_angle_error);
  j["radius_or_speed_error"] = num(s.radius_or_speed_error);
  j["energy_gap"] = num(s.energy_gap);
  j["motion_law_residual"] = num(s.motion_law_residual);
  j["equipartition"] = num(s.equipartition);
  j["boundary_defect"] = num(s.boundary_defect);
  j["rel_entropy"] = num(s.rel_entropy);
  j["bulk_error"] = num(s.bulk_error);
  j["measured_speed"] = num(s.speed);
  j["holder_worst"] = num(s.holder_worst);
  j["holder_ok"] = s.holder_ok;
  j["ledger_closure"] = num(s.ledger_closure);
  j["energy_monotone"] = s.energy_monotone;
  return j;
}

}  // namespace

void write_run_outputs(const RunResult& r, const std::filesystem::path& dir) {
  const auto& rep = r.report;

  CsvWriter energy({"step", "t", "energy", "bulk", "boundary", "dissipation", "max_abs_u"});
  for (const auto& row : r.trajectory.ledger)
    energy.row(row.step, row.t, row.energy, row.bulk, row.boundary, row.dissipation, row.max_abs_u);
  write_atomic(dir / "energy.csv", energy.str());

  CsvWriter iface({"t", "chain", "vertex_index", "x", "y", "nu_x", "nu_y", "V"});
  for (std::size_t k = 0; k < r.curves.size(); ++k) {
    const auto& curve = r.curves[k];
    std::size_t flat = 0;
    for (std::size_t c = 0; c < curve.chains.size(); ++c) {
      const auto& ch = curve.chains[c];
      for (std::size_t v = 0; v < ch.points.size(); ++v, ++flat) {
        const double V = r.velocity[k].empty() ? kNaN : r.velocity[k][flat].V;
        iface.row(curve.t, c, v, ch.points[v].x, ch.points[v].y, ch.normals[v].x, ch.normals[v].y, V);
      }
    }
  }
  write_atomic(dir / "interface.csv", iface.str());

  CsvWriter stab({"t", "rel_entropy", "bulk_error", "gronwall_rhs_relEn", "gronwall_rhs_bulk"});
  for (std::size_t k = 0; k < rep.size(); ++k)
    stab.row(rep.t[k], rep.rel_entropy[k], rep.bulk_error[k],
             r.gronwall ? r.gronwall->rhs_rel_entropy[k] : kNaN, r.gronwall ? r.gronwall->rhs_bulk[k] : kNaN);
  write_atomic(dir / "stability.csv", stab.str());

  CsvWriter def({"t", "phase_energy", "equipartition", "boundary_defect", "tilt", "rel_entropy_phasefield"});
  for (std::size_t k = 0; k < rep.size(); ++k)
    def.row(rep.t[k], rep.phase_energy[k], rep.equipartition[k], rep.boundary_defect[k], rep.tilt[k],
            rep.rel_entropy_phasefield[k]);
  write_atomic(dir / "defects.csv", def.str());

  json g;
  g["schema_version"] = kSchemaVersion;
  g["config"] = config_json(r.config, r.eps, r.h, r.tau);
  g["t"] = num_array(rep.t);
  g["phase_energy"] = num_array(rep.phase_energy);
  g["sharp_energy"] = num_array(rep.sharp_energy);
  g["area"] = num_array(rep.area);
  g["motion_law_residual"] = num_array(rep.motion_law_residual);
  json angles = json::array();
  for (const auto& a : rep.contact_angles) angles.push_back(num_array(a));
  g["contact_angles"] = angles;
  if (r.flow && r.flow->kind() == FlowKind::shrinking_half_disk) {
    g["measured_radius"] = num_array(rep.measured_radius);
    std::vector<double> exact;
    for (double t : rep.t) exact.push_back(r.flow->radius(t));
    g["reference_radius"] = num_array(exact);
  }
  if (r.flow && r.flow->kind() == FlowKind::strip_translator) {
    g["measured_speed"] = num_array(rep.measured_speed);
    g["reference_speed"] = r.flow->speed();
  }
  g["summary"] = summary_json(r.summary);
  if (r.gronwall) {
    json gr;
    gr["constant_used"] = r.gronwall->constant_used;
    gr["smallest_constant"] = num(r.gronwall->smallest_constant);
    gr["slack"] = r.gronwall->slack;
    gr["noise_rel_entropy"] = r.noise_rel_entropy;
    gr["noise_bulk"] = r.noise_bulk;
    gr["rel_entropy_ok"] = r.gronwall->rel_entropy_ok;
    gr["bulk_ok"] = r.gronwall->bulk_ok;
    gr["uniqueness_ok"] = r.gronwall->uniqueness_ok;
    gr["calibration_constant"] = r.fields->C;
    g["gronwall"] = gr;
  }
  write_atomic(dir / "geometry.json", g.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Sweeps

const std::vector<std::string>& sweep_columns() {
  static const std::vector<std::string> cols{"contact_angle_error", "radius_or_speed_error", "energy_gap",
                                             "motion_law_residual", "equipartition", "boundary_defect",
                                             "rel_entropy", "bulk_error"};
  return cols;
}

namespace {

std::vector<double> error_values(const RunSummary& s) {
  return {s.contact_angle_error, s.radius_or_speed_error, s.energy_gap, s.motion_law_residual,
          s.equipartition,       s.boundary_defect,       s.rel_entropy, s.bulk_error};
}

}  // namespace

SweepResult sweep(const ExperimentConfig& config, int threads, const RunOptions& options) {
  validate(config);
  for (std::size_t k = 1; k < config.eps.size(); ++k)
    if (!(config.eps[k] < config.eps[k - 1])) throw ConfigError("model.eps must be strictly decreasing for a sweep");

  const std::size_t m = config.eps.size();
  std::vector<std::optional<RunSummary>> rows(m);
  std::vector<std::string> errors(m);
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads > 0 ? threads : 1, m));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k = next++; k < m; k = next++) {
      try {
        rows[k] = simulate(config, config.eps[k], options).summary;
      } catch (const Error& e) {
        errors[k] = e.what();
      }
    }
  };
  std::vector<std::future<void>> jobs;
  for (std::size_t w = 1; w < workers; ++w) jobs.push_back(std::async(std::launch::async, work));
  work();
  for (auto& j : jobs) j.get();

  SweepResult out;
  for (std::size_t k = 0; k < m; ++k) {
    if (rows[k]) out.rows.push_back(*rows[k]);
    else {
      out.partial = true;
      out.failures.push_back("eps = " + fmt(config.eps[k]) + ": " + errors[k]);
    }
  }
  for (std::size_t k = 0; k + 1 < out.rows.size(); ++k) {
    const auto a = error_values(out.rows[k]), b = error_values(out.rows[k + 1]);
    const double de = std::log(out.rows[k].eps / out.rows[k + 1].eps);
    std::vector<double> o;
    for (std::size_t c = 0; c < a.size(); ++c)
      o.push_back(a[c] > 0 && b[c] > 0 ? std::log(a[c] / b[c]) / de : kNaN);
    out.orders.push_back(o);
  }
  return out;
}

void write_sweep(const SweepResult& r, const std::filesystem::path& dir) {
  std::vector<std::string> header{"eps", "h"};
  for (const auto& c : sweep_columns()) header.push_back(c);
  for (const auto& c : sweep_columns()) header.push_back("order_" + c);
  CsvWriter table(header);
  table.comment(std::string("partial=") + (r.partial ? "true" : "false"));
  for (const auto& f : r.failures) table.comment("failed " + f);
  for (std::size_t k = 0; k < r.rows.size(); ++k) {
    std::vector<double> row{r.rows[k].eps, r.rows[k].h};
    for (double v : error_values(r.rows[k])) row.push_back(v);
    for (std::size_t c = 0; c < sweep_columns().size(); ++c) row.push_back(k > 0 ? r.orders[k - 1][c] : kNaN);
    table.row(row);
  }
  write_atomic(dir / "sweep.csv", table.str());

  json j;
  j["schema_version"] = kSchemaVersion;
  j["partial"] = r.partial;
  j["failures"] = r.failures;
  json rows = json::array();
  for (const auto& s : r.rows) rows.push_back(summary_json(s));
  j["rows"] = rows;
  json orders = json::array();
  for (const auto& o : r.orders) {
    json row;
    for (std::size_t c = 0; c < o.size(); ++c) row[sweep_columns()[c]] = num(o[c]);
    orders.push_back(row);
  }
  j["orders"] = orders;
  write_atomic(dir / "sweep.json", j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Calibration

CalibrationRun verify_calibration(const ExperimentConfig& config) {
  if (!config.reference) throw ConfigError("verify-calibration needs a reference flow");
  FlowParams p = config.flow_params(0.0);
  ReferenceFlow flow = build_reference(*config.reference, p);
  const double h = evaluate(config.verify_h, {{"lx", config.lx}, {"ly", config.ly}});
  if (!(h > 0.0)) throw ConfigError("reference.verify_h must be positive");
  const Grid grid = build_grid(config.lx, config.ly, h);
  CalibrationFields fields = build_calibration(flow, grid);
  if (config.corrupt_length > 0.0) fields = corrupt_length(fields, flow, config.corrupt_length);
  CalibrationReport report = pfc::verify_calibration(fields, flow);
  return {std::move(flow), std::move(fields), std::move(report)};
}

void write_calibration_report(const CalibrationRun& run, const std::filesystem::path& dir) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["flow"] = flow_name(run.flow.kind());
  j["horizon"] = run.flow.horizon();
  j["grid"] = {{"nx", run.fields.grid.nx}, {"ny", run.fields.grid.ny}, {"h", run.fields.grid.h}};
  j["c"] = run.fields.c;
  j["C"] = run.fields.C;
  j["pass"] = run.report.pass();
  json conds = json::array();
  for (const auto& c : run.report.conditions)
    conds.push_back({{"name", c.name},
                     {"worst_ratio", num(c.worst_ratio)},
                     {"location", {c.location.x, c.location.y}},
                     {"time", c.time},
                     {"constant_used", c.constant_used},
                     {"pass", c.pass}});
  j["conditions"] = conds;
  write_atomic(dir / "calibration.json", j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Envelope

EnvelopeResult envelope(const std::vector<double>& s, const std::vector<double>& sigma) {
  if (s.size() != sigma.size() || s.size() < 2) throw ConfigError("envelope table needs at least two rows");
  for (std::size_t k = 1; k < s.size(); ++k)
    if (!(s[k] > s[k - 1])) throw ConfigError("envelope table: s must be strictly increasing");
  for (double v : sigma)
    if (!std::isfinite(v)) throw ConfigError("envelope table: non-finite sigma");
  if (std::abs(s.front() + 1.0) > 1e-12 || std::abs(s.back() - 1.0) > 1e-12)
    throw ConfigError("envelope table must span s = -1 to s = 1");

  // The envelope is taken in psi, the natural arclength of the profile.
  std::vector<double> y(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) y[k] = eval_psi(s[k]);
  EnvelopeResult r;
  r.s = s;
  r.sigma = sigma;
  r.sigma_hat = lipschitz_envelope(y, sigma);
  r.jump = r.sigma_hat.back() - r.sigma_hat.front();
  if (std::abs(r.jump) < r.c0 * (1.0 - 1e-12)) r.young_angle = young_angle(r.jump, r.c0);
  return r;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  CsvTable t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    const auto cells = split_list(s);
    if (t.header.empty()) {
      t.header = cells;
      continue;
    }
    if (cells.size() != t.header.size())
      throw ConfigError(path.filename().string() + ":" + std::to_string(lineno) + ": wrong number of columns");
    std::vector<double> row;
    for (const auto& c : cells) {
      if (c == "nan") {
        row.push_back(kNaN);
        continue;
      }
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (c.empty() || *end != '\0')
        throw ConfigError(path.filename().string() + ":" + std::to_string(lineno) + ": bad number '" + c + "'");
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw ConfigError("'" + path.string() + "' has no header row");
  return t;
}

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t k = 0; k < header.size(); ++k)
    if (header[k] == name) return k;
  throw ConfigError("missing column '" + std::string(name) + "'");
}

EnvelopeResult envelope_from_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  if (t.header.size() != 2) throw ConfigError("envelope table needs exactly two columns (s, sigma)");
  std::vector<double> s, sigma;
  for (const auto& row : t.rows) {
    s.push_back(row[0]);
    sigma.push_back(row[1]);
  }
  return envelope(s, sigma);
}

void write_envelope(const EnvelopeResult& r, const std::filesystem::path& dir) {
  CsvWriter table({"s", "sigma_hat"});
  for (std::size_t k = 0; k < r.s.size(); ++k) table.row(r.s[k], r.sigma_hat[k]);
  write_atomic(dir / "sigma_hat.csv", table.str());
  json j;
  j["schema_version"] = kSchemaVersion;
  j["c0"] = r.c0;
  j["jump"] = r.jump;
  j["young_angle_rad"] = r.young_angle ? json(*r.young_angle) : json(nullptr);
  j["wetting"] = r.young_angle.has_value();
  write_atomic(dir / "envelope.json", j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Report

void write_report(const std::filesystem::path& dir) {
  json j;
  j["schema_version"] = kSchemaVersion;
  bool any = false;

  auto column = [](const CsvTable& t, std::string_view name) {
    std::vector<double> v;
    const std::size_t c = t.column(name);
    for (const auto& row : t.rows) v.push_back(row[c]);
    return v;
  };
  auto max_of = [](const std::vector<double>& v) {
    double m = kNaN;
    for (double x : v) m = nan_max(m, x);
    return m;
  };

  if (std::filesystem::exists(dir / "energy.csv")) {
    any = true;
    const CsvTable t = read_csv(dir / "energy.csv");
    const auto e = column(t, "energy"), d = column(t, "dissipation"), u = column(t, "max_abs_u");
    if (e.empty()) throw ConfigError("energy.csv has no rows");
    double worst_increase = 0.0, dissipated = 0.0;
    for (std::size_t k = 1; k < e.size(); ++k) {
      worst_increase = std::max(worst_increase, e[k] - e[k - 1]);
      dissipated += d[k];
    }
    j["energy"] = {{"steps", e.size() - 1},
                   {"initial", e.front()},
                   {"final", e.back()},
                   {"dissipated", dissipated},
                   {"ledger_closure", std::abs(e.front() - e.back() - dissipated) / std::abs(e.front())},
                   {"worst_step_increase", worst_increase},
                   {"max_abs_u", num(max_of(u))}};
  }
  if (std::filesystem::exists(dir / "stability.csv")) {
    any = true;
    const CsvTable t = read_csv(dir / "stability.csv");
    const auto re = column(t, "rel_entropy"), be = column(t, "bulk_error");
    const auto rr = column(t, "gronwall_rhs_relEn"), rb = column(t, "gronwall_rhs_bulk");
    bool ok_e = true, ok_b = true;
    for (std::size_t k = 0; k < re.size(); ++k) {
      if (!std::isnan(rr[k])) ok_e = ok_e && re[k] <= rr[k] + 1e-12 * std::max(1.0, std::abs(rr[k]));
      if (!std::isnan(rb[k])) ok_b = ok_b && be[k] <= rb[k] + 1e-12 * std::max(1.0, std::abs(rb[k]));
    }
    j["stability"] = {{"samples", re.size()},
                      {"max_rel_entropy", num(max_of(re))},
                      {"max_bulk_error", num(max_of(be))},
                      {"rel_entropy_within_bound", ok_e},
                      {"bulk_error_within_bound", ok_b}};
  }
  if (std::filesystem::exists(dir / "defects.csv")) {
    any = true;
    const CsvTable t = read_csv(dir / "defects.csv");
    const auto e = column(t, "phase_energy"), q = column(t, "equipartition"), b = column(t, "boundary_defect");
    std::vector<double> rq, rb;
    for (std::size_t k = 0; k < e.size(); ++k) {
      rq.push_back(q[k] / e[k]);
      rb.push_back(std::abs(b[k]) / e[k]);
    }
    j["defects"] = {{"max_equipartition_relative", num(max_of(rq))}, {"max_boundary_relative", num(max_of(rb))}};
  }
  if (std::filesystem::exists(dir / "sweep.csv")) {
    any = true;
    const CsvTable t = read_csv(dir / "sweep.csv");
    json rows = json::array();
    for (const auto& row : t.rows) {
      json r;
      for (std::size_t c = 0; c < t.header.size(); ++c) r[t.header[c]] = num(row[c]);
      rows.push_back(r);
    }
    j["sweep"] = rows;
  }
  if (!any) throw ConfigError("no result tables in '" + dir.string() + "'");
  write_atomic(dir / "summary.json", j.dump(2) + "\n");
}

}  // namespace pfc
