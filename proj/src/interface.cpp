#include "pfc/interface.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace pfc {

namespace {

// Lattice of (nx + 2) x (ny + 2) nodes: wall traces, cell centres, wall traces.
struct Lattice {
  int nx = 0, ny = 0;  // node counts
  std::vector<double> xs, ys, phi;

  double at(int i, int j) const { return phi[static_cast<std::size_t>(j) * nx + i]; }
  Vec2 node(int i, int j) const { return {xs[i], ys[j]}; }
};

Lattice build_lattice(const Grid& g, const ScalarField& u) {
  Lattice L;
  L.nx = g.nx + 2;
  L.ny = g.ny + 2;
  L.xs.resize(L.nx);
  L.ys.resize(L.ny);
  L.xs[0] = 0.0;
  L.ys[0] = 0.0;
  for (int i = 1; i <= g.nx; ++i) L.xs[i] = (i - 0.5) * g.h;
  for (int j = 1; j <= g.ny; ++j) L.ys[j] = (j - 0.5) * g.h;
  L.xs[L.nx - 1] = g.lx();
  L.ys[L.ny - 1] = g.ly();
  L.phi.assign(static_cast<std::size_t>(L.nx) * L.ny, 0.0);
  auto set = [&](int i, int j, double v) { L.phi[static_cast<std::size_t>(j) * L.nx + i] = v; };
  auto cell = [&](int i, int j) { return u[g.index(i, j)]; };
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) set(i + 1, j + 1, psi_level(cell(i, j)));
    set(0, j + 1, psi_level(boundary_trace(cell(0, j), cell(1, j))));
    set(L.nx - 1, j + 1, psi_level(boundary_trace(cell(g.nx - 1, j), cell(g.nx - 2, j))));
  }
  for (int i = 0; i < g.nx; ++i) {
    set(i + 1, 0, psi_level(boundary_trace(cell(i, 0), cell(i, 1))));
    set(i + 1, L.ny - 1, psi_level(boundary_trace(cell(i, g.ny - 1), cell(i, g.ny - 2))));
  }
  set(0, 0, 0.5 * (L.at(1, 0) + L.at(0, 1)));
  set(L.nx - 1, 0, 0.5 * (L.at(L.nx - 2, 0) + L.at(L.nx - 1, 1)));
  set(0, L.ny - 1, 0.5 * (L.at(1, L.ny - 1) + L.at(0, L.ny - 2)));
  set(L.nx - 1, L.ny - 1, 0.5 * (L.at(L.nx - 2, L.ny - 1) + L.at(L.nx - 1, L.ny - 2)));
  return L;
}

bool positive(double v) { return v > 0.0; }

Vec2 crossing(const Vec2& a, const Vec2& b, double fa, double fb) {
  const double t = fa / (fa - fb);
  return a + (b - a) * t;
}

// Edge key: kind 0 = horizontal from node (i, j) to (i + 1, j); kind 1 = vertical to (i, j + 1).
using EdgeKey = std::tuple<int, int, int>;

struct Segment {
  EdgeKey from, to;
  Vec2 p, q;
};

double shoelace(const std::vector<Vec2>& poly) {
  double a = 0.0;
  for (std::size_t k = 0; k < poly.size(); ++k) a += cross(poly[k], poly[(k + 1) % poly.size()]);
  return 0.5 * a;
}

std::optional<Wall> boundary_wall(const Lattice& L, const EdgeKey& e) {
  const auto [kind, i, j] = e;
  if (kind == 0 && j == 0) return Wall::bottom;
  if (kind == 0 && j == L.ny - 1) return Wall::top;
  if (kind == 1 && i == 0) return Wall::left;
  if (kind == 1 && i == L.nx - 1) return Wall::right;
  return std::nullopt;
}

void finish_chain(Polyline& c) {
  std::vector<Vec2> pts;
  for (const auto& p : c.points)
    if (pts.empty() || norm(p - pts.back()) > 1e-13) pts.push_back(p);
  if (c.closed && pts.size() > 1 && norm(pts.front() - pts.back()) <= 1e-13) pts.pop_back();
  c.points = std::move(pts);
  const std::size_t n = c.points.size();
  c.normals.assign(n, Vec2{});
  const std::size_t segs = c.closed ? n : (n ? n - 1 : 0);
  for (std::size_t k = 0; k < segs; ++k) {
    const Vec2 d = c.points[(k + 1) % n] - c.points[k];
    const Vec2 nn = perp(d / norm(d));
    c.normals[k] += nn;
    c.normals[(k + 1) % n] += nn;
  }
  for (auto& v : c.normals) {
    const double m = norm(v);
    if (m > 0) v = v / m;
  }
}

double wall_coordinate_distance(const InterfaceCurve& c, Wall w, const Vec2& p) {
  switch (w) {
    case Wall::left: return p.x;
    case Wall::right: return c.lx - p.x;
    case Wall::bottom: return p.y;
    case Wall::top: return c.ly - p.y;
  }
  return 0.0;
}

struct SegmentRef {
  Vec2 a, b;
};

std::vector<SegmentRef> all_segments(const InterfaceCurve& c) {
  std::vector<SegmentRef> out;
  for (const auto& ch : c.chains) {
    const std::size_t n = ch.points.size();
    const std::size_t segs = ch.closed ? n : (n ? n - 1 : 0);
    for (std::size_t k = 0; k < segs; ++k) out.push_back({ch.points[k], ch.points[(k + 1) % n]});
  }
  return out;
}

Vec2 closest_on_segment(const Vec2& p, const SegmentRef& s) {
  const Vec2 d = s.b - s.a;
  const double l2 = dot(d, d);
  const double r = l2 > 0 ? std::clamp(dot(p - s.a, d) / l2, 0.0, 1.0) : 0.0;
  return s.a + d * r;
}

// Signed displacement along n from p to the curve made of segs.
double shift_along(const Vec2& p, const Vec2& n, const std::vector<SegmentRef>& segs, double max_shift) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : segs) {
    const Vec2 d = s.b - s.a;
    const double denom = cross(n, d);
    if (std::abs(denom) < 1e-14 * norm(d)) continue;
    const Vec2 w = s.a - p;
    const double t = cross(w, d) / denom;
    const double r = cross(w, n) / denom;
    if (r < -1e-9 || r > 1.0 + 1e-9) continue;
    if (std::abs(t) < std::abs(best)) best = t;
  }
  if (std::abs(best) <= max_shift) return best;
  double dist = std::numeric_limits<double>::infinity();
  Vec2 q{};
  for (const auto& s : segs) {
    const Vec2 c = closest_on_segment(p, s);
    const double d = norm(c - p);
    if (d < dist) {
      dist = d;
      q = c;
    }
  }
  if (dist > max_shift)
    throw RuntimeFailure("interface correspondence failed: displacement exceeds the sampling limit");
  return dot(q - p, n);
}

}  // namespace

std::size_t InterfaceCurve::vertex_count() const {
  std::size_t n = 0;
  for (const auto& c : chains) n += c.points.size();
  return n;
}

InterfaceCurve extract_interface(const Grid& g, const PhaseField& st) {
  if (st.u.size() != g.size()) throw ConfigError("field does not match the grid");
  const Lattice L = build_lattice(g, st.u);
  InterfaceCurve out;
  out.t = st.t;
  out.lx = g.lx();
  out.ly = g.ly();

  std::map<EdgeKey, Vec2> points;
  auto edge_point = [&](const EdgeKey& e) {
    auto it = points.find(e);
    if (it != points.end()) return it->second;
    const auto [kind, i, j] = e;
    const int i2 = kind == 0 ? i + 1 : i, j2 = kind == 0 ? j : j + 1;
    const Vec2 p = crossing(L.node(i, j), L.node(i2, j2), L.at(i, j), L.at(i2, j2));
    points.emplace(e, p);
    return p;
  };

  std::vector<Segment> segments;
  for (int J = 0; J + 1 < L.ny; ++J) {
    for (int I = 0; I + 1 < L.nx; ++I) {
      const std::array<Vec2, 4> c{L.node(I, J), L.node(I + 1, J), L.node(I + 1, J + 1), L.node(I, J + 1)};
      const std::array<double, 4> f{L.at(I, J), L.at(I + 1, J), L.at(I + 1, J + 1), L.at(I, J + 1)};
      // Counter-clockwise edges: bottom, right, top (c2 -> c3), left (c3 -> c0).
      const std::array<EdgeKey, 4> keys{EdgeKey{0, I, J}, EdgeKey{1, I + 1, J}, EdgeKey{0, I, J + 1}, EdgeKey{1, I, J}};
      std::array<int, 4> kind{};  // +1: positive to negative (segment start), -1: negative to positive
      int count = 0;
      for (int e = 0; e < 4; ++e) {
        const bool a = positive(f[e]), b = positive(f[(e + 1) % 4]);
        kind[e] = a == b ? 0 : (a ? 1 : -1);
        count += kind[e] != 0;
      }
      std::vector<Vec2> poly;
      for (int e = 0; e < 4; ++e) {
        if (positive(f[e])) poly.push_back(c[e]);
        if (kind[e]) poly.push_back(edge_point(keys[e]));
      }
      if (count == 0) {
        if (positive(f[0])) out.area += shoelace(poly);
        continue;
      }
      auto add = [&](int from, int to) {
        segments.push_back({keys[from], keys[to], edge_point(keys[from]), edge_point(keys[to])});
      };
      if (count == 2) {
        int s = -1, t = -1;
        for (int e = 0; e < 4; ++e) {
          if (kind[e] == 1) s = e;
          if (kind[e] == -1) t = e;
        }
        add(s, t);
        out.area += shoelace(poly);
        continue;
      }
      // Saddle: the centre value decides whether the positive corners connect.
      const bool centre = positive(0.25 * (f[0] + f[1] + f[2] + f[3]));
      for (int e = 0; e < 4; ++e)
        if (kind[e] == 1) add(e, centre ? (e + 1) % 4 : (e + 3) % 4);
      if (centre) {
        out.area += shoelace(poly);
      } else {
        for (int k = 0; k < 4; ++k) {
          if (!positive(f[k])) continue;
          const Vec2 a = edge_point(keys[(k + 3) % 4]), b = edge_point(keys[k]);
          out.area += std::abs(0.5 * cross(b - c[k], a - c[k]));
        }
      }
    }
  }

  for (const auto& s : segments) out.interior_length += norm(s.q - s.p);

  std::map<EdgeKey, std::size_t> by_start;
  for (std::size_t k = 0; k < segments.size(); ++k) by_start[segments[k].from] = k;
  std::vector<char> used(segments.size(), 0);
  auto follow = [&](std::size_t first, Polyline& chain) {
    std::size_t k = first;
    chain.points.push_back(segments[k].p);
    while (true) {
      used[k] = 1;
      chain.points.push_back(segments[k].q);
      auto it = by_start.find(segments[k].to);
      if (it == by_start.end() || used[it->second]) return segments[k].to;
      k = it->second;
    }
  };
  for (std::size_t k = 0; k < segments.size(); ++k) {
    if (used[k]) continue;
    const auto wall = boundary_wall(L, segments[k].from);
    if (!wall) continue;
    Polyline chain;
    chain.start_wall = wall;
    chain.end_wall = boundary_wall(L, follow(k, chain));
    out.chains.push_back(std::move(chain));
  }
  for (std::size_t k = 0; k < segments.size(); ++k) {
    if (used[k]) continue;
    Polyline chain;
    chain.closed = true;
    follow(k, chain);
    out.chains.push_back(std::move(chain));
  }
  for (std::size_t idx = 0; idx < out.chains.size(); ++idx) {
    auto& ch = out.chains[idx];
    finish_chain(ch);
    if (ch.points.empty()) continue;
    if (ch.start_wall) out.contacts.push_back({ch.points.front(), *ch.start_wall, idx, true});
    if (ch.end_wall) out.contacts.push_back({ch.points.back(), *ch.end_wall, idx, false});
  }

  // Wetted intervals from the piecewise-linear trace along each wall.
  for (Wall w : kAllWalls) {
    std::vector<Vec2> pos;
    std::vector<double> val;
    const bool horizontal = w == Wall::bottom || w == Wall::top;
    const int n = horizontal ? L.nx : L.ny;
    for (int k = 0; k < n; ++k) {
      int i = 0, j = 0;
      if (horizontal) {
        i = k;
        j = w == Wall::bottom ? 0 : L.ny - 1;
      } else {
        j = k;
        i = w == Wall::left ? 0 : L.nx - 1;
      }
      pos.push_back(L.node(i, j));
      val.push_back(L.at(i, j));
    }
    std::optional<Vec2> open;
    for (int k = 0; k < n; ++k) {
      if (positive(val[k]) && !open) open = k == 0 ? pos[0] : crossing(pos[k - 1], pos[k], val[k - 1], val[k]);
      if (open && (k + 1 == n || !positive(val[k + 1]))) {
        const Vec2 end = k + 1 == n ? pos[k] : crossing(pos[k], pos[k + 1], val[k], val[k + 1]);
        out.wetted_intervals.push_back({w, *open, end});
        out.wetted[static_cast<int>(w)] += norm(end - *open);
        open.reset();
      }
    }
  }
  return out;
}

double sharp_energy(const InterfaceCurve& curve, const Walls& walls) {
  double e = kSurfaceTension * curve.interior_length;
  for (const auto& spec : walls.all()) {
    if (!spec.contact || spec.energy.is_neumann()) continue;
    const double len = curve.wetted[static_cast<int>(spec.wall)];
    if (len > 0.0) e += EnergyModel(spec.energy.alpha()).signed_jump() * len;
  }
  return e;
}

double sharp_energy(const InterfaceCurve& curve, const EnergyModel& model) {
  return model.c0() * curve.interior_length + model.signed_jump() * curve.wetted_length();
}

namespace {

// Derivative at x = 0 of the least-squares polynomial of the given degree,
// normal equations in scaled variables x / scale.
double fit_slope_at_zero(const std::vector<double>& x, const std::vector<double>& y, int degree, double scale) {
  const int m = degree + 1;
  std::vector<double> A(m * m, 0.0), r(m, 0.0);
  for (std::size_t k = 0; k < x.size(); ++k) {
    std::vector<double> basis(m);
    basis[0] = 1.0;
    for (int q = 1; q < m; ++q) basis[q] = basis[q - 1] * x[k] / scale;
    for (int a = 0; a < m; ++a) {
      r[a] += basis[a] * y[k];
      for (int b = 0; b < m; ++b) A[a * m + b] += basis[a] * basis[b];
    }
  }
  for (int col = 0; col < m; ++col) {
    int piv = col;
    for (int row = col + 1; row < m; ++row)
      if (std::abs(A[row * m + col]) > std::abs(A[piv * m + col])) piv = row;
    for (int b = 0; b < m; ++b) std::swap(A[col * m + b], A[piv * m + b]);
    std::swap(r[col], r[piv]);
    for (int row = 0; row < m; ++row) {
      if (row == col) continue;
      const double f = A[row * m + col] / A[col * m + col];
      for (int b = 0; b < m; ++b) A[row * m + b] -= f * A[col * m + b];
      r[row] -= f * r[col];
    }
  }
  return (r[1] / A[1 * m + 1]) / scale;
}

}  // namespace

std::vector<ContactAngle> contact_angle(const InterfaceCurve& curve, Wall wall, double eps,
                                        const AngleOptions& opt) {
  std::vector<ContactAngle> out;
  const Vec2 n_in = inward_normal(wall), tw = wall_tangent(wall);
  for (const auto& cp : curve.contacts) {
    if (cp.wall != wall) continue;
    const auto& pts = curve.chains[cp.chain].points;
    // Wall-normal and tangential coordinates as functions of arclength from the contact.
    std::vector<double> arc, zeta, eta;
    double s = 0.0;
    bool spans_band = false;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const Vec2& p = pts[cp.at_start ? k : pts.size() - 1 - k];
      if (k > 0) s += norm(p - pts[cp.at_start ? k - 1 : pts.size() - k]);
      if (s > opt.band_max * eps) {
        spans_band = true;
        break;
      }
      if (s >= opt.band_min * eps) {
        arc.push_back(s);
        zeta.push_back(wall_coordinate_distance(curve, wall, p));
        eta.push_back(dot(p - cp.position, tw));
      }
    }
    if (!spans_band) throw RuntimeFailure("contact angle: chain shorter than the fitting band");
    if (static_cast<int>(arc.size()) < std::max(opt.min_vertices, opt.fit_degree + 1))
      throw RuntimeFailure("contact angle: too few vertices in the fitting band");
    const double scale = opt.band_max * eps;
    const double dz = fit_slope_at_zero(arc, zeta, opt.fit_degree, scale);
    const double de = fit_slope_at_zero(arc, eta, opt.fit_degree, scale);
    Vec2 into = n_in * dz + tw * de;  // walking from the wall into the domain
    into = into / norm(into);
    const Vec2 nu = perp(cp.at_start ? into : -into);
    out.push_back({cp, std::acos(std::clamp(dot(nu, n_in), -1.0, 1.0)), static_cast<int>(arc.size())});
  }
  return out;
}

std::vector<VelocitySample> normal_velocity(const InterfaceCurve& a, const InterfaceCurve& b, double dt,
                                            double max_shift) {
  if (!(dt > 0.0)) throw ConfigError("snapshot spacing must be positive");
  if (a.empty() || b.empty()) throw RuntimeFailure("normal velocity needs two nonempty curves");
  const auto segs = all_segments(b);
  std::vector<VelocitySample> out;
  out.reserve(a.vertex_count());
  for (const auto& ch : a.chains)
    for (std::size_t k = 0; k < ch.points.size(); ++k)
      out.push_back({ch.points[k], ch.normals[k], shift_along(ch.points[k], ch.normals[k], segs, max_shift) / dt});
  return out;
}

std::vector<VelocitySample> normal_velocity_centered(const InterfaceCurve& prev, const InterfaceCurve& cur,
                                                     const InterfaceCurve& next, double max_shift) {
  const double span = next.t - prev.t;
  if (!(span > 0.0) || cur.t <= prev.t || cur.t >= next.t) throw ConfigError("snapshots out of order");
  const auto sp = all_segments(prev), sn = all_segments(next);
  std::vector<VelocitySample> out;
  for (const auto& ch : cur.chains)
    for (std::size_t k = 0; k < ch.points.size(); ++k) {
      const Vec2 p = ch.points[k], n = ch.normals[k];
      const double fwd = shift_along(p, n, sn, max_shift), back = shift_along(p, n, sp, max_shift);
      out.push_back({p, n, (fwd - back) / span});
    }
  return out;
}

namespace {

template <typename F>
void for_each_segment(const InterfaceCurve& curve, const std::vector<VelocitySample>& v, F&& f) {
  if (v.size() != curve.vertex_count()) throw ConfigError("velocity samples do not match the curve");
  std::size_t base = 0;
  for (const auto& ch : curve.chains) {
    const std::size_t n = ch.points.size();
    const std::size_t segs = ch.closed ? n : (n ? n - 1 : 0);
    for (std::size_t k = 0; k < segs; ++k) f(v[base + k], v[base + (k + 1) % n]);
    base += n;
  }
}

}  // namespace

double motion_law_defect(const Grid& grid, const InterfaceCurve& curve, const std::vector<VelocitySample>& velocity,
                         const VectorTestField& b, const Walls& walls) {
  double bmax = 0.0, bnormal = 0.0;
  for (const auto& f : boundary_faces(grid)) {
    const Vec2 v = b.value(f.midpoint);
    bmax = std::max(bmax, norm(v));
    bnormal = std::max(bnormal, std::abs(dot(v, inward_normal(f.wall))));
  }
  if (bnormal > 1e-10 * (1.0 + bmax)) throw ConfigError("test field is not tangential on the walls");

  double total = 0.0;
  for_each_segment(curve, velocity, [&](const VelocitySample& p, const VelocitySample& q) {
    const Vec2 d = q.position - p.position;
    const double len = norm(d);
    if (len == 0.0) return;
    const Vec2 t = d / len;
    const Mat2 gb = b.gradient((p.position + q.position) * 0.5);
    const Vec2 gt{gb.xx * t.x + gb.xy * t.y, gb.yx * t.x + gb.yy * t.y};
    const double vp = p.V * dot(b.value(p.position), p.normal);
    const double vq = q.V * dot(b.value(q.position), q.normal);
    total += kSurfaceTension * len * (dot(t, gt) + 0.5 * (vp + vq));
  });
  std::array<double, 4> jump{};
  for (const auto& s : walls.all())
    if (s.contact && !s.energy.is_neumann()) jump[static_cast<int>(s.wall)] = EnergyModel(s.energy.alpha()).signed_jump();
  for (const auto& iv : curve.wetted_intervals) {
    const double j = jump[static_cast<int>(iv.wall)];
    const Vec2 d = iv.to - iv.from;
    const double len = norm(d);
    if (j == 0.0 || len == 0.0) continue;
    total += j * dot(b.value(iv.to) - b.value(iv.from), d / len);
  }
  return total;
}

double motion_law_residual(const Grid& grid, const InterfaceCurve& curve, const std::vector<VelocitySample>& velocity,
                           const VectorTestField& b, const Walls& walls) {
  return std::abs(motion_law_defect(grid, curve, velocity, b, walls));
}

double dissipation_rate(const InterfaceCurve& curve, const std::vector<VelocitySample>& velocity) {
  double acc = 0.0;
  for_each_segment(curve, velocity, [&](const VelocitySample& p, const VelocitySample& q) {
    acc += norm(q.position - p.position) * 0.5 * (p.V * p.V + q.V * q.V);
  });
  return kSurfaceTension * acc;
}

DissipationReport bv_dissipation_check(const std::vector<InterfaceCurve>& curves, const Walls& walls,
                                       double initial_phase_energy, double max_shift, double energy_tolerance,
                                       double holder_tolerance) {
  if (curves.size() < 2) throw ConfigError("dissipation check needs at least two snapshots");
  DissipationReport r;
  r.energy_start = sharp_energy(curves.front(), walls);
  r.energy_end = sharp_energy(curves.back(), walls);
  for (std::size_t k = 0; k + 1 < curves.size(); ++k) {
    const auto& a = curves[k];
    const auto& b = curves[k + 1];
    const double dt = b.t - a.t;
    if (a.empty() || b.empty()) continue;
    const double fwd = dissipation_rate(a, normal_velocity(a, b, dt, max_shift));
    const double back = dissipation_rate(b, normal_velocity(b, a, dt, max_shift));
    r.dissipation += dt * 0.5 * (fwd + back);
  }
  r.slack = r.energy_end + r.dissipation - r.energy_start;
  r.dissipation_ok = r.slack <= energy_tolerance * std::abs(r.energy_start);
  for (std::size_t i = 0; i < curves.size(); ++i)
    for (std::size_t j = i + 1; j < curves.size(); ++j) {
      const double dt = curves[j].t - curves[i].t;
      if (dt <= 0.0) continue;
      const double ratio = kSurfaceTension * std::abs(curves[j].area - curves[i].area) /
                           (std::sqrt(2.0 * dt) * initial_phase_energy);
      r.holder_worst = std::max(r.holder_worst, ratio);
    }
  r.holder_ok = r.holder_worst <= 1.0 + holder_tolerance;
  return r;
}

double max_distance_to(const InterfaceCurve& curve, const std::function<double(const Vec2&)>& distance) {
  double worst = 0.0;
  for (const auto& ch : curve.chains)
    for (const auto& p : ch.points) worst = std::max(worst, std::abs(distance(p)));
  return worst;
}

double hausdorff_distance(const InterfaceCurve& a, const InterfaceCurve& b) {
  const auto sa = all_segments(a), sb = all_segments(b);
  auto one_way = [](const InterfaceCurve& c, const std::vector<SegmentRef>& segs) {
    double worst = 0.0;
    for (const auto& ch : c.chains)
      for (const auto& p : ch.points) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& s : segs) best = std::min(best, norm(closest_on_segment(p, s) - p));
        worst = std::max(worst, best);
      }
    return worst;
  };
  return std::max(one_way(a, sb), one_way(b, sa));
}

}  // namespace pfc
