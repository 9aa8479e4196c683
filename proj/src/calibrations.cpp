#include "pfc/calibrations.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace pfc {

namespace {

constexpr double kPi = std::numbers::pi;

// Quintic smoothstep, clamped to [0, 1]; C2.
double smooth_step(double z) {
  if (z <= 0.0) return 0.0;
  if (z >= 1.0) return 1.0;
  return z * z * z * (10.0 + z * (-15.0 + 6.0 * z));
}

// Odd C1 saturation: identity on |z| <= 1/2, constant 1 beyond |z| = 3/2.
double saturate(double z) {
  const double a = std::abs(z);
  double s;
  if (a <= 0.5) {
    s = a;
  } else if (a >= 1.5) {
    s = 1.0;
  } else {
    const double e = a - 0.5;
    s = 0.5 + e - 0.5 * e * e;
  }
  return std::copysign(s, z);
}

// Smooth surrogate d^2 / (1 + d^2) >= min(1, d^2) / 2.
double soft_square(double d) { return d * d / (1.0 + d * d); }

double checked_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(what) + " must be positive");
  return v;
}

bool near(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

}  // namespace

std::string_view flow_name(FlowKind kind) {
  switch (kind) {
    case FlowKind::stationary_chord: return "chord";
    case FlowKind::shrinking_half_disk: return "half_disk";
    case FlowKind::strip_translator: return "translator";
  }
  return "?";
}

FlowKind parse_flow(std::string_view name) {
  if (name == "chord" || name == "stationary_chord") return FlowKind::stationary_chord;
  if (name == "half_disk" || name == "shrinking_half_disk") return FlowKind::shrinking_half_disk;
  if (name == "translator" || name == "strip_translator") return FlowKind::strip_translator;
  throw ConfigError("unknown reference flow '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Reference flows

ReferenceFlow::ReferenceFlow(FlowKind kind, const FlowParams& params) : kind_(kind), params_(params) {
  const FlowParams& p = params_;
  checked_positive(p.lx, "lx");
  checked_positive(p.ly, "ly");
  if (!(p.horizon >= 0.0)) throw ConfigError("horizon must be non-negative");
  const double margin = p.eps > 0.0 ? 4.0 * p.eps : 0.0;

  switch (kind) {
    case FlowKind::stationary_chord:
      xlo_ = 0.0;
      xhi_ = p.lx;
      break;
    case FlowKind::shrinking_half_disk: {
      checked_positive(p.r0, "r0");
      const double rt2 = p.r0 * p.r0 - 2.0 * p.horizon;
      if (!(rt2 > 0.0) || std::sqrt(rt2) <= margin)
        throw ConfigError("half-disk horizon too close to extinction");
      if (p.r0 + margin >= 0.5 * p.lx || p.r0 + margin >= p.ly)
        throw ConfigError("half-disk does not fit in the box");
      xlo_ = 0.5 * p.lx - p.r0;
      xhi_ = 0.5 * p.lx + p.r0;
      break;
    }
    case FlowKind::strip_translator: {
      checked_positive(p.width, "width");
      if (!(p.alpha > 0.0 && p.alpha < kPi)) throw ConfigError("translator angle must lie in (0, pi)");
      a_ = (kPi - 2.0 * p.alpha) / p.width;
      const double lo = p.center_x - 0.5 * p.width;
      const double hi = p.center_x + 0.5 * p.width;
      const bool left_ok = near(lo, 0.0) || near(p.center_x, 0.0);
      const bool right_ok = near(hi, p.lx) || near(p.center_x, p.lx);
      if (!left_ok || !right_ok)
        throw ConfigError("side walls must be strip edges or the symmetry axis");
      xlo_ = std::max(0.0, lo);
      xhi_ = std::min(p.lx, hi);
      for (double t : {0.0, p.horizon}) {
        for (int k = 0; k <= 64; ++k) {
          const double y = height(xlo_ + (xhi_ - xlo_) * k / 64.0, t);
          if (y <= margin || y >= p.ly - margin)
            throw ConfigError("translator leaves the box within the horizon");
        }
      }
      break;
    }
  }
}

ReferenceFlow build_reference(FlowKind kind, const FlowParams& params) { return ReferenceFlow(kind, params); }

Walls ReferenceFlow::walls() const {
  Walls w = Walls::neumann();
  if (kind_ == FlowKind::strip_translator && std::abs(a_) > 0.0) {
    const double alpha = params_.alpha;
    if (near(params_.center_x - 0.5 * params_.width, 0.0))
      w.set({Wall::left, true, BoundaryEnergy(alpha)});
    if (near(params_.center_x + 0.5 * params_.width, params_.lx))
      w.set({Wall::right, true, BoundaryEnergy(alpha)});
  }
  return params_.swap_phases ? w.phase_swapped() : w;
}

double ReferenceFlow::contact_angle() const {
  const double alpha = kind_ == FlowKind::strip_translator ? params_.alpha : kPi / 2.0;
  return params_.swap_phases ? kPi - alpha : alpha;
}

double ReferenceFlow::radius(double t) const {
  if (kind_ != FlowKind::shrinking_half_disk) return 0.0;
  return std::sqrt(std::max(0.0, params_.r0 * params_.r0 - 2.0 * t));
}

double ReferenceFlow::height(double x, double t) const {
  if (a_ == 0.0) return params_.y0;
  return params_.y0 + a_ * t - std::log(std::cos(a_ * (x - params_.center_x))) / a_;
}

bool ReferenceFlow::inside(const Vec2& p, double t) const { return signed_distance(p, t) > 0.0; }

double ReferenceFlow::unsigned_distance_translator(const Vec2& p, double t) const {
  auto d2 = [&](double x) {
    const double dy = p.y - height(x, t);
    return (x - p.x) * (x - p.x) + dy * dy;
  };
  constexpr int n = 64;
  const double dx = (xhi_ - xlo_) / n;
  int best = 0;
  double best_d2 = d2(xlo_);
  for (int k = 1; k <= n; ++k) {
    const double v = d2(xlo_ + k * dx);
    if (v < best_d2) {
      best_d2 = v;
      best = k;
    }
  }
  // Golden section on the bracketing pair of sample intervals.
  double lo = xlo_ + std::max(0, best - 1) * dx;
  double hi = xlo_ + std::min(n, best + 1) * dx;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = d2(x1), f2 = d2(x2);
  for (int it = 0; it < 80 && hi - lo > 1e-15; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = d2(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = d2(x2);
    }
  }
  return std::sqrt(std::min({best_d2, f1, f2, d2(xlo_), d2(xhi_)}));
}

double ReferenceFlow::signed_distance(const Vec2& p, double t) const {
  double d = 0.0;
  switch (kind_) {
    case FlowKind::stationary_chord:
      d = p.x - 0.5 * params_.lx;
      break;
    case FlowKind::shrinking_half_disk: {
      const Vec2 c{0.5 * params_.lx, 0.0};
      d = radius(t) - norm(p - c);
      break;
    }
    case FlowKind::strip_translator: {
      const double u = unsigned_distance_translator(p, t);
      d = p.y > height(std::clamp(p.x, xlo_, xhi_), t) ? u : -u;
      break;
    }
  }
  return params_.swap_phases ? -d : d;
}

double ReferenceFlow::area(double t) const {
  const double box = params_.lx * params_.ly;
  double a = 0.0;
  switch (kind_) {
    case FlowKind::stationary_chord:
      a = 0.5 * box;
      break;
    case FlowKind::shrinking_half_disk:
      a = 0.5 * kPi * radius(t) * radius(t);
      break;
    case FlowKind::strip_translator: {
      // ly - g integrated by composite Simpson; g is smooth on the strip.
      constexpr int n = 2048;
      const double dx = (xhi_ - xlo_) / n;
      double s = 0.0;
      for (int k = 0; k <= n; ++k) {
        const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        s += w * (params_.ly - height(xlo_ + k * dx, t));
      }
      a = s * dx / 3.0;
      break;
    }
  }
  return params_.swap_phases ? box - a : a;
}

std::vector<InterfaceSample> ReferenceFlow::interface(double t, int samples) const {
  if (samples < 2) throw ConfigError("need at least two interface samples");
  std::vector<InterfaceSample> out;
  out.reserve(samples);
  // Ordered so that A lies to the left of the direction of travel.
  for (int k = 0; k < samples; ++k) {
    const double s = static_cast<double>(k) / (samples - 1);
    InterfaceSample q;
    switch (kind_) {
      case FlowKind::stationary_chord:
        q.point = {0.5 * params_.lx, params_.ly * (1.0 - s)};
        q.normal = {1.0, 0.0};
        break;
      case FlowKind::shrinking_half_disk: {
        const double R = radius(t), phi = kPi * s;
        const Vec2 e{std::cos(phi), std::sin(phi)};
        q.point = Vec2{0.5 * params_.lx, 0.0} + R * e;
        q.normal = -e;
        q.V = 1.0 / R;
        q.curvature = 1.0 / R;
        break;
      }
      case FlowKind::strip_translator: {
        const double x = xlo_ + (xhi_ - xlo_) * s;
        const double th = a_ * (x - params_.center_x);
        q.point = {x, height(x, t)};
        q.normal = {-std::sin(th), std::cos(th)};
        q.V = a_ * std::cos(th);
        q.curvature = a_ * std::cos(th);
        break;
      }
    }
    if (params_.swap_phases) {
      q.normal = -q.normal;
      q.V = -q.V;
      q.curvature = -q.curvature;
    }
    out.push_back(q);
  }
  if (params_.swap_phases) std::reverse(out.begin(), out.end());
  return out;
}

std::vector<Vec2> ReferenceFlow::contact_points(double t) const {
  const auto s = interface(t, 2);
  return {s.front().point, s.back().point};
}

InterfaceCurve ReferenceFlow::curve(double t, int samples) const {
  const auto s = interface(t, samples);
  InterfaceCurve c;
  c.t = t;
  c.lx = params_.lx;
  c.ly = params_.ly;
  Polyline pl;
  for (const auto& q : s) {
    pl.points.push_back(q.point);
    pl.normals.push_back(q.normal);
  }
  auto wall_of = [&](const Vec2& p) {
    const double tol = 1e-12 * std::max(params_.lx, params_.ly);
    if (std::abs(p.y) <= tol) return Wall::bottom;
    if (std::abs(p.y - params_.ly) <= tol) return Wall::top;
    if (std::abs(p.x) <= tol) return Wall::left;
    return Wall::right;
  };
  pl.start_wall = wall_of(pl.points.front());
  pl.end_wall = wall_of(pl.points.back());
  for (std::size_t k = 1; k < pl.points.size(); ++k) c.interior_length += norm(pl.points[k] - pl.points[k - 1]);
  c.contacts.push_back({pl.points.front(), *pl.start_wall, 0, true});
  c.contacts.push_back({pl.points.back(), *pl.end_wall, 0, false});
  c.chains.push_back(std::move(pl));
  c.area = area(t);

  // Wetted lengths |A cap wall| per wall.
  std::array<double, 4> w{};
  const double lx = params_.lx, ly = params_.ly;
  switch (kind_) {
    case FlowKind::stationary_chord:
      w = {0.0, ly, 0.5 * lx, 0.5 * lx};
      break;
    case FlowKind::shrinking_half_disk:
      w = {0.0, 0.0, 2.0 * radius(t), 0.0};
      break;
    case FlowKind::strip_translator:
      w = {ly - height(xlo_, t), ly - height(xhi_, t), 0.0, lx};
      break;
  }
  if (params_.swap_phases) {
    const std::array<double, 4> full{ly, ly, lx, lx};
    for (int k = 0; k < 4; ++k) w[k] = full[k] - w[k];
  }
  c.wetted = w;
  return c;
}

// ---------------------------------------------------------------------------
// Calibrations

CalibrationFields::Samples CalibrationFields::sample(double t) const {
  Samples s;
  s.xi.resize(grid.size());
  s.velocity.resize(grid.size());
  s.weight.resize(grid.size());
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      const Vec2 p = grid.center(i, j);
      const std::size_t k = grid.index(i, j);
      s.xi[k] = xi(p, t);
      s.velocity[k] = velocity(p, t);
      s.weight[k] = weight(p, t);
    }
  return s;
}

namespace {

void require_resolved(double ell, const Grid& grid) {
  if (ell < 4.0 * grid.h)
    throw ConfigError("grid too coarse for the calibration cutoff (ell = " + std::to_string(ell) +
                      " < 4h = " + std::to_string(4.0 * grid.h) + ")");
}

CalibrationFields chord_calibration(const ReferenceFlow& flow, const Grid& grid) {
  const double lx = flow.params().lx;
  const double x0 = 0.5 * lx;
  const double s = flow.swapped() ? -1.0 : 1.0;
  CalibrationFields f;
  f.ell = 0.25 * x0;
  require_resolved(f.ell, grid);
  f.c = 0.5;
  f.C = 10.0 * (1.0 + (kPi / lx) * (kPi / lx));
  const double ell = f.ell;
  f.xi = [=](const Vec2& p, double) { return Vec2{s * std::cos(kPi * (p.x - x0) / lx), 0.0}; };
  f.velocity = [](const Vec2&, double) { return Vec2{}; };
  f.weight = [=](const Vec2& p, double) { return s * saturate(-(p.x - x0) / ell); };
  return f;
}

CalibrationFields half_disk_calibration(const ReferenceFlow& flow, const Grid& grid) {
  const FlowParams& prm = flow.params();
  const Vec2 c{0.5 * prm.lx, 0.0};
  const double r0 = prm.r0;
  const double rT = flow.radius(prm.horizon);
  const double clearance = std::min(0.5 * prm.lx - r0, prm.ly - r0);
  const double s = flow.swapped() ? -1.0 : 1.0;
  constexpr double cb = 0.5;

  CalibrationFields f;
  f.ell = 0.25 * std::min(r0, clearance);
  require_resolved(f.ell, grid);
  // The core r < delta, where xi and B are mollified, must stay inside the
  // saturated part of the weight.
  f.delta = 0.5 * rT;
  if (rT - 1.5 * f.ell <= f.delta) throw ConfigError("half-disk radius too small for the weight band at the horizon");
  f.c = 0.5 * cb;
  // The core contracts at speed ~ 1/R over a length ~ R, so the transport
  // bounds scale like R^-4 in the distance-weighted form.
  f.C = 10.0 * (1.0 + std::pow(rT, -4.0));

  const double ell = f.ell, wc = 2.0 * f.ell, lx = prm.lx, ly = prm.ly, delta = f.delta;
  auto radius = [=](double t) { return std::sqrt(r0 * r0 - 2.0 * t); };
  auto cutoff = [=](const Vec2& p) {
    return smooth_step(p.x / wc) * smooth_step((lx - p.x) / wc) * smooth_step((ly - p.y) / wc);
  };
  // b(r)/r with b = (r/delta)(2 - r/delta) inside the core and 1 outside.
  auto core = [=](double r) { return r < delta ? (2.0 - r / delta) / delta : 1.0 / r; };

  f.xi = [=](const Vec2& p, double t) {
    const Vec2 v = p - c;
    const double g = 1.0 - cb * soft_square(norm(v) - radius(t));
    return v * (-s * g * core(norm(v)) * cutoff(p));
  };
  f.velocity = [=](const Vec2& p, double t) {
    const Vec2 v = p - c;
    return v * (-core(norm(v)) * cutoff(p) / radius(t));
  };
  f.weight = [=](const Vec2& p, double t) { return s * saturate((norm(p - c) - radius(t)) / ell); };
  return f;
}

CalibrationFields translator_calibration(const ReferenceFlow& flow, const Grid& grid) {
  const FlowParams& prm = flow.params();
  const double a = flow.speed();
  const double xc = prm.center_x;
  const double s = flow.swapped() ? -1.0 : 1.0;
  const double cos_alpha = std::abs(std::cos(prm.alpha));
  const double cb = 0.5 * (1.0 - cos_alpha);

  double g_lo = std::numeric_limits<double>::infinity(), g_hi = -g_lo;
  for (double t : {0.0, prm.horizon})
    for (int k = 0; k <= 256; ++k) {
      const double y = flow.height(flow.strip_lo() + (flow.strip_hi() - flow.strip_lo()) * k / 256.0, t);
      g_lo = std::min(g_lo, y);
      g_hi = std::max(g_hi, y);
    }
  const double clearance = std::min(g_lo, prm.ly - g_hi);

  CalibrationFields f;
  f.ell = 0.25 * std::min(clearance, 0.5 * prm.width);
  require_resolved(f.ell, grid);
  // xi_y fades out over vertical distance reach, B only within wb of the
  // top and bottom walls where xi_y already vanishes.
  const double wb = 0.125 * clearance;
  const double reach = clearance - wb;
  f.c = std::min(0.1, 0.5 * cb);
  // The fade costs 6 / reach^2 in the divergence bound.
  f.C = 10.0 * (1.0 + a * a) + 8.0 / (reach * reach);

  const double ell = f.ell, ly = prm.ly;
  auto wall_cutoff = [=](double y) { return smooth_step(y / wb) * smooth_step((ly - y) / wb); };
  auto fade = [=](double dv) {
    const double z = dv / reach;
    if (z * z >= 1.0) return 0.0;
    const double w = 1.0 - z * z;
    return w * w * w;
  };
  auto height = [flow](double x, double t) { return flow.height(x, t); };

  f.xi = [=](const Vec2& p, double t) {
    const double sn = std::sin(a * (p.x - xc));
    const double dv = p.y - height(p.x, t);
    const double len = 1.0 - cb * soft_square(dv);
    return Vec2{-sn, std::sqrt(len * len - sn * sn) * fade(dv)} * s;
  };
  f.velocity = [=](const Vec2& p, double) { return Vec2{0.0, a * wall_cutoff(p.y)}; };
  f.weight = [=](const Vec2& p, double t) { return s * saturate(-(p.y - height(p.x, t)) / ell); };
  return f;
}

}  // namespace

CalibrationFields build_calibration(const ReferenceFlow& flow, const Grid& grid) {
  if (!near(grid.lx(), flow.params().lx) || !near(grid.ly(), flow.params().ly))
    throw ConfigError("grid and reference flow live on different boxes");
  CalibrationFields f;
  switch (flow.kind()) {
    case FlowKind::stationary_chord: f = chord_calibration(flow, grid); break;
    case FlowKind::shrinking_half_disk: f = half_disk_calibration(flow, grid); break;
    case FlowKind::strip_translator: f = translator_calibration(flow, grid); break;
  }
  f.grid = grid;
  f.kind = flow.kind();
  return f;
}

namespace {

// Translator control: a tangential component k tau, tau = (cos theta, sin theta),
// on a bump that is flat along the graph's normal coordinate y - g. The bump is
// carried by the translation and tau . grad(y - g) = 0, so only the lateral
// profile enters the divergence.
CalibrationFields corrupt_translator(const CalibrationFields& fields, const ReferenceFlow& flow, double length) {
  const FlowParams& prm = flow.params();
  const double ell = fields.ell, a = flow.speed(), xc = prm.center_x;
  const double xm = 0.5 * (flow.strip_lo() + flow.strip_hi());
  const double rx = 0.45 * (flow.strip_hi() - flow.strip_lo());
  const double room_above = prm.ly - flow.height(xm, prm.horizon);
  const double room_below = flow.height(xm, 0.0);
  if (std::max(room_above, room_below) < 4.0 * ell)
    throw ConfigError("translator leaves no room for the negative-control bump");
  const double dc = (room_above >= room_below ? 1.5 : -1.5) * ell, rn = 0.75 * ell;

  const Vec2 centre{xm, flow.height(xm, 0.0) + dc};
  const Vec2 v0 = fields.xi(centre, 0.0);
  const double th0 = a * (xm - xc);
  const Vec2 tau0{std::cos(th0), std::sin(th0)};
  // |v0 + k tau0| = length.
  const double p = dot(v0, tau0);
  const double k = -p + std::sqrt(p * p + length * length - dot(v0, v0));

  CalibrationFields out = fields;
  auto xi = fields.xi;
  out.xi = [=](const Vec2& q, double t) {
    const double dv = q.y - flow.height(q.x, t);
    const double bump = (1.0 - smooth_step(std::abs(q.x - xm) / rx)) * (1.0 - smooth_step(std::abs(dv - dc) / rn));
    const double th = a * (q.x - xc);
    return xi(q, t) + Vec2{std::cos(th), std::sin(th)} * (k * bump);
  };
  return out;
}

}  // namespace

CalibrationFields corrupt_length(const CalibrationFields& fields, const ReferenceFlow& flow, double length) {
  const FlowParams& prm = flow.params();
  const double ell = fields.ell;
  // The bump is a function of the Lagrangian label of B's flow map, so it is
  // transported exactly and only the length of xi changes.
  std::function<Vec2(const Vec2&, double)> label;
  Vec2 centre;
  const double rho = ell;
  switch (flow.kind()) {
    case FlowKind::stationary_chord:
      centre = {0.5 * prm.lx + 2.0 * ell * (flow.swapped() ? -1.0 : 1.0), 0.5 * prm.ly};
      label = [](const Vec2& p, double) { return p; };
      break;
    case FlowKind::shrinking_half_disk: {
      // Outside the disk on the diagonal, where B = -e/R exactly.
      const Vec2 c{0.5 * prm.lx, 0.0};
      const Vec2 e{std::sqrt(0.5), std::sqrt(0.5)};
      centre = c + e * (prm.r0 + 2.0 * ell);
      // Keep the bump clear of the wall cutoff band of width 2 ell.
      const double margin = 2.0 * ell + rho;
      if (centre.y + margin > prm.ly || centre.x + margin > prm.lx)
        throw ConfigError("half-disk box leaves no room for the negative-control bump");
      // Radial characteristics keep r - R(t) fixed.
      label = [c, r0 = prm.r0, flow](const Vec2& p, double t) {
        const Vec2 v = p - c;
        const double r = norm(v);
        if (r < 1e-12) return c;
        return c + v * ((r + r0 - flow.radius(t)) / r);
      };
      break;
    }
    case FlowKind::strip_translator:
      return corrupt_translator(fields, flow, length);
  }
  if (!(norm(fields.xi(centre, 0.0)) > 0.0)) throw ConfigError("negative-control bump sits where xi vanishes");

  // |xi| is blended towards `length`, reaching it at the bump centre.
  CalibrationFields out = fields;
  auto xi = fields.xi;
  out.xi = [=](const Vec2& p, double t) {
    const Vec2 v = xi(p, t);
    const double z = norm(label(p, t) - centre) / rho;
    const double bump = 1.0 - smooth_step(z);
    if (bump == 0.0) return v;
    const double n = norm(v);
    return v * (1.0 + bump * (length / n - 1.0));
  };
  return out;
}

// ---------------------------------------------------------------------------
// Verification

bool CalibrationReport::pass() const {
  return std::all_of(conditions.begin(), conditions.end(), [](const auto& c) { return c.pass; });
}

std::vector<std::string> CalibrationReport::failed() const {
  std::vector<std::string> out;
  for (const auto& c : conditions)
    if (!c.pass) out.push_back(c.name);
  return out;
}

const ConditionResult* CalibrationReport::find(std::string_view name) const {
  for (const auto& c : conditions)
    if (c.name == name) return &c;
  return nullptr;
}

namespace {

template <class F>
auto d4(const F& f, double h) {
  return (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) * (1.0 / (12.0 * h));
}

struct Tracker {
  ConditionResult r;
  Tracker(std::string name, double constant) {
    r.name = std::move(name);
    r.constant_used = constant;
  }
  void add(double ratio, const Vec2& p, double t) {
    if (!(ratio <= r.worst_ratio) || std::isnan(ratio)) {
      if (std::isnan(ratio)) ratio = std::numeric_limits<double>::infinity();
      r.worst_ratio = ratio;
      r.location = p;
      r.time = t;
    }
  }
};

double ratio(double lhs, double bound) {
  if (lhs == 0.0) return 0.0;
  return bound > 0.0 ? lhs / bound : std::numeric_limits<double>::infinity();
}

}  // namespace

CalibrationReport verify_calibration(const CalibrationFields& f, const ReferenceFlow& flow,
                                     const VerifyOptions& opt) {
  const Grid& g = f.grid;
  const double T = flow.horizon();
  std::vector<double> times = opt.times;
  if (times.empty()) times = T > 0.0 ? std::vector<double>{0.0, 0.5 * T, T} : std::vector<double>{0.0};
  const double k = opt.fd_step * std::min(g.lx(), g.ly());
  const double kt = opt.fd_step * (T > 0.0 ? T : 1.0);
  const double floor = opt.fd_floor;
  const double tol = opt.exact_tolerance;
  const Walls walls = flow.walls();

  Tracker bxi("boundary_xi", tol), bb("boundary_B", tol);
  Tracker sext("weight_sign_exterior", 0.0), sint("weight_sign_interior", 0.0),
      szero("weight_zero_on_interface", tol);
  Tracker xnu("xi_equals_normal", tol), len("xi_length", f.c), wco("weight_coercivity", f.C);
  Tracker xtr("xi_transport", f.C), ltr("xi_length_transport", f.C), wtr("weight_transport", f.C),
      mot("motion_compatibility", f.C);

  for (double t : times) {
    for (const auto& face : boundary_faces(g)) {
      const Vec2 n = inward_normal(face.wall);
      bxi.add(std::abs(dot(f.xi(face.midpoint, t), n) - walls[face.wall].cos_alpha()) / tol, face.midpoint, t);
      bb.add(std::abs(dot(f.velocity(face.midpoint, t), n)) / tol, face.midpoint, t);
    }
    for (const auto& q : flow.interface(t, opt.interface_samples)) {
      szero.add(std::abs(f.weight(q.point, t)) / tol, q.point, t);
      xnu.add(norm(f.xi(q.point, t) - q.normal) / tol, q.point, t);
    }

    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const Vec2 p = g.center(i, j);
        const double sd = flow.signed_distance(p, t);
        const double d = std::abs(sd);
        const double d1 = std::min(1.0, d), d2 = std::min(1.0, d * d);
        const Vec2 X = f.xi(p, t), B = f.velocity(p, t);
        const double th = f.weight(p, t);

        const Vec2 ex{k, 0.0}, ey{0.0, k};
        const Vec2 xi_x = d4([&](double s) { return f.xi(p + ex * (s / k), t); }, k);
        const Vec2 xi_y = d4([&](double s) { return f.xi(p + ey * (s / k), t); }, k);
        const Vec2 xi_t = d4([&](double s) { return f.xi(p, t + s); }, kt);
        const Vec2 b_x = d4([&](double s) { return f.velocity(p + ex * (s / k), t); }, k);
        const Vec2 b_y = d4([&](double s) { return f.velocity(p + ey * (s / k), t); }, k);
        const double th_x = d4([&](double s) { return f.weight(p + ex * (s / k), t); }, k);
        const double th_y = d4([&](double s) { return f.weight(p + ey * (s / k), t); }, k);
        const double th_t = d4([&](double s) { return f.weight(p, t + s); }, kt);

        if (d > 0.0) {
          if (sd < 0.0) sext.add(th > 0.0 ? 0.0 : 1.0 + std::abs(th), p, t);
          else sint.add(th < 0.0 ? 0.0 : 1.0 + std::abs(th), p, t);
        }
        len.add(norm(X) / (1.0 - f.c * d2), p, t);
        wco.add(ratio(std::min({g.wall_distance(p), d, 1.0}), f.C * std::abs(th)), p, t);

        const Vec2 material = xi_t + xi_x * B.x + xi_y * B.y;
        // (grad B)^T xi: component i is sum_j d_i B_j xi_j.
        const Vec2 stretch{dot(b_x, X), dot(b_y, X)};
        xtr.add(norm(material + stretch) / (f.C * d1 + floor), p, t);
        ltr.add(std::abs(dot(X, material)) / (f.C * d2 + floor), p, t);
        wtr.add(std::abs(th_t + B.x * th_x + B.y * th_y) / (f.C * std::abs(th) + floor), p, t);
        mot.add(std::abs(dot(B, X) + xi_x.x + xi_y.y) / (f.C * d1 + floor), p, t);
      }
  }

  CalibrationReport rep;
  for (Tracker* tr : {&bxi, &bb, &sext, &sint, &szero, &xnu, &len, &wco, &xtr, &ltr, &wtr, &mot}) {
    // Ratios of exactly-holding identities carry rounding; the length bound is
    // attained on the interface itself.
    tr->r.pass = tr->r.worst_ratio <= 1.0 + 1e-9;
    rep.conditions.push_back(tr->r);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Error functionals

double relative_entropy_sharp(const InterfaceCurve& curve, const CalibrationFields& fields,
                              const EnergyModel& model) {
  double sum = 0.0;
  for (const auto& ch : curve.chains) {
    const std::size_t n = ch.points.size();
    if (n < 2) continue;
    auto integrand = [&](std::size_t k) { return 1.0 - dot(ch.normals[k], fields.xi(ch.points[k], curve.t)); };
    const std::size_t segments = ch.closed ? n : n - 1;
    for (std::size_t k = 0; k < segments; ++k) {
      const std::size_t l = (k + 1) % n;
      sum += 0.5 * norm(ch.points[l] - ch.points[k]) * (integrand(k) + integrand(l));
    }
  }
  return model.c0() * sum;
}

double bulk_error(const std::function<bool(const Vec2&)>& in_a, const CalibrationFields& fields,
                  const ReferenceFlow& flow, double t) {
  const Grid& g = fields.grid;
  double sum = 0.0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const Vec2 p = g.center(i, j);
      if (in_a(p) != flow.inside(p, t)) sum += std::abs(fields.weight(p, t));
    }
  return sum * g.cell_area();
}

double bulk_error(const PhaseField& state, const CalibrationFields& fields, const ReferenceFlow& flow) {
  const Grid& g = fields.grid;
  if (state.u.size() != g.size()) throw ConfigError("phase field and calibration grids differ");
  auto in_a = [&](const Vec2& p) {
    const int i = std::clamp(static_cast<int>(p.x / g.h), 0, g.nx - 1);
    const int j = std::clamp(static_cast<int>(p.y / g.h), 0, g.ny - 1);
    return state.u[g.index(i, j)] > 0.0;
  };
  return bulk_error(in_a, fields, flow, state.t);
}

GronwallReport gronwall_check(const std::vector<StabilitySample>& series, double C, double slack) {
  if (!(C >= 0.0)) throw ConfigError("Gronwall constant must be non-negative");
  for (std::size_t k = 1; k < series.size(); ++k)
    if (!(series[k].t > series[k - 1].t)) throw ConfigError("Gronwall series needs strictly increasing times");

  GronwallReport rep;
  rep.constant_used = C;
  rep.slack = slack;
  rep.rel_entropy_ok = rep.bulk_ok = rep.uniqueness_ok = true;
  if (series.empty()) return rep;

  const double e0 = series.front().rel_entropy, b0 = series.front().bulk_error, t0 = series.front().t;
  rep.delta0 = std::max(e0, b0);
  double int_e = 0.0, int_s = 0.0, c_min = 0.0;
  auto within = [](double lhs, double rhs) { return lhs <= rhs + 1e-12 * std::max(1.0, std::abs(rhs)); };
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    if (k > 0) {
      const auto& prev = series[k - 1];
      const double dt = s.t - prev.t;
      int_e += 0.5 * dt * (s.rel_entropy + prev.rel_entropy);
      int_s += 0.5 * dt * (s.rel_entropy + s.bulk_error + prev.rel_entropy + prev.bulk_error);
    }
    const double rhs_e = e0 + C * int_e + slack;
    const double rhs_b = b0 + e0 + C * int_s + slack;
    rep.rhs_rel_entropy.push_back(rhs_e);
    rep.rhs_bulk.push_back(rhs_b);
    rep.rel_entropy_ok = rep.rel_entropy_ok && within(s.rel_entropy, rhs_e);
    rep.bulk_ok = rep.bulk_ok && within(s.bulk_error, rhs_b);

    const double need_e = s.rel_entropy - e0 - slack;
    const double need_b = s.bulk_error - b0 - e0 - slack;
    for (auto [need, integral] : {std::pair{need_e, int_e}, std::pair{need_b, int_s}}) {
      if (need <= 0.0) continue;
      c_min = std::max(c_min, integral > 0.0 ? need / integral : std::numeric_limits<double>::infinity());
    }

    const double tau = s.t - t0;
    rep.uniqueness_ok = rep.uniqueness_ok && within(s.rel_entropy, rep.delta0 * std::exp(C * tau) + slack) &&
                        within(s.bulk_error, 2.0 * rep.delta0 * std::exp(2.0 * C * tau) + slack);
  }
  rep.smallest_constant = c_min;
  return rep;
}

}  // namespace pfc
