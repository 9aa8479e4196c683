#include "pfc/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <memory>
#include <mutex>
#include <sstream>

#include <fftw3.h>

namespace pfc {

std::string_view scheme_name(Scheme s) {
  switch (s) {
    case Scheme::convex_splitting: return "convex_splitting";
    case Scheme::stabilized_semi_implicit: return "stabilized_semi_implicit";
    case Scheme::discrete_gradient: return "discrete_gradient";
  }
  return "?";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "convex_splitting") return Scheme::convex_splitting;
  if (name == "stabilized_semi_implicit" || name == "stabilized") return Scheme::stabilized_semi_implicit;
  if (name == "discrete_gradient") return Scheme::discrete_gradient;
  throw ConfigError("unknown scheme '" + std::string(name) + "'");
}

double stability_cap(Scheme scheme, double eps) {
  if (scheme == Scheme::convex_splitting) return std::numeric_limits<double>::infinity();
  return 0.5 * eps * eps;
}

namespace {

struct FaceRef {
  std::size_t cell;
  const WallSpec* wall;
};

std::vector<FaceRef> contact_faces(const Grid& g, const Walls& walls) {
  std::vector<FaceRef> out;
  for (const auto& f : boundary_faces(g)) {
    const WallSpec& w = walls[f.wall];
    if (w.contact) out.push_back({g.index(f.i, f.j), &w});
  }
  return out;
}

// out_c = sum over interior neighbours n of (x_c - x_n).
void graph_laplacian(const Grid& g, const double* x, double* out) {
  const int nx = g.nx, ny = g.ny;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const std::size_t c = g.index(i, j);
      const double xc = x[c];
      double s = 0.0;
      if (i > 0) s += xc - x[c - 1];
      if (i + 1 < nx) s += xc - x[c + 1];
      if (j > 0) s += xc - x[c - nx];
      if (j + 1 < ny) s += xc - x[c + nx];
      out[c] = s;
    }
  }
}

// Bulk split term and its derivative in the new value v.
struct Split {
  double value;
  double dv;
};

Split bulk_split(Scheme s, double v, double u, double stab) {
  switch (s) {
    case Scheme::convex_splitting:
      return {2.0 * v * v * v - 2.0 * u, 6.0 * v * v};
    case Scheme::stabilized_semi_implicit:
      return {DoubleWell::derivative(u) + stab * (v - u), stab};
    case Scheme::discrete_gradient: {
      const double cubic = v * v * v + v * v * u + v * u * u + u * u * u;
      return {-(u + v) + 0.5 * cubic, -1.0 + 0.5 * (3.0 * v * v + 2.0 * v * u + u * u)};
    }
  }
  return {0.0, 0.0};
}

Split boundary_split(Scheme s, double v, double u, const BoundaryEnergy& e) {
  if (s != Scheme::discrete_gradient) {
    const double sb = e.curvature_bound();
    return {e.derivative(u) + sb * (v - u), sb};
  }
  const double d = v - u;
  const double ca = e.cos_alpha();
  if (std::abs(u) <= 1.0 && std::abs(v) <= 1.0)
    return {ca * (1.0 - (v * v + v * u + u * u) / 3.0), -ca * (2.0 * v + u) / 3.0};
  // sigma is constant outside [-1, 1], so the quotient factors through the clamped values.
  const double a = std::clamp(v, -1.0, 1.0), b = std::clamp(u, -1.0, 1.0);
  const double ratio = d == 0.0 ? (std::abs(u) < 1.0 ? 1.0 : 0.0) : (a - b) / d;
  const double q = ca * ratio * (1.0 - (a * a + a * b + b * b) / 3.0);
  const double m = 0.5 * (u + v);
  const double dq = std::abs(d) < 1e-6 ? (std::abs(m) < 1.0 ? -ca * m : 0.0)
                                       : (e.derivative(v) - q) / d;
  return {q, dq};
}

double dot_seq(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

// Exact inverse of (c I + k L) through the cosine transform that diagonalises
// the Neumann graph Laplacian on the cell-centred grid.
class NeumannDct {
 public:
  NeumannDct(int nx, int ny) : nx_(nx), ny_(ny), buf_(static_cast<std::size_t>(nx) * ny) {
    fwd_ = fftw_plan_r2r_2d(ny, nx, buf_.data(), buf_.data(), FFTW_REDFT10, FFTW_REDFT10, FFTW_ESTIMATE);
    bwd_ = fftw_plan_r2r_2d(ny, nx, buf_.data(), buf_.data(), FFTW_REDFT01, FFTW_REDFT01, FFTW_ESTIMATE);
    eig_.resize(buf_.size());
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        eig_[static_cast<std::size_t>(j) * nx + i] =
            (2.0 - 2.0 * std::cos(std::numbers::pi * i / nx)) + (2.0 - 2.0 * std::cos(std::numbers::pi * j / ny));
  }
  NeumannDct(const NeumannDct&) = delete;
  NeumannDct& operator=(const NeumannDct&) = delete;
  ~NeumannDct() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
  }

  void solve(double c, double k, const std::vector<double>& in, std::vector<double>& out) const {
    const std::size_t n = in.size();
    out = in;
    fftw_execute_r2r(fwd_, out.data(), out.data());
    const double scale = 1.0 / (4.0 * nx_ * ny_);
    for (std::size_t m = 0; m < n; ++m) out[m] *= scale / (c + k * eig_[m]);
    fftw_execute_r2r(bwd_, out.data(), out.data());
  }

 private:
  int nx_, ny_;
  std::vector<double> buf_;  // planning buffer only; execution uses caller arrays
  std::vector<double> eig_;
  fftw_plan fwd_{}, bwd_{};
};

const NeumannDct& dct_for(const Grid& g) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::unique_ptr<NeumannDct>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{g.nx, g.ny}];
  if (!slot) slot = std::make_unique<NeumannDct>(g.nx, g.ny);
  return *slot;
}

// Solves (diag + k L) x = b by CG, preconditioned with the constant-coefficient
// operator (c I + k L), c the geometric mean of the diagonal range.
int pcg(const Grid& g, const std::vector<double>& diag, double k, const std::vector<double>& b,
        std::vector<double>& x, double rel_tol, int max_iter) {
  const std::size_t n = b.size();
  const auto [dmin, dmax] = std::minmax_element(diag.begin(), diag.end());
  const double c = std::sqrt(*dmin * *dmax);
  const NeumannDct& dct = dct_for(g);
  std::vector<double> r = b, z(n), p(n), ap(n);
  std::fill(x.begin(), x.end(), 0.0);
  const double bnorm = std::sqrt(dot_seq(b, b));
  if (bnorm == 0.0) return 0;
  dct.solve(c, k, r, z);
  p = z;
  double rz = dot_seq(r, z);
  for (int it = 1; it <= max_iter; ++it) {
    graph_laplacian(g, p.data(), ap.data());
    for (std::size_t m = 0; m < n; ++m) ap[m] = diag[m] * p[m] + k * ap[m];
    const double pap = dot_seq(p, ap);
    if (!(pap > 0.0)) throw RuntimeFailure("linear solver: operator not positive definite");
    const double alpha = rz / pap;
    for (std::size_t m = 0; m < n; ++m) {
      x[m] += alpha * p[m];
      r[m] -= alpha * ap[m];
    }
    if (std::sqrt(dot_seq(r, r)) <= rel_tol * bnorm) return it;
    dct.solve(c, k, r, z);
    const double rz_new = dot_seq(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t m = 0; m < n; ++m) p[m] = z[m] + beta * p[m];
  }
  throw RuntimeFailure("linear solver did not reach tolerance");
}

}  // namespace

EnergyParts discrete_energy_parts(const Grid& g, const PhaseField& st, const Walls& walls) {
  EnergyParts e;
  const double eps = st.eps;
  const auto& u = st.u;
  double grad = 0.0, pot = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const std::size_t c = g.index(i, j);
      if (i + 1 < g.nx) grad += (u[c + 1] - u[c]) * (u[c + 1] - u[c]);
      if (j + 1 < g.ny) grad += (u[c + g.nx] - u[c]) * (u[c + g.nx] - u[c]);
      pot += DoubleWell::value(u[c]);
    }
  }
  e.gradient = 0.5 * eps * grad;
  e.potential = g.cell_area() * pot / eps;
  double b = 0.0;
  for (const auto& f : contact_faces(g, walls)) b += f.wall->energy.value(u[f.cell]);
  e.boundary = g.h * b;
  return e;
}

double discrete_energy(const Grid& g, const PhaseField& st, const Walls& walls) {
  return discrete_energy_parts(g, st, walls).total();
}

PhaseField step(const Grid& g, const PhaseField& st, const SolverConfig& cfg, const Walls& walls,
                StepStats* stats) {
  const double eps = st.eps, tau = cfg.tau, h = g.h;
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (tau > stability_cap(cfg.scheme, eps) * (1.0 + 1e-12))
    throw ConfigError("tau exceeds the stability cap of " + std::string(scheme_name(cfg.scheme)));
  if (cfg.scheme == Scheme::stabilized_semi_implicit && cfg.stabilization < 2.0)
    throw ConfigError("stabilization must be at least 2");

  const std::size_t n = g.size();
  const auto& u = st.u;
  const bool linear = cfg.scheme == Scheme::stabilized_semi_implicit;
  const double theta = cfg.scheme == Scheme::discrete_gradient ? 0.5 : 1.0;
  const double k = theta * tau / (h * h);
  const double kr = tau / (eps * eps);
  const double kb = tau / (eps * h);
  const auto faces = contact_faces(g, walls);

  std::vector<double> v = u, res(n), diag(n), lap(n), arg(n), delta(n);
  // Fills res = -G(v) and the Jacobian diagonal for the given splitting; returns max |G|.
  auto assemble = [&](Scheme scheme, double stab) {
    for (std::size_t c = 0; c < n; ++c) arg[c] = theta * v[c] + (1.0 - theta) * u[c];
    graph_laplacian(g, arg.data(), lap.data());
    for (std::size_t c = 0; c < n; ++c) {
      const Split b = bulk_split(scheme, v[c], u[c], stab);
      res[c] = v[c] - u[c] + (tau / (h * h)) * lap[c] + kr * b.value;
      diag[c] = 1.0 + kr * b.dv;
    }
    for (const auto& f : faces) {
      const Split b = boundary_split(scheme, v[f.cell], u[f.cell], f.wall->energy);
      res[f.cell] += kb * b.value;
      diag[f.cell] += kb * b.dv;
    }
    double rmax = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      rmax = std::max(rmax, std::abs(res[c]));
      diag[c] = std::max(diag[c], 0.05);
      res[c] = -res[c];
    }
    if (!std::isfinite(rmax)) throw RuntimeFailure("non-finite residual in time step");
    return rmax;
  };
  auto update = [&] {
    double dmax = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      v[c] += delta[c];
      dmax = std::max(dmax, std::abs(delta[c]));
    }
    return dmax;
  };

  StepStats local;
  if (linear) {
    assemble(cfg.scheme, cfg.stabilization);
    local.cg_iterations = pcg(g, diag, k, res, delta, cfg.linear_tolerance, cfg.max_cg);
    local.newton_iterations = 1;
    update();
  } else {
    // Predictor: one linear stabilised solve, first-order close to the nonlinear root.
    assemble(Scheme::stabilized_semi_implicit, 2.0);
    local.cg_iterations += pcg(g, diag, k, res, delta, 1e-3, cfg.max_cg);
    update();
    for (int it = 0;; ++it) {
      const double rmax = assemble(cfg.scheme, cfg.stabilization);
      if (rmax <= cfg.newton_tolerance) break;
      if (it == cfg.max_newton) throw RuntimeFailure("Newton iteration did not converge");
      // Inexact Newton: early linearisations only need a few digits.
      const double forcing = std::clamp(1e-2 * rmax, cfg.linear_tolerance, 1e-3);
      local.cg_iterations += pcg(g, diag, k, res, delta, forcing, cfg.max_cg);
      local.newton_iterations = it + 1;
      if (update() <= 1e-15) break;
    }
  }
  if (stats) *stats = local;
  return {std::move(v), eps, st.t + tau};
}

Trajectory run(const Grid& g, const PhaseField& initial, const SolverConfig& cfg, const Walls& walls,
               const StepObserver& observer) {
  if (initial.u.size() != g.size()) throw ConfigError("initial field does not match the grid");
  if (!(cfg.t_end >= 0.0)) throw ConfigError("t_end must be non-negative");
  const long steps = std::lround(cfg.t_end / cfg.tau);
  int stride = cfg.snapshot_stride;
  if (stride <= 0) stride = static_cast<int>(std::max<long>(1, (steps + 199) / 200));

  Trajectory tr{g, walls, cfg, initial.eps, {}, {}};
  auto record = [&](const PhaseField& s, int n, double diss) {
    const EnergyParts e = discrete_energy_parts(g, s, walls);
    double m = 0.0;
    for (double x : s.u) m = std::max(m, std::abs(x));
    tr.ledger.push_back({n, s.t, e.total(), e.bulk(), e.boundary, diss, m});
    if (observer) observer(s, tr.ledger.back());
  };

  PhaseField cur = initial;
  tr.snapshots.push_back(cur);
  record(cur, 0, 0.0);
  const double area = g.cell_area();
  for (long n = 1; n <= steps; ++n) {
    PhaseField next = step(g, cur, cfg, walls);
    double diss = 0.0;
    for (std::size_t c = 0; c < g.size(); ++c) {
      const double d = next.u[c] - cur.u[c];
      diss += d * d;
    }
    diss *= area * initial.eps / cfg.tau;
    next.t = initial.t + n * cfg.tau;
    cur = std::move(next);
    record(cur, static_cast<int>(n), diss);
    if (n % stride == 0 || n == steps) tr.snapshots.push_back(cur);
  }
  return tr;
}

double weak_form_residual(const Trajectory& tr, const SpaceTimeTest& zeta) {
  const Grid& g = tr.grid;
  const double h = g.h, eps = tr.eps, area = g.cell_area();
  const auto faces = contact_faces(g, tr.walls);
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < tr.snapshots.size(); ++k) {
    const auto& a = tr.snapshots[k];
    const auto& b = tr.snapshots[k + 1];
    const double dt = b.t - a.t;
    if (dt <= 0.0) continue;
    const double tm = 0.5 * (a.t + b.t);
    double acc = 0.0;
    for (int j = 0; j < g.ny; ++j) {
      for (int i = 0; i < g.nx; ++i) {
        const std::size_t c = g.index(i, j);
        const Vec2 x = g.center(i, j);
        const double z = zeta.value(x, tm);
        const double react = 0.5 * (DoubleWell::derivative(a.u[c]) + DoubleWell::derivative(b.u[c]));
        acc += area * z * ((b.u[c] - a.u[c]) + dt * react / (eps * eps));
        if (i + 1 < g.nx) {
          const Vec2 m{(i + 1.0) * h, (j + 0.5) * h};
          const double du = 0.5 * ((a.u[c + 1] - a.u[c]) + (b.u[c + 1] - b.u[c]));
          acc += dt * h * zeta.gradient(m, tm).x * du;
        }
        if (j + 1 < g.ny) {
          const Vec2 m{(i + 0.5) * h, (j + 1.0) * h};
          const double du = 0.5 * ((a.u[c + g.nx] - a.u[c]) + (b.u[c + g.nx] - b.u[c]));
          acc += dt * h * zeta.gradient(m, tm).y * du;
        }
      }
    }
    for (const auto& f : faces) {
      const int i = static_cast<int>(f.cell % g.nx), j = static_cast<int>(f.cell / g.nx);
      const double z = zeta.value(g.center(i, j), tm);
      const auto& e = f.wall->energy;
      const double ds = 0.5 * (e.derivative(a.u[f.cell]) + e.derivative(b.u[f.cell]));
      acc += dt * h * z * ds / eps;
    }
    total += acc;
  }
  return std::abs(total);
}

PhaseField well_prepared(const Grid& g, double eps,
                         const std::function<double(const Vec2&)>& signed_distance) {
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
  PhaseField st{ScalarField(g.size()), eps, 0.0};
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      st.u[g.index(i, j)] = std::clamp(std::tanh(signed_distance(g.center(i, j)) / eps), -1.0, 1.0);
  return st;
}

void write_checkpoint(const std::string& path, const Grid& g, const PhaseField& st) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw RuntimeFailure("cannot write checkpoint " + path);
    out.precision(17);
    out << "# pfc checkpoint, schema_version 1\n";
    out << g.nx << ' ' << g.ny << ' ' << g.h << ' ' << st.eps << ' ' << st.t << '\n';
    for (int j = 0; j < g.ny; ++j) {
      for (int i = 0; i < g.nx; ++i) out << (i ? " " : "") << st.u[g.index(i, j)];
      out << '\n';
    }
    if (!out) throw RuntimeFailure("short write on checkpoint " + path);
  }
  std::filesystem::rename(tmp, path);
}

PhaseField read_checkpoint(const std::string& path, Grid* grid_out) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint " + path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("# pfc checkpoint", 0) != 0) throw ConfigError("not a checkpoint: " + path);
  Grid g;
  PhaseField st;
  if (!(in >> g.nx >> g.ny >> g.h >> st.eps >> st.t) || g.nx <= 0 || g.ny <= 0 || g.h <= 0)
    throw ConfigError("bad checkpoint header in " + path);
  st.u.resize(g.size());
  for (double& x : st.u)
    if (!(in >> x)) throw ConfigError("truncated checkpoint " + path);
  if (grid_out) *grid_out = g;
  return st;
}

}  // namespace pfc
