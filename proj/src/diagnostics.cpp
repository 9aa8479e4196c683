#include "pfc/diagnostics.hpp"

#include <algorithm>
#include <cmath>

namespace pfc {

namespace {

struct CellGradients {
  std::vector<Vec2> g;   // centred, mirrored at walls
  std::vector<double> q;  // half the sum of squared face slopes; q >= |g|^2
};

CellGradients cell_gradients(const Grid& grid, const ScalarField& u) {
  const int nx = grid.nx, ny = grid.ny;
  const double h = grid.h;
  CellGradients out{std::vector<Vec2>(grid.size()), std::vector<double>(grid.size())};
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const std::size_t c = grid.index(i, j);
      const double w = i > 0 ? (u[c] - u[c - 1]) / h : 0.0;
      const double e = i + 1 < nx ? (u[c + 1] - u[c]) / h : 0.0;
      const double s = j > 0 ? (u[c] - u[c - nx]) / h : 0.0;
      const double n = j + 1 < ny ? (u[c + nx] - u[c]) / h : 0.0;
      out.g[c] = {0.5 * (w + e), 0.5 * (s + n)};
      out.q[c] = 0.5 * (w * w + e * e + s * s + n * n);
    }
  }
  return out;
}

double weighted_wall_energy(const Grid& grid, const PhaseField& st, const Walls& walls,
                            const std::function<double(const Vec2&)>& eta,
                            const std::function<double(const WallSpec&, double)>& density) {
  double acc = 0.0;
  for (const auto& f : boundary_faces(grid)) {
    const WallSpec& w = walls[f.wall];
    if (!w.contact) continue;
    acc += grid.h * eta(f.midpoint) * density(w, st.u[grid.index(f.i, f.j)]);
  }
  return acc;
}

}  // namespace

TestFieldPair TestFieldPair::unit_weight(std::function<Vec2(const Vec2&)> xi) {
  return {[](const Vec2&) { return 1.0; }, std::move(xi)};
}

PairCheck check_pair(const Grid& grid, const Walls& walls, const TestFieldPair& pair) {
  PairCheck r;
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) r.max_length = std::max(r.max_length, norm(pair.xi(grid.center(i, j))));
  for (const auto& f : boundary_faces(grid)) {
    const Vec2 xi = pair.xi(f.midpoint);
    r.max_length = std::max(r.max_length, norm(xi));
    const double target = walls[f.wall].contact ? walls[f.wall].cos_alpha() : 0.0;
    r.max_boundary_error = std::max(r.max_boundary_error, std::abs(dot(xi, inward_normal(f.wall)) - target));
  }
  r.ok = r.max_length <= 1.0 + 1e-12 && r.max_boundary_error <= 1e-10;
  return r;
}

std::vector<Vec2> centered_gradient(const Grid& grid, const ScalarField& u) {
  return cell_gradients(grid, u).g;
}

std::vector<Vec2> phase_field_normal(const Grid& grid, const ScalarField& u, Vec2 fallback) {
  auto g = centered_gradient(grid, u);
  for (auto& v : g) {
    const double m = norm(v);
    v = m > 1e-14 ? v / m : fallback;
  }
  return g;
}

double localized_energy(const Grid& grid, const PhaseField& st, const Walls& walls,
                        const std::function<double(const Vec2&)>& eta) {
  const auto cg = cell_gradients(grid, st.u);
  const double a = grid.cell_area();
  double bulk = 0.0;
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      const std::size_t c = grid.index(i, j);
      bulk += a * eta(grid.center(i, j)) * (0.5 * st.eps * cg.q[c] + DoubleWell::value(st.u[c]) / st.eps);
    }
  return bulk + weighted_wall_energy(grid, st, walls, eta,
                                     [](const WallSpec& w, double s) { return w.energy.value(s); });
}

double relative_entropy_primal(const Grid& grid, const PhaseField& st, const Walls& walls,
                               const TestFieldPair& pair) {
  const double h = grid.h;
  double transport = 0.0;
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      const double pc = eval_psi(st.u[grid.index(i, j)]);
      if (i + 1 < grid.nx) {
        const Vec2 m{(i + 1.0) * h, (j + 0.5) * h};
        transport += h * pair.eta(m) * pair.xi(m).x * (eval_psi(st.u[grid.index(i + 1, j)]) - pc);
      }
      if (j + 1 < grid.ny) {
        const Vec2 m{(i + 0.5) * h, (j + 1.0) * h};
        transport += h * pair.eta(m) * pair.xi(m).y * (eval_psi(st.u[grid.index(i, j + 1)]) - pc);
      }
    }
  }
  const double wall = weighted_wall_energy(
      grid, st, walls, pair.eta, [](const WallSpec& w, double s) { return w.cos_alpha() * eval_psi(s); });
  return localized_energy(grid, st, walls, pair.eta) - transport - wall;
}

double relative_entropy_phasefield(const Grid& grid, const PhaseField& st, const Walls& walls,
                                   const TestFieldPair& pair) {
  const double h = grid.h;
  auto flux = [&](const Vec2& m) { return pair.xi(m) * pair.eta(m); };
  double acc = 0.0;
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      const Vec2 c = grid.center(i, j);
      // Outward fluxes through the four faces, times the face length h.
      const double div_h = flux({c.x + 0.5 * h, c.y}).x - flux({c.x - 0.5 * h, c.y}).x +
                           flux({c.x, c.y + 0.5 * h}).y - flux({c.x, c.y - 0.5 * h}).y;
      acc += h * eval_psi(st.u[grid.index(i, j)]) * div_h;
    }
  }
  return localized_energy(grid, st, walls, pair.eta) + acc;
}

DefectReport defects(const Grid& grid, const PhaseField& st, const Walls& walls, const TestFieldPair& pair) {
  for (double x : st.u)
    if (std::abs(x) > 1.0 + 1e-8) throw RuntimeFailure("defects require |u| <= 1");
  const auto cg = cell_gradients(grid, st.u);
  const double a = grid.cell_area(), eps = st.eps;
  DefectReport r;
  r.psi.resize(grid.size());
  r.normal.resize(grid.size());
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      const std::size_t c = grid.index(i, j);
      const Vec2 x = grid.center(i, j);
      const double u = st.u[c], eta = pair.eta(x);
      const Vec2 xi = pair.xi(x);
      const double gn = norm(cg.g[c]);
      const Vec2 nu = gn > 1e-14 ? cg.g[c] / gn : Vec2{1.0, 0.0};
      const double grad_psi = DoubleWell::sqrt_2w(u) * gn;
      r.psi[c] = eval_psi(u);
      r.normal[c] = nu;
      r.equipartition += a * eta * (0.5 * eps * cg.q[c] + DoubleWell::value(u) / eps - grad_psi);
      r.tilt += a * eta * (1.0 - dot(xi, nu)) * grad_psi;
      const Vec2 d = nu - xi;
      r.tilt_excess += a * eta * 0.5 * dot(d, d) * grad_psi;
    }
  }
  r.boundary = weighted_wall_energy(grid, st, walls, pair.eta, [](const WallSpec& w, double s) {
    return w.energy.value(s) - w.cos_alpha() * eval_psi(s);
  });
  return r;
}

}  // namespace pfc
