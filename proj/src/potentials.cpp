#include "pfc/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pfc/types.hpp"

namespace pfc {

double DoubleWell::value(double s) {
  const double q = 1.0 - s * s;
  return 0.5 * q * q;
}

double DoubleWell::derivative(double s) { return -2.0 * s * (1.0 - s * s); }

double DoubleWell::sqrt_2w(double s) { return std::abs(1.0 - s * s); }

double eval_double_well(double s) { return DoubleWell::value(s); }

double psi_level(double s) {
  const double c = std::clamp(s, -1.0, 1.0);
  return c - c * c * c / 3.0;
}

double eval_psi(double s) {
  if (s <= -1.0) return 0.0;
  if (s >= 1.0) return kSurfaceTension;
  return psi_level(s) + 2.0 / 3.0;
}

double psi_inverse(double y) {
  if (y <= 0.0) return -1.0;
  if (y >= kSurfaceTension) return 1.0;
  double lo = -1.0, hi = 1.0;
  double s = (y / kSurfaceTension) * 2.0 - 1.0;
  for (int it = 0; it < 100; ++it) {
    const double f = eval_psi(s) - y;
    if (f > 0.0) {
      hi = s;
    } else {
      lo = s;
    }
    const double df = 1.0 - s * s;
    double next = df > 1e-14 ? s - f / df : 0.5 * (lo + hi);
    if (next <= lo || next >= hi) next = 0.5 * (lo + hi);
    if (std::abs(next - s) < 1e-16) return next;
    s = next;
  }
  return s;
}

BoundaryEnergy::BoundaryEnergy(double alpha) : alpha_(alpha) {
  if (!(alpha > 0.0 && alpha < std::numbers::pi)) {
    throw ConfigError("contact angle must lie in (0, pi)");
  }
  neumann_ = alpha == std::numbers::pi / 2.0;
  cos_ = neumann_ ? 0.0 : std::cos(alpha);
  magnitude_ = std::abs(cos_);
  swapped_ = alpha > std::numbers::pi / 2.0;
}

BoundaryEnergy BoundaryEnergy::phase_swapped() const {
  BoundaryEnergy out = *this;
  if (neumann_) return out;
  out.alpha_ = std::numbers::pi - alpha_;
  out.cos_ = -cos_;
  out.swapped_ = !swapped_;
  return out;
}

BoundaryEnergy BoundaryEnergy::neumann() { return BoundaryEnergy(std::numbers::pi / 2.0); }

double BoundaryEnergy::value(double s) const {
  if (neumann_) return 0.0;
  return magnitude_ * eval_psi(swapped_ ? -s : s);
}

double BoundaryEnergy::derivative(double s) const {
  if (neumann_ || s <= -1.0 || s >= 1.0) return 0.0;
  const double d = magnitude_ * (1.0 - s * s);
  return swapped_ ? -d : d;
}

double eval_boundary_energy(double s, double alpha) {
  if (!(alpha > 0.0 && alpha <= std::numbers::pi / 2.0)) {
    throw ConfigError("standard boundary energy requires alpha in (0, pi/2]");
  }
  return BoundaryEnergy(alpha).value(s);
}

std::vector<double> lipschitz_envelope(std::span<const double> y, std::span<const double> tau) {
  if (y.empty() || y.size() != tau.size()) throw ConfigError("envelope needs matching samples");
  const std::size_t n = y.size();
  std::vector<double> out(tau.begin(), tau.end());
  for (std::size_t i = 1; i < n; ++i) out[i] = std::min(out[i], out[i - 1] + (y[i] - y[i - 1]));
  for (std::size_t i = n - 1; i-- > 0;) out[i] = std::min(out[i], out[i + 1] + (y[i + 1] - y[i]));
  return out;
}

std::vector<double> lipschitz_envelope_bruteforce(std::span<const double> y,
                                                  std::span<const double> tau) {
  if (y.empty() || y.size() != tau.size()) throw ConfigError("envelope needs matching samples");
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    double best = tau[i];
    for (std::size_t j = 0; j < y.size(); ++j) best = std::min(best, tau[j] + std::abs(y[j] - y[i]));
    out[i] = best;
  }
  return out;
}

double young_angle(double jump, double c0) {
  if (!(c0 > 0.0)) throw ConfigError("surface tension must be positive");
  if (std::abs(jump) >= c0) throw ConfigError("non_wetting: |jump| >= c0");
  return std::acos(jump / c0);
}

double optimal_profile(double x, double eps) { return std::tanh(x / eps); }

double optimal_profile_derivative(double x, double eps) {
  const double t = std::tanh(x / eps);
  return (1.0 - t * t) / eps;
}

AssumptionReport validate_assumptions(const std::function<double(double)>& sigma,
                                      const std::function<double(double)>& dsigma, double alpha,
                                      int samples) {
  AssumptionReport r;
  const double ca = std::cos(alpha);
  r.lower_margin = std::numeric_limits<double>::infinity();
  double kappa_sup = std::numeric_limits<double>::infinity();
  for (int k = 0; k < samples; ++k) {
    const double s = -1.0 + 2.0 * k / (samples - 1);
    const double p = eval_psi(s);
    const double sg = sigma(s);
    r.lower_margin = std::min(r.lower_margin, sg - ca * p);
    if (p > 1e-12) kappa_sup = std::min(kappa_sup, 1.0 - sg / p);
  }
  for (double s : {-3.0, -2.0, -1.5, -1.0001, 1.0001, 1.5, 2.0, 3.0}) {
    r.support_violation = std::max(r.support_violation, std::abs(dsigma(s)));
  }
  r.compat_minus = std::abs(sigma(-1.0));
  r.compat_plus = std::abs(sigma(1.0) - kSurfaceTension * ca);
  const double kappa_max = 1.0 - ca;
  if (kappa_sup > 0.0 && kappa_max > 0.0) r.kappa_witness = 0.5 * std::min(kappa_sup, kappa_max);
  r.ok = r.lower_margin >= -1e-12 && r.kappa_witness.has_value() && r.compat_minus < 1e-12 &&
         r.compat_plus < 1e-12 && r.support_violation == 0.0;
  return r;
}

EnergyModel::EnergyModel(double alpha, int envelope_samples) : boundary_(alpha) {
  if (envelope_samples < 2) throw ConfigError("envelope needs at least two samples");
  const int n = envelope_samples;
  std::vector<double> y(n), tau(n);
  for (int i = 0; i < n; ++i) {
    y[i] = kSurfaceTension * i / (n - 1);
    tau[i] = boundary_.value(psi_inverse(y[i]));
  }
  const auto hat = lipschitz_envelope(y, tau);
  for (int i = 0; i < n; ++i) envelope_gap_ = std::max(envelope_gap_, tau[i] - hat[i]);
  sigma_hat_minus_ = hat.front();
  sigma_hat_plus_ = hat.back();
  signed_jump_ = sigma_hat_plus_ - sigma_hat_minus_;
  young_angle_ = pfc::young_angle(signed_jump_, kSurfaceTension);
}

}  // namespace pfc
