#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace pfc {

/// Standard double-well W(s) = (1 - s^2)^2 / 2 with wells at -1 and +1.
struct DoubleWell {
  static double value(double s);
  static double derivative(double s);
  /// sqrt(2 W(s)) = |1 - s^2|.
  static double sqrt_2w(double s);
};

double eval_double_well(double s);

/// Antiderivative of sqrt(2W) from -1, extended by constants outside [-1, 1].
double eval_psi(double s);

/// psi(s) - c0/2 evaluated without cancellation; odd in s.
double psi_level(double s);

/// Inverse of psi on [0, c0] (Newton with bisection safeguard).
double psi_inverse(double y);

/// Interfacial tension c0 = psi(1) = 4/3.
inline constexpr double kSurfaceTension = 4.0 / 3.0;

/// Boundary energy density of the standard cubic family.
///
/// For alpha <= pi/2 this is sigma(s) = cos(alpha) psi(s). For alpha > pi/2 the
/// phases are swapped, sigma(s) = |cos(alpha)| psi(-s), so that the wall energy
/// sits on the -1 phase and Young's law reads c0 cos(alpha) = sigma(1) - sigma(-1)
/// in the caller's convention. alpha = pi/2 is the Neumann case sigma = 0.
class BoundaryEnergy {
 public:
  explicit BoundaryEnergy(double alpha);
  static BoundaryEnergy neumann();
  /// Energy for pi - alpha with the same magnitude bit for bit.
  BoundaryEnergy phase_swapped() const;

  double alpha() const { return alpha_; }
  double cos_alpha() const { return cos_; }
  bool swapped() const { return swapped_; }
  bool is_neumann() const { return neumann_; }

  double value(double s) const;
  double derivative(double s) const;
  /// Upper bound of |sigma''| over the real line.
  double curvature_bound() const { return 2.0 * magnitude_; }

 private:
  double alpha_;
  double cos_;
  double magnitude_;
  bool swapped_;
  bool neumann_;
};

/// Cubic sigma = cos(alpha) psi for alpha in (0, pi/2]; throws ConfigError otherwise.
double eval_boundary_energy(double s, double alpha);

/// Lower 1-Lipschitz envelope of samples (y_i, tau_i) with y sorted ascending:
/// out_i = min_j tau_j + |y_j - y_i|. Linear two-pass sweep.
std::vector<double> lipschitz_envelope(std::span<const double> y, std::span<const double> tau);

/// Same envelope by O(n^2) direct minimisation.
std::vector<double> lipschitz_envelope_bruteforce(std::span<const double> y,
                                                  std::span<const double> tau);

/// arccos(jump / c0); rejects |jump| >= c0 (non-wetting).
double young_angle(double jump, double c0);

/// Standing 1D profile tanh(x / eps).
double optimal_profile(double x, double eps);
double optimal_profile_derivative(double x, double eps);

struct AssumptionReport {
  double lower_margin = 0.0;            // min over [-1,1] of sigma - cos(alpha) psi
  std::optional<double> kappa_witness;  // kappa with sigma <= (1 - kappa) psi
  double compat_minus = 0.0;            // |sigma(-1)|
  double compat_plus = 0.0;             // |sigma(1) - c0 cos(alpha)|
  double support_violation = 0.0;       // max |sigma'| sampled outside [-1, 1]
  bool ok = false;
};

/// Checks the lower bound, strict-wetting margin and compatibility of a boundary
/// density on a uniform grid of [-1, 1].
AssumptionReport validate_assumptions(const std::function<double(double)>& sigma,
                                      const std::function<double(double)>& dsigma, double alpha,
                                      int samples = 10001);

/// Surface-tension algebra of a (W, sigma) pair.
class EnergyModel {
 public:
  explicit EnergyModel(double alpha, int envelope_samples = 4097);

  const BoundaryEnergy& boundary() const { return boundary_; }
  double c0() const { return kSurfaceTension; }
  /// sigma_hat(+1) - sigma_hat(-1) in the caller's convention (negative when swapped).
  double signed_jump() const { return signed_jump_; }
  /// Normalised jump >= 0 (after the phase swap).
  double jump() const { return std::abs(signed_jump_); }
  double sigma_hat_plus() const { return sigma_hat_plus_; }
  double sigma_hat_minus() const { return sigma_hat_minus_; }
  double young_angle() const { return young_angle_; }
  /// Max deviation between sigma_hat and sigma on the envelope grid.
  double envelope_gap() const { return envelope_gap_; }

 private:
  BoundaryEnergy boundary_;
  double signed_jump_ = 0.0;
  double sigma_hat_plus_ = 0.0;
  double sigma_hat_minus_ = 0.0;
  double young_angle_ = 0.0;
  double envelope_gap_ = 0.0;
};

}  // namespace pfc
