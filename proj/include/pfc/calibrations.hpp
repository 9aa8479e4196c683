#pragma once

#include <functional>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "pfc/grid.hpp"
#include "pfc/interface.hpp"
#include "pfc/potentials.hpp"
#include "pfc/solver.hpp"

namespace pfc {

enum class FlowKind { stationary_chord, shrinking_half_disk, strip_translator };

std::string_view flow_name(FlowKind kind);
FlowKind parse_flow(std::string_view name);

/// Parameters of the closed-form reference flows. Only the fields relevant to
/// the chosen kind are read.
struct FlowParams {
  double lx = 1.0;
  double ly = 1.0;
  double horizon = 0.0;  // validity horizon T
  double eps = 0.0;      // when positive, the flow must stay 4 eps clear of the walls

  // Half-disk centred on the bottom wall at (lx/2, 0).
  double r0 = 0.3;

  // Grim-reaper strip [center_x - width/2, center_x + width/2]. Each side wall
  // of the box must be either a strip edge (contact wall) or the symmetry axis.
  double alpha = std::numbers::pi / 3.0;
  double width = 1.0;
  double center_x = 0.5;
  double y0 = 0.25;  // height of the graph on the axis at t = 0

  /// Exchange the phases: A becomes the complement and alpha becomes pi - alpha.
  bool swap_phases = false;
};

/// Point on the reference interface with its inner normal, normal speed and curvature.
struct InterfaceSample {
  Vec2 point;
  Vec2 normal;
  double V = 0.0;  // positive when A recedes
  double curvature = 0.0;
};

/// Exact solution of curvature flow with a contact angle:
///   stationary_chord     A = {x > lx/2}, alpha = pi/2
///   shrinking_half_disk  A = disk of radius sqrt(r0^2 - 2t) on the bottom wall, alpha = pi/2
///   strip_translator     A = {y > g(x, t)},
///                        g = y0 + a t - log(cos(a (x - center_x))) / a, a = (pi - 2 alpha) / width
class ReferenceFlow {
 public:
  ReferenceFlow(FlowKind kind, const FlowParams& params);

  FlowKind kind() const { return kind_; }
  const FlowParams& params() const { return params_; }
  double horizon() const { return params_.horizon; }
  bool swapped() const { return params_.swap_phases; }

  /// Wall conditions realising the flow's contact angle.
  Walls walls() const;
  /// Angle at the contact walls in the caller's phase convention.
  double contact_angle() const;
  /// Translation speed a of the grim reaper (0 for the other kinds).
  double speed() const { return a_; }
  double radius(double t) const;
  /// Height of the translating graph.
  double height(double x, double t) const;
  /// Horizontal extent of the strip inside the box.
  double strip_lo() const { return xlo_; }
  double strip_hi() const { return xhi_; }

  bool inside(const Vec2& p, double t) const;
  /// Signed Euclidean distance to the interface, positive inside A.
  double signed_distance(const Vec2& p, double t) const;
  double distance(const Vec2& p, double t) const { return std::abs(signed_distance(p, t)); }
  /// Enclosed area |A(t)| within the box.
  double area(double t) const;

  std::vector<InterfaceSample> interface(double t, int samples) const;
  std::vector<Vec2> contact_points(double t) const;
  /// Interface as an extracted-curve object (one open chain, normals into A).
  InterfaceCurve curve(double t, int samples) const;

 private:
  double unsigned_distance_translator(const Vec2& p, double t) const;

  FlowKind kind_;
  FlowParams params_;
  double a_ = 0.0;
  double xlo_ = 0.0;
  double xhi_ = 0.0;
};

ReferenceFlow build_reference(FlowKind kind, const FlowParams& params);

/// Closed-form calibration (xi, B, theta) of a reference flow with its constants.
/// All three fields are defined on the whole plane so that finite-difference
/// stencils may reach slightly past the walls.
struct CalibrationFields {
  Grid grid;
  FlowKind kind = FlowKind::stationary_chord;
  double c = 0.0;      // length coercivity constant
  double C = 0.0;      // evolution constant
  double ell = 0.0;    // width of the linear part of theta
  double delta = 0.0;  // radius of the mollified core (half-disk only)

  std::function<Vec2(const Vec2&, double)> xi;
  std::function<Vec2(const Vec2&, double)> velocity;
  std::function<double(const Vec2&, double)> weight;

  struct Samples {
    std::vector<Vec2> xi;
    std::vector<Vec2> velocity;
    ScalarField weight;
  };
  /// Values at the cell centres of the grid.
  Samples sample(double t) const;
};

/// Throws ConfigError when the grid cannot resolve the cutoff scales (ell < 4h)
/// or the flow leaves too little room for them.
CalibrationFields build_calibration(const ReferenceFlow& flow, const Grid& grid);

/// Negative control: xi lengthened on a bump carried by B so that |xi| reaches
/// `length` away from the interface and the walls while every other condition
/// keeps holding. Scales xi for the chord and the half-disk; adds a tangential
/// component for the translator.
CalibrationFields corrupt_length(const CalibrationFields& fields, const ReferenceFlow& flow,
                                 double length = 1.05);

struct ConditionResult {
  std::string name;
  double worst_ratio = 0.0;  // left side over the admissible bound
  Vec2 location;
  double time = 0.0;
  double constant_used = 0.0;
  bool pass = false;
};

struct CalibrationReport {
  std::vector<ConditionResult> conditions;

  bool pass() const;
  std::vector<std::string> failed() const;
  /// nullptr if there is no condition of that name.
  const ConditionResult* find(std::string_view name) const;
};

struct VerifyOptions {
  std::vector<double> times;  // empty: {0, T/2, T}
  double fd_step = 1e-4;      // relative to min(lx, ly)
  double fd_floor = 1e-7;     // absolute noise allowance of differentiated quantities
  double exact_tolerance = 1e-10;
  int interface_samples = 512;
};

/// Scans every calibration condition over the cell centres (wall conditions over
/// boundary-face midpoints, interface conditions over reference samples).
CalibrationReport verify_calibration(const CalibrationFields& fields, const ReferenceFlow& flow,
                                     const VerifyOptions& options = {});

/// c0 times the integral of 1 - nu_A . xi over the chains, trapezoid per segment.
double relative_entropy_sharp(const InterfaceCurve& curve, const CalibrationFields& fields,
                              const EnergyModel& model);

/// Cell quadrature of |theta| over the cells whose centre is classified
/// differently by `in_a` and by the reference.
double bulk_error(const std::function<bool(const Vec2&)>& in_a, const CalibrationFields& fields,
                  const ReferenceFlow& flow, double t);
/// Same with A = {u > 0}, the region bounded by the extracted interface.
double bulk_error(const PhaseField& state, const CalibrationFields& fields, const ReferenceFlow& flow);

struct StabilitySample {
  double t = 0.0;
  double rel_entropy = 0.0;
  double bulk_error = 0.0;
};

struct GronwallReport {
  double constant_used = 0.0;
  double slack = 0.0;
  /// Least C >= 0 for which both inequalities hold at every sample (inf if none).
  double smallest_constant = 0.0;
  std::vector<double> rhs_rel_entropy;  // E(0) + C int E + slack
  std::vector<double> rhs_bulk;         // B(0) + E(0) + C int (B + E) + slack
  bool rel_entropy_ok = false;
  bool bulk_ok = false;
  /// delta0 = max of the initial errors; checks E <= delta0 e^{Ct} and
  /// B <= 2 delta0 e^{2Ct} (plus slack), the bounds the two inequalities imply.
  double delta0 = 0.0;
  bool uniqueness_ok = false;

  bool ok() const { return rel_entropy_ok && bulk_ok; }
};

/// Integral inequalities by trapezoidal quadrature; throws ConfigError unless the
/// times increase strictly.
GronwallReport gronwall_check(const std::vector<StabilitySample>& series, double C, double slack = 0.0);

}  // namespace pfc
