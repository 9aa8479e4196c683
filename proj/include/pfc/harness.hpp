#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pfc/calibrations.hpp"
#include "pfc/expression.hpp"
#include "pfc/interface.hpp"
#include "pfc/solver.hpp"

namespace pfc {

inline constexpr int kSchemaVersion = 1;

enum class Geometry { chord, half_disk, translator, expression };

std::string_view geometry_name(Geometry g);
Geometry parse_geometry(std::string_view name);

/// Experiment description read from an INI file. Numeric entries are
/// expressions; h and tau may refer to `eps`, t_end to nothing but `pi`.
/// See README.md for the full key list.
struct ExperimentConfig {
  // [domain]
  double lx = 1.0;
  double ly = 1.0;
  std::string h = "eps/4";

  // [walls] ; unset walls follow the reference flow (Neumann without one)
  bool walls_given = false;
  std::array<bool, 4> contact{};
  std::array<double, 4> alpha{};

  // [model]
  std::vector<double> eps;  // sweeps take the whole list, simulate the first entry

  // [solver]
  Scheme scheme = Scheme::discrete_gradient;
  std::string tau = "eps^2/4";
  double t_end = 0.0;
  int snapshots = 40;  // snapshot intervals over [0, t_end]
  double stabilization = 2.0;

  // [initial]
  Geometry geometry = Geometry::half_disk;
  double r0 = 0.3;
  double contact_angle = std::numbers::pi / 2.0;  // translator
  double width = 1.0;
  double center_x = 0.5;
  double y0 = 0.25;
  bool swap_phases = false;
  std::string expression;  // level set in x, y, positive inside A (geometry = expression)
  double bump_amplitude = 0.0;  // normal displacement in units of h
  double bump_width = 0.05;
  std::optional<Vec2> bump_center;  // default: top of the initial interface
  double noise = 0.0;  // uniform random perturbation of u0, seeded

  // [reference]
  std::optional<FlowKind> reference;  // defaults to the geometry's closed-form flow
  std::string verify_h = "min(lx, ly)/256";
  double corrupt_length = 0.0;  // > 0 verifies the lengthened negative control

  // [output]
  std::string output_dir = "out";

  double h_for(double eps) const;
  double tau_for(double eps) const;
  Walls build_walls() const;
  FlowParams flow_params(double eps) const;
  std::optional<ReferenceFlow> reference_flow(double eps) const;
};

/// Parses and validates; throws ConfigError with a one-line reason.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Self-consistency: positive extents, eps >= 4h, h dividing the box, tau within
/// the scheme's cap, walls matching the reference flow.
void validate(const ExperimentConfig& config);

/// Six polynomial fields with B . n = 0 on every wall of [0, lx] x [0, ly]:
/// wall-vanishing factors x (lx - x), y (ly - y) times low-order monomials.
std::vector<VectorTestField> tangential_catalogue(double lx, double ly);

/// Per-snapshot series of one run. All entries finite; NaN marks a quantity
/// that does not apply (no reference flow, no contact point).
struct StabilityReport {
  std::vector<double> t;
  std::vector<double> phase_energy;
  std::vector<double> sharp_energy;
  std::vector<double> area;
  std::vector<double> rel_entropy;
  std::vector<double> rel_entropy_phasefield;
  std::vector<double> bulk_error;
  std::vector<double> equipartition;
  std::vector<double> boundary_defect;
  std::vector<double> tilt;
  std::vector<double> motion_law_residual;  // max over the catalogue
  std::vector<std::vector<double>> contact_angles;
  std::vector<double> measured_radius;
  std::vector<double> measured_speed;

  std::size_t size() const { return t.size(); }
  /// Throws RuntimeFailure unless the time stamps increase and the entries are finite.
  void check_invariants() const;
};

/// One row of a convergence table.
struct RunSummary {
  double eps = 0.0;
  double h = 0.0;
  double tau = 0.0;
  double contact_angle_error = 0.0;
  double radius_or_speed_error = 0.0;
  double energy_gap = 0.0;
  double motion_law_residual = 0.0;
  double equipartition = 0.0;
  double boundary_defect = 0.0;
  double rel_entropy = 0.0;
  double bulk_error = 0.0;

  double speed = 0.0;  // fitted translation speed (translator)
  double holder_worst = 0.0;
  bool holder_ok = false;
  double ledger_closure = 0.0;  // |E0 - E_end - sum dissipation| / |E0|
  bool energy_monotone = false;
};

struct RunOptions {
  std::uint64_t seed = 0;
  /// Noise floors added to the Gronwall inequalities: c0 L h^2 for the relative
  /// entropy and L h^2 / (2 ell) for the bulk error, L the initial length.
  bool gronwall = true;
};

struct RunResult {
  ExperimentConfig config;
  double eps = 0.0;
  double h = 0.0;
  double tau = 0.0;
  Grid grid;
  Walls walls;
  std::optional<ReferenceFlow> flow;
  std::optional<CalibrationFields> fields;
  Trajectory trajectory;
  std::vector<InterfaceCurve> curves;
  std::vector<std::vector<VelocitySample>> velocity;
  StabilityReport report;
  RunSummary summary;
  std::optional<GronwallReport> gronwall;
  double noise_rel_entropy = 0.0;
  double noise_bulk = 0.0;
};

PhaseField initial_state(const ExperimentConfig& config, const Grid& grid, double eps, std::uint64_t seed);

RunResult simulate(const ExperimentConfig& config, double eps, const RunOptions& options = {});

/// energy.csv, interface.csv, geometry.json, stability.csv, defects.csv.
void write_run_outputs(const RunResult& run, const std::filesystem::path& dir);

struct SweepResult {
  std::vector<RunSummary> rows;
  /// orders[k][c]: log2-rate of column c between rows k and k+1 (log(e_k/e_{k+1})/log(eps_k/eps_{k+1})).
  std::vector<std::vector<double>> orders;
  bool partial = false;
  std::vector<std::string> failures;
};

/// Error columns of the convergence table, in order.
const std::vector<std::string>& sweep_columns();

/// Members run as independent jobs on up to `threads` threads; a failing member
/// marks the table partial and is listed in `failures`.
SweepResult sweep(const ExperimentConfig& config, int threads, const RunOptions& options = {});
void write_sweep(const SweepResult& result, const std::filesystem::path& dir);

struct CalibrationRun {
  ReferenceFlow flow;
  CalibrationFields fields;
  CalibrationReport report;
};

CalibrationRun verify_calibration(const ExperimentConfig& config);
void write_calibration_report(const CalibrationRun& run, const std::filesystem::path& dir);

struct EnvelopeResult {
  std::vector<double> s;
  std::vector<double> sigma;
  std::vector<double> sigma_hat;
  double c0 = kSurfaceTension;
  double jump = 0.0;
  std::optional<double> young_angle;  // empty when the jump is non-wetting
};

/// Two-column table (s, sigma) with strictly increasing s from -1 to 1.
EnvelopeResult envelope(const std::vector<double>& s, const std::vector<double>& sigma);
EnvelopeResult envelope_from_csv(const std::filesystem::path& path);
void write_envelope(const EnvelopeResult& result, const std::filesystem::path& dir);

/// Rebuilds summary.json in `dir` from the CSV files stored there.
void write_report(const std::filesystem::path& dir);

/// Numeric CSV with '#' comment lines; returns header and rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(std::string_view name) const;  // throws ConfigError if absent
};
CsvTable read_csv(const std::filesystem::path& path);

/// Writes to a sibling temporary file, then renames over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace pfc
