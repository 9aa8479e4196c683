// Command-line driver: simulate, sweep, verify-calibration, envelope, report.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pfc/harness.hpp"

namespace {

enum Exit { kOk = 0, kRuntime = 1, kConfig = 2, kCheck = 3 };

struct Common {
  std::string config;
  std::string out;
  int threads = 1;
  std::uint64_t seed = 0;
  bool check = false;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
  auto* opt = cmd->add_option("--config", c.config, "experiment config (INI)");
  if (needs_config) opt->required();
  cmd->add_option("--out", c.out, "output directory (overrides [output] dir)");
  cmd->add_option("--threads", c.threads, "parallel sweep members")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", c.seed, "seed of the randomized initial perturbation");
  cmd->add_flag("--check", c.check, "exit with status 3 when an acceptance check fails");
}

std::filesystem::path out_dir(const Common& c, const pfc::ExperimentConfig& cfg) {
  return c.out.empty() ? std::filesystem::path(cfg.output_dir) : std::filesystem::path(c.out);
}

int fail(const char* kind, const std::string& what, int code) {
  std::cerr << "error[" << kind << "]: " << what << '\n';
  return code;
}

int run_simulate(const Common& c) {
  const auto cfg = pfc::load_config(c.config);
  const auto dir = out_dir(c, cfg);
  const auto r = pfc::simulate(cfg, cfg.eps.front(), {c.seed});
  pfc::write_run_outputs(r, dir);
  const auto& s = r.summary;
  std::printf("eps=%g h=%g steps=%zu snapshots=%zu energy_monotone=%d holder_worst=%.4g\n", r.eps, r.h,
              r.trajectory.ledger.size() - 1, r.trajectory.snapshots.size(), s.energy_monotone, s.holder_worst);
  if (!c.check) return kOk;
  bool ok = s.energy_monotone && s.holder_ok;
  if (r.gronwall) ok = ok && r.gronwall->ok();
  if (!ok) return fail("check", "run failed energy, volume-continuity or Gronwall check", kCheck);
  return kOk;
}

int run_sweep(const Common& c) {
  const auto cfg = pfc::load_config(c.config);
  const auto dir = out_dir(c, cfg);
  const auto r = pfc::sweep(cfg, c.threads, {c.seed});
  pfc::write_sweep(r, dir);
  for (const auto& row : r.rows)
    std::printf("eps=%g motion_law_residual=%.4g radius_or_speed_error=%.4g\n", row.eps, row.motion_law_residual,
                row.radius_or_speed_error);
  if (r.partial) {
    for (const auto& f : r.failures) std::cerr << "failed member " << f << '\n';
    return fail("runtime", "sweep table is partial", kRuntime);
  }
  if (c.check)
    for (const auto& orders : r.orders)
      for (double o : orders)
        if (!(o > 0.0)) return fail("check", "an error column does not decrease", kCheck);
  return kOk;
}

int run_verify(const Common& c, double corrupt) {
  auto cfg = pfc::load_config(c.config);
  if (corrupt > 0.0) cfg.corrupt_length = corrupt;
  const auto dir = out_dir(c, cfg);
  const auto r = pfc::verify_calibration(cfg);
  pfc::write_calibration_report(r, dir);
  for (const auto& cond : r.report.conditions)
    std::printf("%-28s %s worst_ratio=%.4g\n", cond.name.c_str(), cond.pass ? "PASS" : "FAIL", cond.worst_ratio);
  if (!r.report.pass()) {
    std::string names;
    for (const auto& n : r.report.failed()) names += (names.empty() ? "" : ",") + n;
    return fail("check", "calibration conditions failed: " + names, kCheck);
  }
  return kOk;
}

int run_envelope(const Common& c, const std::string& table) {
  const auto r = pfc::envelope_from_csv(table);
  const std::filesystem::path dir = c.out.empty() ? std::filesystem::path(".") : std::filesystem::path(c.out);
  pfc::write_envelope(r, dir);
  std::printf("c0=%.17g jump=%.17g\n", r.c0, r.jump);
  if (!r.young_angle) return fail("config", "boundary energy is non-wetting (|jump| >= c0)", kConfig);
  std::printf("young_angle_rad=%.17g\n", *r.young_angle);
  return kOk;
}

int run_report(const Common& c) {
  std::filesystem::path dir = c.out;
  if (dir.empty() && !c.config.empty()) dir = pfc::load_config(c.config).output_dir;
  if (dir.empty()) return fail("config", "report needs --out or --config", kConfig);
  pfc::write_report(dir);
  std::printf("%s\n", (dir / "summary.json").string().c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Allen-Cahn contact-angle simulator and verifier"};
  app.require_subcommand(1);
  Common sim, swp, ver, env, rep;
  double corrupt = 0.0;
  std::string table;

  auto* c_sim = app.add_subcommand("simulate", "run one experiment and write its tables");
  add_common(c_sim, sim, true);
  auto* c_swp = app.add_subcommand("sweep", "run every eps of the config and write a convergence table");
  add_common(c_swp, swp, true);
  auto* c_ver = app.add_subcommand("verify-calibration", "check the calibration conditions of the reference flow");
  add_common(c_ver, ver, true);
  c_ver->add_option("--corrupt-length", corrupt, "verify the negative control with |xi| raised to this value");
  auto* c_env = app.add_subcommand("envelope", "lower 1-Lipschitz envelope of a boundary energy table");
  add_common(c_env, env, false);
  c_env->add_option("--table", table, "CSV with columns s,sigma")->required();
  auto* c_rep = app.add_subcommand("report", "rebuild summary.json from stored tables");
  add_common(c_rep, rep, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("config", e.what(), kConfig);
  }

  try {
    if (*c_sim) return run_simulate(sim);
    if (*c_swp) return run_sweep(swp);
    if (*c_ver) return run_verify(ver, corrupt);
    if (*c_env) return run_envelope(env, table);
    if (*c_rep) return run_report(rep);
  } catch (const pfc::ConfigError& e) {
    return fail("config", e.what(), kConfig);
  } catch (const std::exception& e) {
    return fail("runtime", e.what(), kRuntime);
  }
  return kOk;
}
