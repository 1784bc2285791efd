// Copyright 2026 The wavectl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "wavectl/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <omp.h>

#include "wavectl/csv.hpp"
#include "wavectl/edie.hpp"
#include "wavectl/kpi.hpp"
#include "wavectl/mpc.hpp"
#include "wavectl/ocp.hpp"

namespace wavectl::cli {

namespace fs = std::filesystem;
using config::ConfigError;

std::filesystem::path output_root() {
  const char* env = std::getenv("WAVECTL_OUT");
  return env && *env ? fs::path(env) : fs::path("out");
}

namespace {

std::vector<energy::EnergyModel> models_from(const std::string& path) {
  if (path.empty()) return energy::default_models();
  try {
    return energy::load_models(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void print_kpis(std::ostream& os, const kpi::KpiValues& k) {
  fmt::print(os, "  fuel economy   {:10.3f} mpg\n", k.fuel_economy);
  fmt::print(os, "  throughput     {:10.4f} veh/s\n", k.throughput);
  fmt::print(os, "  network speed  {:10.3f} m/s\n", k.network_speed);
  fmt::print(os, "  fuel           {:10.1f} g over {:.1f} km\n", k.fuel, k.distance / 1000.0);
}

config::Json kpi_json(const kpi::KpiValues& k) {
  return {{"fuel_economy_mpg", k.fuel_economy}, {"throughput_veh_per_s", k.throughput},
          {"network_speed_m_per_s", k.network_speed}, {"fuel_g", k.fuel}, {"distance_m", k.distance},
          {"time_s", k.time}};
}

}  // namespace

int cmd_simulate(const SimulateArgs& a, std::ostream& os) {
  config::RunConfig rc;
  if (!a.config.empty()) {
    rc = config::run_config_from_json(config::read_json(a.config), fs::path(a.config).parent_path());
  } else {
    rc.scenario = sim::builtin_scenario("shockwave");
  }
  if (!a.scenario.empty()) rc.scenario = config::resolve_scenario(config::Json(a.scenario), {});
  if (!a.controller.empty()) {
    try {
      rc.options.controllers.variant = sim::parse_variant(a.controller);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  if (!a.planner.empty()) {
    if (a.planner != "none" && a.planner != "closed") throw ConfigError("--planner must be 'none' or 'closed'");
    rc.options.planner = a.planner == "closed";
  }
  if (a.seed) rc.options.seed = *a.seed;
  if (!a.energy_models.empty()) rc.energy_models = a.energy_models;
  if (a.no_traces) rc.options.traces = false;
  const auto models = models_from(rc.energy_models);
  try {
    energy::find_model(models, rc.scenario.energy_class);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }

  const fs::path out = a.out.empty()
                           ? output_root() / fmt::format("{}_{}_seed{}", rc.scenario.name,
                                                         sim::variant_name(rc.options.controllers.variant),
                                                         rc.options.seed)
                           : fs::path(a.out);
  const auto t0 = std::chrono::steady_clock::now();
  const sim::RunArtifact art = sim::closed_loop_run(rc.scenario, rc.options);
  const double elapsed = seconds_since(t0);
  sim::write_artifact(out, art);
  config::write_json(out / "config.json", config::run_config_to_json(rc));

  fmt::print(os, "scenario {} controller {} planner {} seed {}\n", rc.scenario.name,
             sim::variant_name(rc.options.controllers.variant), rc.options.planner ? "closed" : "none",
             rc.options.seed);
  fmt::print(os, "{} steps in {:.2f} s, artifact in {}\n", art.steps, elapsed, out.string());
  if (art.collision) {
    fmt::print(os, "collision: {}\n", art.failure);
    return kCollision;
  }
  const kpi::KpiValues k = kpi::compute_kpis(art, models);
  config::write_json(out / "kpi.json", kpi_json(k));
  print_kpis(os, k);
  return kOk;
}

int cmd_sweep(const SweepArgs& a, std::ostream& os) {
  if (a.spec.empty()) throw ConfigError("sweep needs --spec");
  const kpi::SweepSpec spec = config::sweep_from_json(config::read_json(a.spec), fs::path(a.spec).parent_path());
  const auto models = models_from(a.energy_models);
  const fs::path out = a.out.empty() ? output_root() / "sweep" : fs::path(a.out);
  fs::create_directories(out);
  config::write_json(out / "config.json", config::sweep_to_json(spec));
  const auto t0 = std::chrono::steady_clock::now();
  const kpi::KpiReport report =
      kpi::evaluate_matrix(spec, models, a.resume ? std::optional<fs::path>(out / "cells") : std::nullopt);
  kpi::write_report_csv(out / "report.csv", report);
  kpi::write_report_html(out / "report.html", report);
  fmt::print(os, "{:<12} {:<14} {:>10} {:>9} {:>10} {:>9} {:>10} {:>9}\n", "scenario", "variant", "mpg", "d%",
             "veh/s", "d%", "m/s", "d%");
  for (const auto& r : report.rows) {
    if (r.failed) {
      fmt::print(os, "{:<12} {:<14} FAILED: {}\n", r.scenario, r.variant, r.failure);
      continue;
    }
    fmt::print(os, "{:<12} {:<14} {:>10.3f} {:>+9.2f} {:>10.4f} {:>+9.2f} {:>10.3f} {:>+9.2f}\n", r.scenario,
               r.variant, r.mean.fuel_economy, r.d_fuel_economy, r.mean.throughput, r.d_throughput,
               r.mean.network_speed, r.d_network_speed);
  }
  fmt::print(os, "report in {} ({:.1f} s)\n", out.string(), seconds_since(t0));
  return kOk;
}

int cmd_macro(const MacroArgs& a, std::ostream& os) {
  if (a.run.empty()) throw ConfigError("macro needs --run");
  if (!fs::exists(fs::path(a.run) / "trajectories.csv")) throw ConfigError("no run artifact in " + a.run);
  if (!(a.h_t > 0.0) || !(a.h_x > 0.0)) throw ConfigError("box sizes must be positive");
  const sim::RunArtifact art = sim::read_artifact(a.run);
  const auto models = models_from(a.energy_models);
  const macro::ModelLookup lookup = [&](const std::string& c) -> const energy::EnergyModel& {
    return energy::find_model(models, c);
  };
  const macro::MacroGrid g = macro::edie_fields(art.vehicles, lookup, a.h_t, a.h_x);
  const macro::BulkFields b = macro::bulk_fields(g);
  const fs::path out = a.out.empty() ? fs::path(a.run) / "macro" : fs::path(a.out);

  std::vector<macro::OverlayTrack> overlay;
  for (const auto& r : art.vehicles) {
    if (r.kind != sim::VehicleKind::Av) continue;
    overlay.push_back({r.id, r.t, r.x, r.engaged});
  }
  struct Field {
    const char* name;
    const char* units;
    const std::vector<double>* values;
  };
  const Field fields[] = {{"rho", "veh/m", &g.rho}, {"q", "veh/s", &g.q},     {"f", "g/(s m)", &g.f},
                          {"u", "m/s", &b.u},       {"phi", "g/s", &b.phi},   {"psi", "g/m", &b.psi}};
  std::size_t tracks = 0;
  for (const auto& f : fields) {
    macro::write_field_csv(out / fmt::format("{}.csv", f.name), g, *f.values, f.name, f.units);
    const auto info = macro::write_field_svg(out / fmt::format("{}.svg", f.name), g, *f.values,
                                             fmt::format("{} [{}]", f.name, f.units), overlay);
    tracks = info.overlay_tracks;
  }
  fmt::print(os, "{} x {} boxes of {} s x {} m, {} AV overlay tracks, fields in {}\n", g.nt, g.nx, g.h_t, g.h_x,
             tracks, out.string());
  return kOk;
}

namespace {

int mpc_rollout(const config::OptimizeConfig& c, const fs::path& out, std::ostream& os) {
  mpc::MpcController ctl(c.mpc, accel::BaseControllerConfig{});
  const double dt = 0.1;
  const int steps = static_cast<int>(std::lround(c.mpc_duration / dt));
  double x = 0.0, v = c.mpc_initial_speed;
  double xl = c.mpc_initial_gap + c.mpc.length;
  const double vl = c.mpc_leader_speed;
  const auto target = [vl](double) { return vl; };
  auto f = csv::open_out(out / "mpc_trace.csv");
  f << "t,x,v,gap,u,feasible,fallback,slack\n";
  double worst = -std::numeric_limits<double>::infinity(), max_u = 0.0;
  int infeasible = 0;
  for (int k = 0; k <= steps; ++k) {
    const double gap = xl - x - c.mpc.length;
    const auto tr = ctl.step(x, v, gap, vl, 0.0, target, dt);
    f << fmt::format("{},{},{},{},{},{},{},{}\n", k * dt, x, v, gap, tr.u, tr.feasible ? 1 : 0,
                     tr.fallback ? 1 : 0, tr.slack);
    worst = std::max(worst, c.mpc.s_min + c.mpc.h_min * v - gap);
    max_u = std::max(max_u, std::abs(tr.u));
    infeasible += tr.feasible ? 0 : 1;
    if (k == steps) break;
    const double vn = std::max(0.0, v + tr.u * dt);
    x += 0.5 * (v + vn) * dt;
    v = vn;
    xl += vl * dt;
  }
  fmt::print(os, "MPC rollout: {} ticks, max |u| {:.3g} m/s^2, {} infeasible solves, min-gap margin {:.3g} m\n",
             steps + 1, max_u, infeasible, -worst);
  if (worst > 1e-6) {
    fmt::print(os, "{:<20} {:>12} {:>12}\n{:<20} {:>12.4g} {:>12.4g}\n", "constraint", "violation", "tolerance",
               "min gap", worst, 1e-6);
    return kInfeasible;
  }
  return kOk;
}

void print_audit(std::ostream& os, const ocp::OcpEval& e, double tol) {
  fmt::print(os, "{:<20} {:>12} {:>12}\n", "constraint", "violation", "tolerance");
  fmt::print(os, "{:<20} {:>12.4g} {:>12.4g}\n", "gap envelope [m]", e.max_gap_violation, tol);
  fmt::print(os, "{:<20} {:>12.4g} {:>12.4g}\n", "speed >= 0 [m/s]", e.max_speed_violation, tol);
}

}  // namespace

int cmd_optimize(const OptimizeArgs& a, std::ostream& os) {
  config::OptimizeConfig c;
  if (!a.config.empty()) c = config::optimize_from_json(config::read_json(a.config));
  if (a.avs) c.setup.avs = *a.avs;
  if (a.pieces) c.setup.pieces = *a.pieces;
  if (a.iterations) c.iterations = c.joint_iterations = *a.iterations;
  if (a.seed) c.setup.seed = *a.seed;
  if (!a.mode.empty()) {
    if (a.mode != "ocp" && a.mode != "mpc") throw ConfigError("--mode must be 'ocp' or 'mpc'");
    c.mode = a.mode == "ocp" ? config::OptimizeConfig::Mode::Ocp : config::OptimizeConfig::Mode::Mpc;
  }
  // Re-parse the effective configuration so overrides are validated too.
  c = config::optimize_from_json(config::optimize_to_json(c));
  const fs::path out = a.out.empty() ? output_root() / "optimize" : fs::path(a.out);
  fs::create_directories(out);
  config::write_json(out / "config.json", config::optimize_to_json(c));

  if (c.mode == config::OptimizeConfig::Mode::Mpc) return mpc_rollout(c, out, os);

  if (a.grad_check) {
    bool ok = true;
    int checked = 0;
    std::vector<int> resolutions{10, 20, 40};
    if (std::find(resolutions.begin(), resolutions.end(), c.setup.pieces) == resolutions.end()) {
      resolutions.push_back(c.setup.pieces);
    }
    fmt::print(os, "{:>8} {:>16} {:>16}\n", "pieces", "max rel error", "max |grad|");
    for (int pieces : resolutions) {
      config::OptimizeConfig g = c;
      g.setup.pieces = pieces;
      ocp::OcpProblem gp;
      try {
        gp = config::make_problem(g);
      } catch (const std::exception&) {
        continue;  // horizon not divisible at this resolution
      }
      try {
        const auto res = ocp::gradient_check(gp, c.setup.seed);
        fmt::print(os, "{:>8} {:>16.3e} {:>16.3e}\n", pieces, res.max_rel_error, res.max_abs_gradient);
        ok = ok && res.max_rel_error <= 1e-4;
        ++checked;
      } catch (const std::runtime_error& e) {
        // Long pieces can leave no collision-free starting point.
        fmt::print(os, "{:>8} skipped: {}\n", pieces, e.what());
      }
    }
    ok = ok && checked > 0;
    fmt::print(os, "gradient check {}\n", ok ? "passed" : "FAILED");
    return ok ? kOk : kInfeasible;
  }

  const ocp::OcpProblem p = config::make_problem(c);
  const double baseline = ocp::baseline_objective(p);
  const auto t0 = std::chrono::steady_clock::now();
  ocp::OcpResult r;
  std::vector<double> stages;
  std::vector<double> trace;
  try {
    if (c.sequential && p.av_count() > 1) {
      auto s = ocp::ocp_optimize_sequential(p, c.iterations, c.joint_iterations, c.gradient);
      r = std::move(s.result);
      stages = s.after_each_av;
      trace = s.trace;
    } else {
      r = ocp::ocp_optimize(p, ocp::initial_guess(p), c.iterations, c.gradient);
      trace = r.trace;
    }
  } catch (const std::runtime_error& e) {
    fmt::print(os, "no feasible start: {}\n", e.what());
    return kInfeasible;
  }
  const double elapsed = seconds_since(t0);
  ocp::write_schedule_csv(out / "schedule.csv", p, r.u);
  ocp::write_trace_csv(out / "trace.csv", trace);
  const double reduction = 100.0 * (baseline - r.final_eval.objective) / baseline;
  config::Json summary = {{"baseline_objective", baseline},
                          {"objective", r.final_eval.objective},
                          {"reduction_percent", reduction},
                          {"violation", r.final_eval.violation},
                          {"max_gap_violation_m", r.final_eval.max_gap_violation},
                          {"max_speed_violation_m_per_s", r.final_eval.max_speed_violation},
                          {"objective_after_each_av", stages},
                          {"seconds", elapsed}};
  config::write_json(out / "summary.json", summary);
  fmt::print(os, "{} followers, {} AVs, {} pieces over {} s\n", p.followers(), p.av_count(), p.pieces, p.horizon());
  fmt::print(os, "baseline objective {:.6g}, optimized {:.6g} ({:+.2f}% reduction) in {:.1f} s\n", baseline,
             r.final_eval.objective, reduction, elapsed);
  for (std::size_t j = 0; j < stages.size(); ++j) {
    fmt::print(os, "  after AV {}: {:.6g}\n", j + 1, stages[j]);
  }
  const bool feasible = r.final_eval.max_gap_violation <= c.audit_tolerance &&
                        r.final_eval.max_speed_violation <= c.audit_tolerance;
  print_audit(os, r.final_eval, c.audit_tolerance);
  if (!feasible) {
    fmt::print(os, "final audit failed\n");
    return kInfeasible;
  }
  return kOk;
}

int cmd_gen_leader(const GenLeaderArgs& a, std::ostream& os) {
  sim::StopAndGoParams p;
  if (!a.config.empty()) p = config::stop_and_go_from_json(config::read_json(a.config));
  if (a.duration) p.duration = *a.duration;
  try {
    p.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  const sim::SyntheticLeader lead = sim::generate_stop_and_go(a.seed, p);
  const fs::path out = a.out.empty() ? output_root() / fmt::format("leader_seed{}.csv", a.seed) : fs::path(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  sim::save_leader_trajectory(out, lead.trajectory);
  double vmin = lead.trajectory.v.front();
  for (double v : lead.trajectory.v) vmin = std::min(vmin, v);
  fmt::print(os, "{} samples over {} s, {} waves, min speed {:.2f} m/s, written to {}\n", lead.trajectory.v.size(),
             lead.trajectory.duration(), lead.field.waves.size(), vmin, out.string());
  return kOk;
}

BenchResult run_bench(const BenchArgs& a) {
  if (a.vehicles < 2 || a.repeats < 1 || !(a.duration > 0.0)) throw ConfigError("bench: bad arguments");
  sim::Scenario s = sim::builtin_scenario("shockwave");
  s.avs = 1;
  s.humans = a.vehicles - 2;
  s.duration = a.duration;
  sim::RunOptions o;
  o.traces = false;
  BenchResult r;
  sim::RunArtifact art;
  r.sim_seconds = 1e300;
  for (int i = 0; i < a.repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    art = sim::closed_loop_run(s, o);
    r.sim_seconds = std::min(r.sim_seconds, seconds_since(t0));
  }
  r.steps = art.steps;
  r.steps_per_second = static_cast<double>(r.steps) / r.sim_seconds;

  const auto models = energy::default_models();
  const macro::ModelLookup lookup = [&](const std::string& c) -> const energy::EnergyModel& {
    return energy::find_model(models, c);
  };
  macro::MacroGrid gs, gp;
  r.edie_serial_seconds = r.edie_parallel_seconds = 1e300;
  for (int i = 0; i < a.repeats; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    gs = macro::edie_fields_serial(art.vehicles, lookup);
    r.edie_serial_seconds = std::min(r.edie_serial_seconds, seconds_since(t0));
    t0 = std::chrono::steady_clock::now();
    gp = macro::edie_fields(art.vehicles, lookup);
    r.edie_parallel_seconds = std::min(r.edie_parallel_seconds, seconds_since(t0));
  }
  r.edie_match = gs.rho.size() == gp.rho.size();
  for (std::size_t i = 0; r.edie_match && i < gs.rho.size(); ++i) {
    const auto close = [](double x, double y) { return std::abs(x - y) <= 1e-12 * std::max(1.0, std::abs(x)); };
    r.edie_match = close(gs.rho[i], gp.rho[i]) && close(gs.q[i], gp.q[i]) && close(gs.f[i], gp.f[i]);
  }
  r.threads = omp_get_max_threads();
  return r;
}

int cmd_bench(const BenchArgs& a, std::ostream& os) {
  const BenchResult r = run_bench(a);
  fmt::print(os, "simulator: {} vehicles, {} steps in {:.3f} s = {:.0f} steps/s\n", a.vehicles, r.steps,
             r.sim_seconds, r.steps_per_second);
  fmt::print(os, "edie fields: serial {:.4f} s, openmp {:.4f} s on {} threads, results {}\n", r.edie_serial_seconds,
             r.edie_parallel_seconds, r.threads, r.edie_match ? "match" : "DIFFER");
  return r.edie_match ? kOk : kInfeasible;
}

}  // namespace wavectl::cli
