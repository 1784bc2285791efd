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

// wavectl: simulate platoons with wave-dampening controllers, sweep the
// controller matrix, compute macroscopic fields and optimize trajectories.
//
// Exit codes: 0 success, 1 configuration error, 2 collision, 3 infeasible
// optimization. Outputs go below $WAVECTL_OUT (default ./out) unless --out
// is given.

#include <iostream>

#include <CLI11.hpp>

#include "wavectl/cfm.hpp"
#include "wavectl/cli.hpp"

namespace cli = wavectl::cli;

int main(int argc, char** argv) {
  CLI::App app{"Platoon simulation, controller evaluation and trajectory optimization"};
  app.require_subcommand(1);

  cli::SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Run one scenario in closed loop and write the run artifact");
  s->add_option("-c,--config", sim.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  s->add_option("-s,--scenario", sim.scenario, "Built-in scenario name or scenario file");
  s->add_option("--controller", sim.controller, "baseline | accel | accel_nolc | acc | mpc");
  s->add_option("--planner", sim.planner, "closed (default) or none for the open-loop ablation");
  s->add_option("--seed", sim.seed, "Random seed");
  s->add_option("-o,--out", sim.out, "Artifact directory");
  s->add_option("--energy-models", sim.energy_models, "Energy model file (JSON)");
  s->add_flag("--no-traces", sim.no_traces, "Skip the per-tick controller trace");

  cli::SweepArgs sw;
  auto* w = app.add_subcommand("sweep", "Evaluate the scenario x controller matrix against baselines");
  w->add_option("spec,--spec", sw.spec, "Sweep specification (JSON)")->required()->check(CLI::ExistingFile);
  w->add_option("-o,--out", sw.out, "Report directory");
  w->add_flag("!--no-resume", sw.resume, "Recompute cells even when markers exist");
  w->add_option("--energy-models", sw.energy_models, "Energy model file (JSON)");

  cli::MacroArgs mc;
  auto* m = app.add_subcommand("macro", "Edie fields and heatmaps from a run artifact");
  m->add_option("run,--run", mc.run, "Run artifact directory")->required();
  m->add_option("--ht", mc.h_t, "Box duration [s]")->capture_default_str();
  m->add_option("--hx", mc.h_x, "Box length [m]")->capture_default_str();
  m->add_option("-o,--out", mc.out, "Output directory (default <run>/macro)");
  m->add_option("--energy-models", mc.energy_models, "Energy model file (JSON)");

  cli::OptimizeArgs op;
  auto* o = app.add_subcommand("optimize", "Platoon trajectory optimization or MPC rollout");
  o->add_option("-c,--config", op.config, "Optimization configuration (JSON)")->check(CLI::ExistingFile);
  o->add_flag("--grad-check", op.grad_check, "Compare adjoint and finite-difference gradients and exit");
  o->add_option("--avs", op.avs, "Number of AVs");
  o->add_option("--pieces", op.pieces, "Control pieces over the horizon");
  o->add_option("--iterations", op.iterations, "Descent iterations per stage");
  o->add_option("--seed", op.seed, "Leader seed");
  o->add_option("--mode", op.mode, "ocp or mpc");
  o->add_option("-o,--out", op.out, "Output directory");

  cli::GenLeaderArgs gl;
  auto* g = app.add_subcommand("gen-leader", "Write a synthetic stop-and-go leader trajectory");
  g->add_option("-c,--config", gl.config, "Stop-and-go parameters (JSON)")->check(CLI::ExistingFile);
  g->add_option("--seed", gl.seed, "Random seed")->capture_default_str();
  g->add_option("--duration", gl.duration, "Duration [s]");
  g->add_option("-o,--out", gl.out, "Output CSV");

  cli::BenchArgs bn;
  auto* b = app.add_subcommand("bench", "Simulator and macroscopic-field throughput");
  b->add_option("--vehicles", bn.vehicles, "Platoon size including the leader")->capture_default_str();
  b->add_option("--duration", bn.duration, "Simulated time [s]")->capture_default_str();
  b->add_option("--repeats", bn.repeats, "Repetitions, best time kept")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kConfigError;
  }

  try {
    if (*s) return cli::cmd_simulate(sim, std::cout);
    if (*w) return cli::cmd_sweep(sw, std::cout);
    if (*m) return cli::cmd_macro(mc, std::cout);
    if (*o) return cli::cmd_optimize(op, std::cout);
    if (*g) return cli::cmd_gen_leader(gl, std::cout);
    if (*b) return cli::cmd_bench(bn, std::cout);
  } catch (const wavectl::cfm::CollisionError& e) {
    std::cerr << "collision: " << e.what() << "\n";
    return cli::kCollision;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kConfigError;
  }
  return cli::kConfigError;
}
