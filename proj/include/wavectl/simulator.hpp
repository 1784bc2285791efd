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

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wavectl/acc_controller.hpp"
#include "wavectl/accel_controller.hpp"
#include "wavectl/cfm.hpp"
#include "wavectl/mpc.hpp"
#include "wavectl/planner.hpp"
#include "wavectl/scenario.hpp"

namespace wavectl::sim {

/// Which controller drives the AV slots. Baseline turns them into humans.
enum class ControllerVariant { Baseline, Accel, AccelNoLc, Acc, Mpc };
std::string variant_name(ControllerVariant v);
ControllerVariant parse_variant(const std::string& s);

struct ControllerSet {
  ControllerVariant variant = ControllerVariant::Accel;
  cfm::IdmParams idm;
  accel::BaseControllerConfig base;
  accel::LcConfig lc;
  acc::AccPlantParams acc_plant;
  acc::AccSetpoints acc_initial{55, 1};
  mpc::MpcConfig mpc;
};

struct RunOptions {
  std::uint64_t seed = 1;
  bool planner = true;  // false: open loop, AVs use their fallback target
  planner::PlannerConfig planner_cfg;
  ControllerSet controllers;
  bool traces = true;
};

/// Per-vehicle time series, one entry per tick the vehicle existed.
struct VehicleRecord {
  int id = 0;
  VehicleKind kind = VehicleKind::Human;
  std::string energy_class;
  std::vector<double> t, x, v, a;
  std::vector<char> engaged;
};

struct EventRow {
  double t = 0.0;
  std::string type;
  int vehicle = -1;
  double value = 0.0;
  double value2 = 0.0;
  std::string detail;
};

/// One AV controller tick. Columns that do not apply to the variant are NaN.
struct ControlTraceRow {
  double t = 0.0;
  int vehicle = 0;
  double v = 0.0;
  double gap = 0.0;
  double v_target = 0.0;
  double plan_t = -1.0;  // publication time of the plan consulted, -1 if none
  double a_cmd = 0.0;
  double a_raw = 0.0;
  double a_safe = 0.0;
  double a_target = 0.0;
  double a_mpc = 0.0;
  int lc_active = 0;
  double alpha = 0.0;
  int speed_setting = 0;
  int gap_setting = 0;
  int fallback = 0;
};

struct RunArtifact {
  Scenario scenario;
  RunOptions options;
  std::vector<VehicleRecord> vehicles;
  std::vector<EventRow> events;
  std::vector<planner::SpeedPlan> plans;
  std::vector<planner::PlanDiagnostics> plan_diagnostics;
  std::vector<planner::VehiclePing> pings;
  std::vector<planner::SegmentEstimate> estimates;
  std::vector<ControlTraceRow> traces;
  std::size_t steps = 0;
  bool collision = false;
  std::string failure;
  double leader_start_x = 0.0;
  double leader_end_x = 0.0;
};

struct VehicleState {
  int id = 0;
  VehicleKind kind = VehicleKind::Human;
  double x = 0.0;
  double v = 0.0;
  double a = 0.0;  // applied over the previous tick
  bool engaged = false;
  std::unique_ptr<accel::AccelController> accel;
  std::unique_ptr<acc::AccController> acc;
  std::unique_ptr<mpc::MpcController> mpc;
};

/// Single-lane platoon, front to back. Each tick: apply scheduled cut
/// events, compute every acceleration from the current (previous-tick)
/// states, then advance all vehicles ballistically.
class Simulator {
 public:
  Simulator(Scenario scenario, RunOptions options);

  /// Advances one tick. `plan` is the latest published Speed Plan (may be
  /// null). Throws cfm::CollisionError when a gap closes.
  void step(const planner::SpeedPlan* plan);

  double time() const { return static_cast<double>(tick_) * scenario_.dt; }
  std::int64_t tick() const { return tick_; }
  const std::vector<VehicleState>& vehicles() const { return vehicles_; }
  const Scenario& scenario() const { return scenario_; }
  const SyntheticLeader& leader() const { return leader_; }
  RunArtifact& artifact() { return art_; }

  /// Inserts or removes a vehicle ahead of the event target.
  void apply_cut_event(const CutEvent& ev);

  /// Appends the current state of every vehicle to the artifact records.
  void record();
  /// Records the final state with no applied acceleration.
  void finish();

 private:
  double observe_gap(std::size_t i) const;
  double speed_cap(double x) const;

  Scenario scenario_;
  RunOptions options_;
  SyntheticLeader leader_;
  std::vector<VehicleState> vehicles_;
  std::vector<std::size_t> record_index_;  // vehicle slot -> artifact record
  std::int64_t tick_ = 0;
  int next_id_ = 0;
  std::size_t next_cut_ = 0;
  std::vector<CutEvent> cuts_;
  double bottleneck_density_ = 0.0;
  RunArtifact art_;
};

/// Event-scheduled co-simulation with the Speed Planner: 1 Hz pings, coarse
/// estimates every 60 s arriving 180 s later, plans every 60 s. A collision
/// ends the run; the partial artifact is returned with `collision` set.
RunArtifact closed_loop_run(const Scenario& scenario, const RunOptions& options);

/// Writes trajectories.csv, vehicles.csv, plans.csv, events.csv, pings.csv,
/// estimates.csv, trace.csv and the run summary into `dir`.
void write_artifact(const std::filesystem::path& dir, const RunArtifact& art);
/// Reads back the vehicle records (trajectories.csv and vehicles.csv).
RunArtifact read_artifact(const std::filesystem::path& dir);

}  // namespace wavectl::sim
