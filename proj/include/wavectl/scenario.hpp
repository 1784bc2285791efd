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
#include <optional>
#include <string>
#include <vector>

#include "wavectl/leader.hpp"

namespace wavectl::sim {

enum class ScenarioKind { Shockwave, Freeflow, Bottleneck };
std::string scenario_kind_name(ScenarioKind k);
ScenarioKind parse_scenario_kind(const std::string& s);

enum class VehicleKind { Leader, Human, Av };
std::string vehicle_kind_name(VehicleKind k);

/// A vehicle entering (cut-in) or leaving (cut-out) the lane directly ahead
/// of `target`, the id of a follower in the initial layout (1 = first).
struct CutEvent {
  enum class Type { In, Out };
  double t = 0.0;
  int target = 1;
  Type type = Type::In;
  double gap = 65.0;    // cut-in: gap to the target after insertion [m]
  double speed = 30.0;  // cut-in: speed of the inserted vehicle [m/s]
};

/// Density-coupled speed limit over [x_begin, x_end).
struct BottleneckSpec {
  bool enabled = false;
  double x_begin = 3000.0;
  double x_end = 3600.0;
  double kappa = 0.25;   // [veh/s]
  double v_free = 30.0;  // [m/s]
};

/// min(v_free, kappa / density); v_free for zero density.
double bottleneck_speed_limit(double density, const BottleneckSpec& spec);

struct LeaderSource {
  enum class Kind { StopAndGo, Constant, Pulse, File };
  Kind kind = Kind::StopAndGo;
  StopAndGoParams stop_and_go;
  double speed = 25.0;           // constant and pulse base speed
  double pulse_depth = 5.0;      // [m/s]
  double pulse_start = 20.0;     // [s]
  double pulse_duration = 10.0;  // [s]
  std::string path;              // file source
};

struct Scenario {
  std::string name = "shockwave";
  ScenarioKind kind = ScenarioKind::Shockwave;
  int avs = 1;
  int humans = 20;
  bool interleaved = false;  // AVs spread evenly instead of leading the platoon
  LeaderSource leader;
  BottleneckSpec bottleneck;
  std::vector<CutEvent> cuts;
  double duration = 900.0;
  double dt = 0.1;
  double vehicle_length = 5.0;
  std::optional<double> initial_gap;  // default: IDM equilibrium at the leader's start speed
  double free_speed = 30.0;           // road free-flow speed for the planner
  std::string energy_class = "midsize_sedan";

  void validate() const;
  /// Follower kinds front to back, leader excluded.
  std::vector<VehicleKind> layout() const;
  /// The leader speed profile; stochastic sources draw from `seed`.
  SyntheticLeader make_leader(std::uint64_t seed) const;
};

/// The shipped scenarios: shockwave, freeflow, bottleneck, pulse, cutin.
Scenario builtin_scenario(const std::string& name);
std::vector<std::string> builtin_scenario_names();

}  // namespace wavectl::sim
