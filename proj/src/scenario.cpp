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

#include "wavectl/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace wavectl::sim {

std::string scenario_kind_name(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::Shockwave: return "shockwave";
    case ScenarioKind::Freeflow: return "freeflow";
    case ScenarioKind::Bottleneck: return "bottleneck";
  }
  return "?";
}

ScenarioKind parse_scenario_kind(const std::string& s) {
  if (s == "shockwave") return ScenarioKind::Shockwave;
  if (s == "freeflow") return ScenarioKind::Freeflow;
  if (s == "bottleneck") return ScenarioKind::Bottleneck;
  throw std::invalid_argument("unknown scenario kind: " + s);
}

std::string vehicle_kind_name(VehicleKind k) {
  switch (k) {
    case VehicleKind::Leader: return "leader";
    case VehicleKind::Human: return "human";
    case VehicleKind::Av: return "av";
  }
  return "?";
}

double bottleneck_speed_limit(double density, const BottleneckSpec& spec) {
  if (density < 0.0) throw std::invalid_argument("bottleneck: negative density");
  if (density <= 0.0) return spec.v_free;
  return std::min(spec.v_free, spec.kappa / density);
}

void Scenario::validate() const {
  if (avs < 0 || humans < 0) throw std::invalid_argument("scenario: vehicle counts must be >= 0");
  if (!(duration > 0.0)) throw std::invalid_argument("scenario: duration must be positive");
  if (!(dt > 0.0) || dt > kLeaderCadence + 1e-12) throw std::invalid_argument("scenario: dt must lie in (0, 0.1]");
  const double ratio = kLeaderCadence / dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9) throw std::invalid_argument("scenario: dt must divide 0.1 s");
  if (!(vehicle_length > 0.0)) throw std::invalid_argument("scenario: vehicle_length must be positive");
  if (initial_gap && !(*initial_gap > 0.0)) throw std::invalid_argument("scenario: initial_gap must be positive");
  if (!(free_speed > 0.0)) throw std::invalid_argument("scenario: free_speed must be positive");
  if (bottleneck.enabled) {
    if (!(bottleneck.x_end > bottleneck.x_begin)) throw std::invalid_argument("scenario: empty bottleneck region");
    if (!(bottleneck.kappa > 0.0 && bottleneck.v_free > 0.0)) {
      throw std::invalid_argument("scenario: bottleneck kappa and v_free must be positive");
    }
  }
  for (const CutEvent& c : cuts) {
    if (c.target < 1 || c.target > avs + humans) throw std::invalid_argument("scenario: cut event target out of range");
    if (c.t < 0.0 || c.t > duration) throw std::invalid_argument("scenario: cut event outside the run");
    if (c.type == CutEvent::Type::In && !(c.gap > 0.0 && c.speed >= 0.0)) {
      throw std::invalid_argument("scenario: cut-in needs a positive gap and non-negative speed");
    }
  }
  switch (leader.kind) {
    case LeaderSource::Kind::StopAndGo: leader.stop_and_go.validate(); break;
    case LeaderSource::Kind::Constant:
      if (leader.speed < 0.0) throw std::invalid_argument("scenario: negative leader speed");
      break;
    case LeaderSource::Kind::Pulse:
      if (leader.speed < 0.0 || leader.pulse_depth < 0.0 || leader.pulse_depth > leader.speed ||
          !(leader.pulse_duration > 0.0)) {
        throw std::invalid_argument("scenario: bad pulse leader");
      }
      break;
    case LeaderSource::Kind::File:
      if (leader.path.empty()) throw std::invalid_argument("scenario: file leader without path");
      break;
  }
}

std::vector<VehicleKind> Scenario::layout() const {
  const int n = avs + humans;
  std::vector<VehicleKind> out(static_cast<std::size_t>(n), VehicleKind::Human);
  if (avs == 0) return out;
  if (!interleaved) {
    std::fill(out.begin(), out.begin() + avs, VehicleKind::Av);
    return out;
  }
  // Evenly spread: AV j sits at floor(j n / avs).
  for (int j = 0; j < avs; ++j) out[static_cast<std::size_t>(j * n / avs)] = VehicleKind::Av;
  return out;
}

SyntheticLeader Scenario::make_leader(std::uint64_t seed) const {
  SyntheticLeader out;
  const double span = duration + 1.0;
  switch (leader.kind) {
    case LeaderSource::Kind::StopAndGo: {
      StopAndGoParams p = leader.stop_and_go;
      p.duration = std::max(p.duration, span);
      return generate_stop_and_go(seed, p);
    }
    case LeaderSource::Kind::Constant:
      out.trajectory = constant_leader(leader.speed, span);
      break;
    case LeaderSource::Kind::Pulse: {
      out.trajectory = constant_leader(leader.speed, span);
      for (std::size_t i = 0; i < out.trajectory.t.size(); ++i) {
        const double s = (out.trajectory.t[i] - leader.pulse_start) / leader.pulse_duration;
        if (s > 0.0 && s < 1.0) {
          out.trajectory.v[i] -= leader.pulse_depth * 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * s));
        }
      }
      break;
    }
    case LeaderSource::Kind::File:
      out.trajectory = load_leader_trajectory(leader.path);
      break;
  }
  out.field.v_free = free_speed;
  return out;
}

std::vector<std::string> builtin_scenario_names() { return {"shockwave", "freeflow", "bottleneck", "pulse", "cutin"}; }

Scenario builtin_scenario(const std::string& name) {
  Scenario s;
  s.name = name;
  if (name == "shockwave") {
    s.kind = ScenarioKind::Shockwave;
    s.duration = 900.0;
    s.free_speed = 24.0;
    s.leader.kind = LeaderSource::Kind::StopAndGo;
    s.leader.stop_and_go.v_free = 24.0;
    s.leader.stop_and_go.depth_min = 17.0;
    s.leader.stop_and_go.depth_max = 21.0;
  } else if (name == "freeflow") {
    s.kind = ScenarioKind::Freeflow;
    s.duration = 600.0;
    s.free_speed = 25.0;
    s.leader.kind = LeaderSource::Kind::Constant;
    s.leader.speed = 25.0;
  } else if (name == "bottleneck") {
    s.kind = ScenarioKind::Bottleneck;
    s.duration = 600.0;
    s.free_speed = 25.0;
    s.leader.kind = LeaderSource::Kind::Constant;
    s.leader.speed = 25.0;
    s.bottleneck.enabled = true;
    s.bottleneck.x_begin = 3000.0;
    s.bottleneck.x_end = 3600.0;
    s.bottleneck.kappa = 0.25;
    s.bottleneck.v_free = 25.0;
  } else if (name == "pulse") {
    s.kind = ScenarioKind::Shockwave;
    s.avs = 0;
    s.humans = 20;
    s.duration = 300.0;
    s.free_speed = 15.0;
    s.leader.kind = LeaderSource::Kind::Pulse;
    s.leader.speed = 15.0;
    s.leader.pulse_depth = 2.0;
    s.leader.pulse_start = 10.0;
    s.leader.pulse_duration = 10.0;
  } else if (name == "cutin") {
    s.kind = ScenarioKind::Freeflow;
    s.avs = 1;
    s.humans = 0;
    s.duration = 90.0;
    s.free_speed = 30.0;
    s.initial_gap = 150.0;
    s.leader.kind = LeaderSource::Kind::Constant;
    s.leader.speed = 30.0;
    s.cuts.push_back({30.0, 1, CutEvent::Type::In, 65.0, 31.0});
  } else {
    throw std::invalid_argument("unknown built-in scenario: " + name);
  }
  return s;
}

}  // namespace wavectl::sim
