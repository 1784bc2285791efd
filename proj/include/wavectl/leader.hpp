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
#include <vector>

namespace wavectl::sim {

inline constexpr double kLeaderCadence = 0.1;  // [s]

/// Replayed leader speed profile sampled at 10 Hz, with an optional road
/// grade column [rad].
struct LeaderTrajectory {
  std::vector<double> t;
  std::vector<double> v;
  std::vector<double> grade;  // empty or one entry per sample

  /// Cadence within 1e-6 of 0.1 s, no gaps, no negative speeds.
  void validate() const;
  /// Linear interpolation; holds the end values outside the sampled range.
  double speed_at(double time) const;
  double grade_at(double time) const;
  double duration() const { return t.empty() ? 0.0 : t.back() - t.front(); }
  /// Distance covered between the first sample and `time` (trapezoidal).
  double distance_to(double time) const;
};

LeaderTrajectory load_leader_trajectory(const std::filesystem::path& path);
void save_leader_trajectory(const std::filesystem::path& path, const LeaderTrajectory& traj);

LeaderTrajectory constant_leader(double speed, double duration);

/// Stop-and-go background: raised-cosine speed dips travelling upstream at
/// `wave_speed`. Dip k is centred at x0 + wave_speed t.
struct WaveField {
  struct Wave {
    double x0 = 0.0;
    double width = 1000.0;  // full support [m]
    double depth = 20.0;    // [m/s]
  };
  double v_free = 30.0;
  double v_floor = 0.0;
  double wave_speed = -5.0;
  std::vector<Wave> waves;

  double speed(double x, double t) const;
  /// Mean of speed() over [a, b] at time t.
  double segment_mean(double a, double b, double t) const;
};

struct StopAndGoParams {
  double duration = 900.0;   // [s]
  double v_free = 30.0;
  double v_floor = 0.0;
  double depth_min = 23.0;
  double depth_max = 25.0;
  double width_min = 800.0;
  double width_max = 1200.0;
  double spacing_min = 1500.0;
  double spacing_max = 3000.0;
  double first_wave = 1500.0;  // initial distance from the leader to the first dip [m]
  double wave_speed = -5.0;

  void validate() const;
};

struct SyntheticLeader {
  LeaderTrajectory trajectory;
  WaveField field;
};

/// Drives a leader starting at x = 0 through a random wave field and
/// records its speed at 10 Hz. Deterministic in `seed`.
SyntheticLeader generate_stop_and_go(std::uint64_t seed, const StopAndGoParams& params);

}  // namespace wavectl::sim
