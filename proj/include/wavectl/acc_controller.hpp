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

#include <array>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace wavectl::acc {

inline constexpr double kMphToMps = 0.44704;
inline constexpr int kSpeedSettingMin = 20;
inline constexpr int kSpeedSettingMax = 73;

/// Driver-facing ACC setpoints: speed in whole mph and the gap bar (1..3).
struct AccSetpoints {
  int speed_setting = 40;
  int gap_setting = 1;

  bool operator==(const AccSetpoints&) const = default;
};

/// Time gap [s] associated with a gap bar.
double gap_bar_time(int bar);
void validate_setpoints(const AccSetpoints& sp);

struct AccObservation {
  double v = 0.0;                 // ego speed [m/s]
  std::optional<double> v_s;      // planner target [m/s], empty when unknown
  bool minicar = false;           // leader detected
  AccSetpoints current;           // s, g
};

struct AccPlantParams {
  double k_p = 0.4;     // speed mode gain [1/s]
  double k_g = 0.1;     // gap mode gain on gap error [1/s^2]
  double k_v = 0.5;     // gap mode gain on relative speed [1/s]
  double d_off = 3.0;   // standstill gap [m]
  double switch_range = 120.0;  // gap mode possible below this gap [m]
  double a_min = -4.0;
  double a_max = 2.0;
  double press_latency = 0.5;  // [s] per button-press batch

  void validate() const;
};

/// Longitudinal response of the stock ACC. `d_el` is the gap to the leader,
/// empty when no leader is present.
double acc_plant_accel(double v_e, double v_l, std::optional<double> d_el,
                       const AccSetpoints& setpoints, const AccPlantParams& p);

/// Clips a requested speed setting [mph] into a band around the recent mean
/// speed and the absolute range [20, 73]. `recent_mph` holds up to the last
/// ten speed samples; zeros and empty samples are skipped. Returns empty
/// when no valid sample exists (the caller keeps its previous setting).
std::optional<int> clip_speed_setting(double action_mph, std::span<const std::optional<double>> recent_mph);

/// Same as above without rounding: the clipped continuous value.
std::optional<double> clip_speed_value(double action_mph, std::span<const std::optional<double>> recent_mph);

/// Hand-written decision rule standing in for a trained policy.
AccSetpoints heuristic_policy(const AccObservation& obs, std::span<const std::optional<double>> recent_mph);

struct RewardParams {
  double c1 = 0.05;
  double c2 = 0.01;
  double c3 = 0.1;
  double c4 = 1.0;
  double h_min = 5.0;
  double h_max = 120.0;
};

double reward(double accel, double v_av, double v_sp, std::span<const double> fuel_rates,
              double gap, const RewardParams& p);

/// Button presses realizing a setpoint change: single 1-mph taps, 5-mph holds
/// and gap-bar rotations.
struct PressPlan {
  int single_presses = 0;
  int hold_presses = 0;
  int gap_presses = 0;
  int direction = 0;  // +1 speed up, -1 down, 0 none

  int total() const { return single_presses + hold_presses + gap_presses; }
};
PressPlan plan_presses(const AccSetpoints& from, const AccSetpoints& to);

/// A decision function from observation to raw (unclipped) setpoints.
using Policy = std::function<AccSetpoints(const AccObservation&, std::span<const std::optional<double>>)>;

struct AccTraceRow {
  double v = 0.0;
  std::optional<double> v_s;
  bool minicar = false;
  AccSetpoints requested;
  AccSetpoints active;
  double accel = 0.0;
  bool press_batch = false;
  PressPlan presses;
};

/// One ACC-equipped vehicle: policy, setpoint actuation with press latency
/// and the plant.
class AccController {
 public:
  AccController(AccPlantParams plant, AccSetpoints initial, Policy policy = heuristic_policy,
                double detection_range = 80.0);

  AccTraceRow step(double t, double v, std::optional<double> v_lead, std::optional<double> gap,
                   std::optional<double> v_target);

  const AccSetpoints& active() const { return active_; }

 private:
  AccPlantParams plant_;
  AccSetpoints active_;
  Policy policy_;
  double detection_range_;
  std::deque<std::optional<double>> recent_mph_;
  std::optional<std::pair<double, AccSetpoints>> pending_;
};

}  // namespace wavectl::acc
