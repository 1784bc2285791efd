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

#include <optional>

namespace wavectl::accel {

struct BaseControllerConfig {
  double k = 1.0;         // speed tracking gain [1/s]
  double k2 = 0.1;        // anticipation gain [s/m]
  double s0 = 4.0;        // safety distance [m]
  double a_min = -3.0;    // ego braking limit [m/s^2], negative
  double a_max = 1.5;     // ego acceleration limit [m/s^2]
  double a_l_min = -6.0;  // assumed worst leader braking [m/s^2], negative
  double a_lead_tau = 0.5;     // low-pass time constant on observed leader accel, braking bypasses it [s]
  double target_ema_tau = 30.0;  // fallback target speed averaging [s]
  double sensor_range = 80.0;    // leader detection range [m]

  void validate() const;
};

struct LcConfig {
  double c = 0.75;
  double t_star = 1.32;
  double dv_star = 10.3;
  double h_safe = 2.0;    // [s]
  double C_safe = 4.5;    // [s]
  double eps = 0.05;      // deactivation threshold [m/s^2]
  double jerk_threshold = 4.0;  // [m/s^3]
  double gap_jump = 5.0;  // unexplained gap change counted as a discontinuity [m]
  double alpha_cap = 0.999;  // keeps the smoothing factor strictly below 1

  void validate() const;
};

/// What the vehicle sees at one tick. `h` is the bumper-to-bumper gap and is
/// meaningful only when `minicar` (leader detected) is set.
struct LocalObservation {
  double v = 0.0;
  double v_lead = 0.0;
  double a_lead = 0.0;
  double h = 0.0;
  double v_target = 0.0;
  bool minicar = false;
};

/// Safety speed: the fastest speed from which braking at a_min still stops
/// behind a leader braking at a_l_min.
double safe_speed(const LocalObservation& obs, const BaseControllerConfig& cfg);
double safe_accel(const LocalObservation& obs, const BaseControllerConfig& cfg);
double target_accel(const LocalObservation& obs, const BaseControllerConfig& cfg);

/// Branch of the anticipation law that produced a_MPC, in printed order.
enum class MpcBranch { MinBrake = 1, ScaledLead = 2, CloseGapLeadBraking = 3, CloseGapLeadSteady = 4, Follow = 5 };

struct MpcAnticipation {
  double accel = 0.0;
  MpcBranch branch = MpcBranch::Follow;
};

/// Deceleration that stops within the leader's stopping distance plus the
/// usable gap. Only meaningful for a_lead < 0.
double min_brake_accel(const LocalObservation& obs, const BaseControllerConfig& cfg);
MpcAnticipation mpc_anticipation(const LocalObservation& obs, const BaseControllerConfig& cfg);
double mpc_anticipation_accel(const LocalObservation& obs, const BaseControllerConfig& cfg);

struct CommandBreakdown {
  double a_safe = 0.0;
  double a_target = 0.0;
  double a_mpc = 0.0;
  double a_cmd = 0.0;  // clamped min of the three
};

/// min(a_safe, a_target, a_MPC) clamped to [a_min, a_max]. Without a leader
/// only the target component is used.
CommandBreakdown command_breakdown(const LocalObservation& obs, const BaseControllerConfig& cfg);
double commanded_accel(const LocalObservation& obs, const BaseControllerConfig& cfg);

/// Time-headway factor tanh(t* s / v); saturates to 1 when v = 0.
double lc_f1(double s, double v, const LcConfig& cfg);
/// Relative-speed factor; dv = v_lead - v (negative when closing).
double lc_f2(double dv, double s, const LcConfig& cfg);
double lc_smoothing_factor(double s, double v, double dv, const LcConfig& cfg);

struct LcFilterState {
  bool active = false;
  bool has_history = false;
  double prev_u = 0.0;
  double prev_gap = 0.0;
  double prev_v = 0.0;
  double prev_v_lead = 0.0;
  bool prev_minicar = false;
  int active_ticks = 0;
  int activations = 0;
};

struct LcStep {
  double u = 0.0;
  bool active = false;
  bool activated_now = false;
  double alpha = 0.0;
};

/// Lane-change recovery filter applied to the raw base command `a_raw`.
/// The observation carries the current gap and relative speed.
LcStep lc_detect_and_filter(double a_raw, const LocalObservation& obs, double dt,
                            const LcConfig& cfg, LcFilterState& state);

/// Per-tick record of the controller, exported as a trace row.
struct AccelTrace {
  CommandBreakdown parts;
  double u = 0.0;
  bool lc_active = false;
  double alpha = 0.0;
  double v_target = 0.0;
  bool plan_target = false;
};

/// One acceleration-based vehicle controller instance: filters the observed
/// leader acceleration, supplies a fallback target speed when no Speed Plan
/// is available, composes the base command and runs the lane-change filter.
class AccelController {
 public:
  AccelController(BaseControllerConfig base, LcConfig lc, bool lane_change_filter = true);

  /// `raw` carries the sensed quantities; its v_target is ignored in favour
  /// of `plan_target` or the fallback estimate.
  AccelTrace step(LocalObservation raw, std::optional<double> plan_target, double dt);

  const LcFilterState& filter_state() const { return lc_state_; }
  const BaseControllerConfig& config() const { return base_; }

 private:
  BaseControllerConfig base_;
  LcConfig lc_;
  bool use_filter_;
  LcFilterState lc_state_;
  std::optional<double> a_lead_filtered_;
  std::optional<double> target_ema_;
};

}  // namespace wavectl::accel
