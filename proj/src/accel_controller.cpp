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

#include "wavectl/accel_controller.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wavectl::accel {

void BaseControllerConfig::validate() const {
  if (!(k > 0 && k2 > 0)) throw std::invalid_argument("base controller: k, k2 must be > 0");
  if (!(a_min < 0 && a_max > 0)) throw std::invalid_argument("base controller: need a_min < 0 < a_max");
  if (!(a_l_min < 0)) throw std::invalid_argument("base controller: a_l_min must be < 0");
  if (!(s0 > 0 && a_lead_tau >= 0 && target_ema_tau > 0 && sensor_range > 0)) {
    throw std::invalid_argument("base controller: s0, tau and range must be positive");
  }
}

void LcConfig::validate() const {
  if (!(c >= 0 && c <= 1)) throw std::invalid_argument("lane change: c must lie in [0, 1]");
  if (!(t_star > 0 && dv_star > 0 && h_safe > 0 && C_safe > 0 && eps > 0 && jerk_threshold > 0 &&
        gap_jump > 0)) {
    throw std::invalid_argument("lane change: constants must be positive");
  }
  if (!(alpha_cap > 0 && alpha_cap < 1)) throw std::invalid_argument("lane change: alpha_cap in (0, 1)");
}

double safe_speed(const LocalObservation& obs, const BaseControllerConfig& cfg) {
  const double reach = obs.h - cfg.s0 + 0.5 * obs.v_lead * obs.v_lead / std::abs(cfg.a_l_min);
  return std::sqrt(2.0 * std::abs(cfg.a_min) * std::max(reach, 0.0));
}

double safe_accel(const LocalObservation& obs, const BaseControllerConfig& cfg) {
  if (obs.h <= cfg.s0) return cfg.a_min;
  const double v_safe = safe_speed(obs, cfg);
  // d/dt of v_safe along h' = v_lead - v and v_lead' = a_lead.
  const double reach_rate = (obs.v_lead - obs.v) + obs.v_lead * obs.a_lead / std::abs(cfg.a_l_min);
  const double v_safe_rate = std::abs(cfg.a_min) * reach_rate / v_safe;
  return -cfg.k * (obs.v - v_safe) + v_safe_rate;
}

double target_accel(const LocalObservation& obs, const BaseControllerConfig& cfg) {
  return -cfg.k * (obs.v - obs.v_target);
}

double min_brake_accel(const LocalObservation& obs, const BaseControllerConfig& cfg) {
  double reach = obs.h - cfg.s0;
  if (obs.a_lead < 0.0) reach += 0.5 * obs.v_lead * obs.v_lead / -obs.a_lead;
  if (reach <= 0.0) return cfg.a_min;
  return -0.5 * obs.v * obs.v / reach;
}

MpcAnticipation mpc_anticipation(const LocalObservation& obs, const BaseControllerConfig& cfg) {
  const double p2 = obs.v_lead - obs.v;
  const double usable = obs.h - cfg.s0;
  auto close_gap = [&] {
    if (usable <= 0.0) return cfg.a_min;
    return obs.a_lead - (obs.v - obs.v_lead) * (obs.v - obs.v_lead) / (2.0 * usable);
  };

  if (obs.a_lead < 0.0) {
    const double brake = min_brake_accel(obs, cfg);
    // A stopped, braking leader makes P1 undefined; the minimal-brake
    // branch is the only one still defined.
    if (obs.v_lead <= 0.0) return {brake, MpcBranch::MinBrake};
    const double p1 = brake - obs.a_lead * obs.v / obs.v_lead;
    if (p1 > 0.0) return {brake, MpcBranch::MinBrake};
    if (p2 >= 0.0) return {obs.a_lead * obs.v / obs.v_lead, MpcBranch::ScaledLead};
    return {close_gap(), MpcBranch::CloseGapLeadBraking};
  }
  if (p2 < 0.0) return {close_gap(), MpcBranch::CloseGapLeadSteady};
  return {std::min(cfg.a_max, obs.a_lead * (1.0 + cfg.k2 * p2)), MpcBranch::Follow};
}

double mpc_anticipation_accel(const LocalObservation& obs, const BaseControllerConfig& cfg) {
  return mpc_anticipation(obs, cfg).accel;
}

CommandBreakdown command_breakdown(const LocalObservation& obs, const BaseControllerConfig& cfg) {
  CommandBreakdown out;
  out.a_target = target_accel(obs, cfg);
  double raw = out.a_target;
  if (obs.minicar) {
    out.a_safe = safe_accel(obs, cfg);
    out.a_mpc = mpc_anticipation_accel(obs, cfg);
    raw = std::min({out.a_safe, out.a_target, out.a_mpc});
  } else {
    out.a_safe = cfg.a_max;
    out.a_mpc = cfg.a_max;
  }
  out.a_cmd = std::clamp(raw, cfg.a_min, cfg.a_max);
  return out;
}

double commanded_accel(const LocalObservation& obs, const BaseControllerConfig& cfg) {
  return command_breakdown(obs, cfg).a_cmd;
}

double lc_f1(double s, double v, const LcConfig& cfg) {
  if (v <= 0.0) return 1.0;
  return std::tanh(cfg.t_star * s / v);
}

double lc_f2(double dv, double s, const LcConfig& cfg) {
  if (dv < 0.0) return 0.5 * std::tanh(cfg.dv_star * s / std::abs(dv)) + 0.5;
  return 0.5 * std::tanh(dv) + 0.5;
}

double lc_smoothing_factor(double s, double v, double dv, const LcConfig& cfg) {
  const double alpha = cfg.c * lc_f1(s, v, cfg) + (1.0 - cfg.c) * lc_f2(dv, s, cfg);
  return std::clamp(alpha, 0.0, cfg.alpha_cap);
}

namespace {

bool lc_event_is_safe(const LocalObservation& obs, const LcConfig& cfg) {
  const double dv = obs.v_lead - obs.v;
  if (dv < 0.0) return obs.h / std::abs(dv) > cfg.C_safe;
  if (obs.v <= 0.0) return true;
  return obs.h / obs.v > cfg.h_safe;
}

}  // namespace

LcStep lc_detect_and_filter(double a_raw, const LocalObservation& obs, double dt,
                            const LcConfig& cfg, LcFilterState& state) {
  LcStep out;
  out.u = a_raw;
  if (!state.has_history) {
    state.has_history = true;
  } else if (state.active) {
    if (!obs.minicar || !lc_event_is_safe(obs, cfg)) {
      // Safety is no longer established: hand control back to the base command.
      state.active = false;
    } else {
      out.alpha = lc_smoothing_factor(obs.h, obs.v, obs.v_lead - obs.v, cfg);
      out.u = out.alpha * state.prev_u + (1.0 - out.alpha) * a_raw;
      ++state.active_ticks;
      if (std::abs(a_raw - out.u) <= cfg.eps) state.active = false;
    }
  } else if (obs.minicar) {
    bool discontinuity;
    if (!state.prev_minicar) {
      discontinuity = true;
    } else {
      const double expected = state.prev_gap + (state.prev_v_lead - state.prev_v) * dt;
      discontinuity = std::abs(obs.h - expected) > cfg.gap_jump;
    }
    const bool significant = std::abs(a_raw - state.prev_u) / dt > cfg.jerk_threshold;
    if (discontinuity && significant && lc_event_is_safe(obs, cfg)) {
      state.active = true;
      ++state.activations;
      state.active_ticks = 1;
      out.activated_now = true;
      out.alpha = lc_smoothing_factor(obs.h, obs.v, obs.v_lead - obs.v, cfg);
      out.u = out.alpha * state.prev_u + (1.0 - out.alpha) * a_raw;
      if (std::abs(a_raw - out.u) <= cfg.eps) state.active = false;
    }
  }
  out.active = state.active || out.activated_now;
  state.prev_u = out.u;
  state.prev_gap = obs.h;
  state.prev_v = obs.v;
  state.prev_v_lead = obs.v_lead;
  state.prev_minicar = obs.minicar;
  return out;
}

AccelController::AccelController(BaseControllerConfig base, LcConfig lc, bool lane_change_filter)
    : base_(base), lc_(lc), use_filter_(lane_change_filter) {
  base_.validate();
  lc_.validate();
}

AccelTrace AccelController::step(LocalObservation raw, std::optional<double> plan_target, double dt) {
  LocalObservation obs = raw;
  if (obs.minicar) {
    if (!a_lead_filtered_ || base_.a_lead_tau <= 0.0) {
      a_lead_filtered_ = raw.a_lead;
    } else {
      const double w = dt / (base_.a_lead_tau + dt);
      *a_lead_filtered_ += w * (raw.a_lead - *a_lead_filtered_);
    }
    // The filter smooths noise but must not hide hard braking from the
    // safety term, so the rawer of the two wins when it is lower.
    obs.a_lead = std::min(raw.a_lead, *a_lead_filtered_);
  } else {
    a_lead_filtered_.reset();
    obs.a_lead = 0.0;
  }

  // Fallback target: slow average of the leader speed (own speed if alone).
  const double sample = obs.minicar ? obs.v_lead : obs.v;
  if (!target_ema_) {
    target_ema_ = sample;
  } else {
    *target_ema_ += dt / (base_.target_ema_tau + dt) * (sample - *target_ema_);
  }

  AccelTrace tr;
  tr.plan_target = plan_target.has_value();
  obs.v_target = plan_target.value_or(*target_ema_);
  tr.v_target = obs.v_target;
  tr.parts = command_breakdown(obs, base_);
  tr.u = tr.parts.a_cmd;
  if (use_filter_) {
    const auto lc = lc_detect_and_filter(tr.parts.a_cmd, obs, dt, lc_, lc_state_);
    tr.u = lc.u;
    tr.lc_active = lc.active;
    tr.alpha = lc.alpha;
  }
  return tr;
}

}  // namespace wavectl::accel
