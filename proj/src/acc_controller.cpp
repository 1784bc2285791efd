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

#include "wavectl/acc_controller.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace wavectl::acc {

double gap_bar_time(int bar) {
  static constexpr std::array<double, 3> kTimes = {1.2, 1.5, 2.0};
  if (bar < 1 || bar > 3) throw std::invalid_argument("gap bar must be 1, 2 or 3");
  return kTimes[static_cast<std::size_t>(bar - 1)];
}

void validate_setpoints(const AccSetpoints& sp) {
  if (sp.speed_setting < kSpeedSettingMin || sp.speed_setting > kSpeedSettingMax) {
    throw std::invalid_argument("speed setting out of range: " + std::to_string(sp.speed_setting));
  }
  gap_bar_time(sp.gap_setting);
}

void AccPlantParams::validate() const {
  if (!(k_p > 0 && k_g > 0 && k_v > 0)) throw std::invalid_argument("acc plant: gains must be positive");
  if (!(a_min < 0 && a_max > 0 && switch_range > 0 && press_latency >= 0)) {
    throw std::invalid_argument("acc plant: invalid bounds");
  }
}

double acc_plant_accel(double v_e, double v_l, std::optional<double> d_el,
                       const AccSetpoints& setpoints, const AccPlantParams& p) {
  validate_setpoints(setpoints);
  const double v_ref = setpoints.speed_setting * kMphToMps;
  double a = p.k_p * (v_ref - v_e);
  if (d_el && *d_el < p.switch_range) {
    if (!(*d_el > 0.0)) throw std::domain_error("acc_plant_accel: non-positive gap");
    const double g_ref = gap_bar_time(setpoints.gap_setting);
    const double a_gap = p.k_g * (*d_el - g_ref * v_e - p.d_off) + p.k_v * (v_l - v_e);
    a = std::min(a, a_gap);
  }
  return std::clamp(a, p.a_min, p.a_max);
}

namespace {

struct ClipBand {
  double lower = 0.0;
  double upper = 0.0;
};

std::optional<ClipBand> clip_band(std::span<const std::optional<double>> recent_mph) {
  double sum = 0.0;
  int n = 0;
  for (const auto& s : recent_mph) {
    if (s && *s != 0.0) {
      sum += *s;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  const double mean = sum / n;
  return ClipBand{mean - 15.0, mean + 5.0};
}

}  // namespace

std::optional<double> clip_speed_value(double action_mph, std::span<const std::optional<double>> recent_mph) {
  const auto band = clip_band(recent_mph);
  if (!band) return std::nullopt;
  const double clipped = std::min(std::max(action_mph, band->lower), band->upper);
  return std::min(std::max(clipped, static_cast<double>(kSpeedSettingMin)),
                  static_cast<double>(kSpeedSettingMax));
}

std::optional<int> clip_speed_setting(double action_mph, std::span<const std::optional<double>> recent_mph) {
  const auto band = clip_band(recent_mph);
  if (!band) return std::nullopt;
  const double v = *clip_speed_value(action_mph, recent_mph);
  int setting = static_cast<int>(std::lround(v));
  // Keep the rounded setting inside the band whenever an integer fits there.
  const int lo = std::max(kSpeedSettingMin, static_cast<int>(std::ceil(band->lower)));
  const int hi = std::min(kSpeedSettingMax, static_cast<int>(std::floor(band->upper)));
  if (lo <= hi) setting = std::clamp(setting, lo, hi);
  return setting;
}

AccSetpoints heuristic_policy(const AccObservation& obs, std::span<const std::optional<double>> recent_mph) {
  if (!obs.v_s) return obs.current;
  AccSetpoints out = obs.current;
  const double vs_mph = *obs.v_s / kMphToMps;
  const double v_mph = obs.v / kMphToMps;
  if (const auto clipped = clip_speed_setting(std::round(vs_mph), recent_mph)) {
    out.speed_setting = *clipped;
  }
  out.gap_setting = vs_mph < v_mph - 5.0 ? 3 : 1;
  return out;
}

double reward(double accel, double v_av, double v_sp, std::span<const double> fuel_rates,
              double gap, const RewardParams& p) {
  if (fuel_rates.empty()) throw std::invalid_argument("reward: need at least one vehicle");
  double fuel = 0.0;
  for (double e : fuel_rates) fuel += e;
  const bool intervene = gap <= p.h_min || gap >= p.h_max;
  return 1.0 - p.c1 * accel * accel - p.c2 * (v_av - v_sp) * (v_av - v_sp) -
         p.c3 / static_cast<double>(fuel_rates.size()) * fuel - (intervene ? p.c4 : 0.0);
}

PressPlan plan_presses(const AccSetpoints& from, const AccSetpoints& to) {
  PressPlan plan;
  const int delta = to.speed_setting - from.speed_setting;
  const int mag = std::abs(delta);
  plan.direction = delta > 0 ? 1 : (delta < 0 ? -1 : 0);
  plan.hold_presses = mag / 5;
  plan.single_presses = mag % 5;
  plan.gap_presses = ((to.gap_setting - from.gap_setting) % 3 + 3) % 3;
  return plan;
}

AccController::AccController(AccPlantParams plant, AccSetpoints initial, Policy policy,
                             double detection_range)
    : plant_(plant), active_(initial), policy_(std::move(policy)), detection_range_(detection_range) {
  plant_.validate();
  validate_setpoints(active_);
}

AccTraceRow AccController::step(double t, double v, std::optional<double> v_lead, std::optional<double> gap,
                                std::optional<double> v_target) {
  AccTraceRow row;
  if (pending_ && t + 1e-9 >= pending_->first) {
    active_ = pending_->second;
    pending_.reset();
  }

  recent_mph_.push_back(v > 0.0 ? std::optional<double>(v / kMphToMps) : std::nullopt);
  while (recent_mph_.size() > 10) recent_mph_.pop_front();
  const std::vector<std::optional<double>> recent(recent_mph_.begin(), recent_mph_.end());

  const bool minicar = gap.has_value() && *gap <= detection_range_;
  AccObservation obs{v, v_target, minicar, active_};
  row.v = v;
  row.v_s = v_target;
  row.minicar = minicar;

  AccSetpoints requested = policy_(obs, recent);
  if (auto clipped = clip_speed_setting(requested.speed_setting, recent)) {
    requested.speed_setting = *clipped;
  } else {
    requested.speed_setting = active_.speed_setting;
  }
  requested.gap_setting = std::clamp(requested.gap_setting, 1, 3);
  row.requested = requested;

  // One batch in flight at a time; a new batch starts once the last landed.
  if (!pending_ && !(requested == active_)) {
    row.presses = plan_presses(active_, requested);
    row.press_batch = true;
    pending_ = {t + plant_.press_latency, requested};
  }

  row.active = active_;
  row.accel = acc_plant_accel(v, v_lead.value_or(0.0), gap, active_, plant_);
  return row;
}

}  // namespace wavectl::acc
