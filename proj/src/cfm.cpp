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

#include "wavectl/cfm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace wavectl::cfm {

void IdmParams::validate() const {
  if (!(v0 > 0 && T > 0 && s0 > 0 && a > 0 && b > 0)) {
    throw std::invalid_argument("idm: v0, T, s0, a, b must be strictly positive");
  }
  if (!(delta >= 1.0)) {
    throw std::invalid_argument("idm: delta must be >= 1");
  }
}

void OvmParams::validate() const {
  if (!(alpha > 0 && beta >= 0 && nu > 0 && v_max > 0)) {
    throw std::invalid_argument("ovm: need alpha > 0, beta >= 0, nu > 0, v_max > 0");
  }
}

double idm_desired_gap(double v, double dv, const IdmParams& p) {
  return p.s0 + v * p.T + std::max(0.0, v * dv) / (2.0 * std::sqrt(p.a * p.b));
}

double idm_accel(double gap, double v, double dv, const IdmParams& p) {
  if (!(gap > 0.0)) {
    throw CollisionError("idm_accel: non-positive gap " + std::to_string(gap));
  }
  const double s_star = idm_desired_gap(v, dv, p);
  const double ratio = s_star / gap;
  return p.a * (1.0 - std::pow(v / p.v0, p.delta) - ratio * ratio);
}

double idm_equilibrium_gap(double v, const IdmParams& p) {
  if (v < 0.0 || v >= p.v0) {
    throw std::domain_error("idm_equilibrium_gap: no equilibrium for v=" + std::to_string(v));
  }
  return (p.s0 + v * p.T) / std::sqrt(1.0 - std::pow(v / p.v0, p.delta));
}

double bando_optimal_velocity(double h, const OvmParams& p) {
  const double tld = std::tanh(p.l + p.d);
  return p.v_max * (std::tanh(p.k * h - p.d) + tld) / (1.0 + tld);
}

double bando_optimal_velocity_slope(double h, const OvmParams& p) {
  const double tld = std::tanh(p.l + p.d);
  const double t = std::tanh(p.k * h - p.d);
  return p.v_max * p.k * (1.0 - t * t) / (1.0 + tld);
}

double ovm_ftl_accel(double gap, double v, double v_lead, const OvmParams& p) {
  if (!(gap > 0.0)) {
    throw CollisionError("ovm_ftl_accel: non-positive gap " + std::to_string(gap));
  }
  return p.alpha * (bando_optimal_velocity(gap, p) - v) +
         p.beta * (v_lead - v) / std::pow(gap, p.nu);
}

}  // namespace wavectl::cfm
