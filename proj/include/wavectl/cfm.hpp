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

#include <stdexcept>

namespace wavectl::cfm {

/// Thrown when a car-following law is evaluated at a non-positive gap.
class CollisionError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Intelligent Driver Model parameters.
///
/// The relative speed passed to idm_accel() is the closing speed
/// dv = v - v_lead: positive when the follower approaches its leader.
struct IdmParams {
  double v0 = 30.0;    // desired speed [m/s]
  double T = 1.0;      // time gap [s]
  double s0 = 2.0;     // minimum spacing [m]
  double delta = 4.0;  // acceleration exponent
  double a = 1.3;      // maximum acceleration [m/s^2]
  double b = 2.0;      // comfortable deceleration [m/s^2], positive

  void validate() const;
};

/// Optimal-velocity / follow-the-leader parameters.
///
/// The relative speed used by ovm_ftl_accel() is v_lead - v (opening speed),
/// the opposite sign convention to IDM.
struct OvmParams {
  double alpha = 1.0;  // relaxation gain [1/s]
  double beta = 20.0;  // follow-the-leader coefficient [m^nu/s]
  double nu = 2.0;     // gap exponent
  double v_max = 32.0; // optimal velocity asymptote [m/s]
  double k = 0.05;     // [1/m]
  double d = 2.0;      // shape offset
  double l = 5.0;      // car length [m]

  void validate() const;
};

/// Desired dynamic gap s*(v, dv) of IDM.
double idm_desired_gap(double v, double dv, const IdmParams& p);

/// IDM acceleration for bumper-to-bumper gap `gap`, own speed `v` and
/// closing speed `dv` = v - v_lead. Throws CollisionError if gap <= 0.
double idm_accel(double gap, double v, double dv, const IdmParams& p);

/// Gap at which a follower at speed v and zero relative speed is in
/// equilibrium. Throws std::domain_error for v >= v0 or v < 0.
double idm_equilibrium_gap(double v, const IdmParams& p);

/// Bando optimal velocity V(h); defined for every h.
double bando_optimal_velocity(double h, const OvmParams& p);

/// d V / d h, used by the adjoint of the trajectory optimizer.
double bando_optimal_velocity_slope(double h, const OvmParams& p);

/// OVM-FtL: alpha (V(gap) - v) + beta (v_lead - v) / gap^nu.
double ovm_ftl_accel(double gap, double v, double v_lead, const OvmParams& p);

}  // namespace wavectl::cfm
