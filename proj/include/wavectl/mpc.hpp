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

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "wavectl/accel_controller.hpp"

namespace wavectl::mpc {

/// Non-negative least squares, min ||E w - f|| subject to w >= 0, by the
/// Lawson-Hanson active-set method.
struct NnlsResult {
  Eigen::VectorXd w;
  Eigen::VectorXd residual;  // E w - f
  int iterations = 0;
  bool converged = false;
};
NnlsResult nnls(const Eigen::MatrixXd& E, const Eigen::VectorXd& f, int max_iterations = 0);

/// Least-distance program: min ||z|| subject to G z >= h. Empty when the
/// constraints are infeasible.
std::optional<Eigen::VectorXd> least_distance(const Eigen::MatrixXd& G, const Eigen::VectorXd& h);

/// Receding-horizon problem for one vehicle with double-integrator dynamics
///   x_{i+1} = x_i + v_i dt + u_i dt^2 / 2,  v_{i+1} = v_i + u_i dt
/// minimizing sum u_i^2 dt. State constraints hold at steps 1..N:
///   0 <= v_i <= v_limit
///   leader_x[i-1] - x_i - length >= s_min + h_min v_i         (hard)
///   leader_x[i-1] - x_i - length <= d_max + h_max v_i + slack (soft)
/// and a_min <= u_i <= a_max.
struct QpProblem {
  int N = 20;
  double dt = 0.5;
  double x0 = 0.0;
  double v0 = 0.0;
  std::vector<double> leader_x;  // predicted leader front position at steps 1..N
  double v_limit = 33.0;
  double a_min = -3.0;
  double a_max = 1.5;
  double length = 5.0;
  double s_min = 4.0;
  double h_min = 1.0;
  bool max_gap = true;
  double d_max = 20.0;
  double h_max = 3.0;
  double slack_weight = 100.0;

  void validate() const;
};

struct QpSolution {
  bool feasible = false;
  std::vector<double> u;
  double slack = 0.0;
  double objective = 0.0;     // sum u^2 dt + slack_weight slack^2
  double max_violation = 0.0; // largest hard-constraint violation
  int iterations = 0;
};

/// Linear constraint rows a^T u >= b over the control sequence, in the
/// order used by the solver. Exposed for KKT checks in tests.
struct ConstraintSet {
  Eigen::MatrixXd G;  // rows over [u_0..u_{N-1}, slack]
  Eigen::VectorXd h;
  std::vector<int> kind;  // see ConstraintKind
};
enum ConstraintKind { kSpeedMin = 0, kSpeedMax = 1, kMinGap = 2, kMaxGap = 3, kAccelMin = 4, kAccelMax = 5, kSlack = 6 };
ConstraintSet build_constraints(const QpProblem& p);

QpSolution mpc_solve(const QpProblem& p);

/// Ego position/speed after applying `u` from (x0, v0).
std::vector<double> rollout_positions(const QpProblem& p, const std::vector<double>& u);
std::vector<double> rollout_speeds(const QpProblem& p, const std::vector<double>& u);

/// Leader positions at t = dt, 2dt, ..., N dt. Constant-acceleration
/// extrapolation for the first `short_horizon` seconds, travel at the
/// target speed field beyond `long_horizon`, linear blend in between.
/// Without a target field the long-term part holds the current speed.
std::vector<double> leader_predict(double x_l, double v_l, double a_l,
                                   const std::function<double(double)>& target_speed, int N, double dt,
                                   double short_horizon = 2.0, double long_horizon = 4.0);

struct MpcConfig {
  int N = 20;
  double dt = 0.5;
  double v_limit = 33.0;
  double a_min = -3.0;
  double a_max = 1.5;
  double s_min = 4.0;
  double h_min = 1.0;
  double d_max = 20.0;
  double h_max = 3.0;
  double slack_weight = 100.0;
  double length = 5.0;
  double sensor_range = 80.0;
};

struct MpcTrace {
  double u = 0.0;
  bool feasible = true;
  bool fallback = false;
  bool leader = false;
  double slack = 0.0;
};

/// Receding-horizon wrapper: builds a QpProblem each tick and dispatches the
/// first control. Infeasible problems fall back to the acceleration-based
/// base command.
class MpcController {
 public:
  MpcController(MpcConfig cfg, accel::BaseControllerConfig fallback);

  /// `gap`, `v_lead`, `a_lead` describe the detected leader; `target_speed`
  /// maps a position to the planned speed (may be empty).
  MpcTrace step(double x, double v, std::optional<double> gap, double v_lead, double a_lead,
                const std::function<double(double)>& target_speed, double dt);

 private:
  MpcConfig cfg_;
  accel::AccelController fallback_;
};

}  // namespace wavectl::mpc
