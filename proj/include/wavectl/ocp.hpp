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
#include <string>
#include <vector>

#include "wavectl/cfm.hpp"
#include "wavectl/energy.hpp"
#include "wavectl/leader.hpp"

namespace wavectl::ocp {

enum class ObjectiveKind { AccelProxy, Fuel };
enum class GradientKind { Adjoint, FiniteDifference };

/// Platoon trajectory problem. Followers 0..n-1 sit behind a prescribed
/// leader; AVs are driven by piecewise-constant accelerations, humans follow
/// the Bando follow-the-leader model. Explicit Euler on the leader's grid.
struct OcpProblem {
  std::vector<double> leader_x;  // K + 1 samples
  std::vector<double> leader_v;
  std::vector<char> is_av;       // per follower, front to back
  std::vector<double> x0, v0;    // initial follower states
  cfm::OvmParams ovm;
  double dt = 0.1;
  int pieces = 60;               // control pieces over the horizon
  double u_min = -3.0;
  double u_max = 1.5;
  // AV gap envelope h_min v + d_min <= gap <= h_max v + d_max.
  double h_min = 0.5;
  double h_max = 4.0;
  double d_min = 3.0;
  double d_max = 40.0;
  double penalty = 10.0;         // weight on squared violations
  ObjectiveKind objective = ObjectiveKind::AccelProxy;
  energy::EnergyModel energy_model;

  int steps() const { return static_cast<int>(leader_v.size()) - 1; }
  int followers() const { return static_cast<int>(is_av.size()); }
  int av_count() const;
  int steps_per_piece() const { return steps() / pieces; }
  std::size_t control_size() const { return static_cast<std::size_t>(av_count()) * static_cast<std::size_t>(pieces); }
  double horizon() const { return steps() * dt; }
  void validate() const;
};

struct OcpSetup {
  std::uint64_t seed = 1;
  int followers = 22;
  int avs = 1;               // spread evenly, the first directly behind the leader
  double horizon = 300.0;    // [s]
  int pieces = 150;
  sim::StopAndGoParams leader = default_leader();
  ObjectiveKind objective = ObjectiveKind::AccelProxy;
  cfm::OvmParams ovm;

  /// Milder stop-and-go profile than the simulator default.
  static sim::StopAndGoParams default_leader();
};

/// Builds the platoon at Bando equilibrium behind a synthetic leader.
OcpProblem make_problem(const OcpSetup& setup);

/// Gap at which the Bando optimal velocity equals v.
double bando_equilibrium_gap(double v, const cfm::OvmParams& p);

struct OcpEval {
  double objective = 0.0;  // integral of AV u^2 plus human A^2 (or fuel)
  double violation = 0.0;  // integral of squared constraint violations
  double total = 0.0;      // objective + penalty * violation
  bool collision = false;
  std::string diagnostic;
  double max_gap_violation = 0.0;    // [m]
  double max_speed_violation = 0.0;  // [m/s]
};

OcpEval ocp_objective(const std::vector<double>& u, const OcpProblem& p);
/// Objective of the same platoon with every AV replaced by a human.
double baseline_objective(const OcpProblem& p);

std::vector<double> gradient_adjoint(const std::vector<double>& u, const OcpProblem& p);
std::vector<double> gradient_fd(const std::vector<double>& u, const OcpProblem& p, double h = 1e-6);

struct GradCheck {
  int pieces = 0;
  double max_rel_error = 0.0;
  double max_abs_gradient = 0.0;
};
/// Adjoint versus central differences at random controls near the initial
/// guess. The relative error of entry j is |ga_j - gf_j| divided by the
/// largest of |ga_j|, |gf_j| and 1e-6 max|gf|.
GradCheck gradient_check(const OcpProblem& p, std::uint64_t seed);

/// Controls reproducing, piece by piece, the mean acceleration the AVs
/// would have as humans.
std::vector<double> human_mimic_guess(const OcpProblem& p);

/// Controls produced by simulating the AVs flagged in `generate` with a
/// gap-tracking law sampled at piece starts; the other AVs replay `u`.
std::vector<double> tracking_guess(const OcpProblem& p, std::vector<double> u, const std::vector<char>& generate);

/// Human mimic when it is collision-free, tracking guess otherwise.
std::vector<double> initial_guess(const OcpProblem& p);

struct States {
  std::vector<std::vector<double>> x, v, a;  // [step][follower]
};
States rollout(const std::vector<double>& u, const OcpProblem& p);

struct OcpResult {
  std::vector<double> u;
  std::vector<double> trace;  // accepted totals, first entry = start point
  OcpEval final_eval;
  int iterations = 0;
};

/// Projected gradient descent with Armijo backtracking. `active` selects the
/// AVs whose controls move (empty: all).
OcpResult ocp_optimize(const OcpProblem& p, std::vector<double> u0, int iterations,
                       GradientKind grad = GradientKind::Adjoint, const std::vector<char>& active = {});

struct SequentialResult {
  OcpResult result;
  std::vector<double> after_each_av;  // objective after optimizing AV 1..m
  std::vector<double> trace;          // concatenated accepted totals
};
/// One AV at a time front to back, then a joint pass over all AVs.
SequentialResult ocp_optimize_sequential(const OcpProblem& p, int iterations_per_av, int joint_iterations,
                                         GradientKind grad = GradientKind::Adjoint);

void write_schedule_csv(const std::filesystem::path& path, const OcpProblem& p, const std::vector<double>& u);
void write_trace_csv(const std::filesystem::path& path, const std::vector<double>& trace);

}  // namespace wavectl::ocp
