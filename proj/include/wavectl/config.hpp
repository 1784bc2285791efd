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
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wavectl/kpi.hpp"
#include "wavectl/ocp.hpp"
#include "wavectl/simulator.hpp"

namespace wavectl::config {

/// Raised for malformed files, unknown keys and values that fail validation.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Json = nlohmann::json;

/// Everything a single simulation needs.
struct RunConfig {
  sim::Scenario scenario;
  sim::RunOptions options;
  std::string energy_models;  // model file; empty: built-in portfolio
};

/// Trajectory optimization or receding-horizon MPC rollout.
struct OptimizeConfig {
  enum class Mode { Ocp, Mpc };
  Mode mode = Mode::Ocp;
  ocp::OcpSetup setup;
  int iterations = 100;        // per AV stage
  int joint_iterations = 100;  // final pass over all AVs
  bool sequential = true;
  ocp::GradientKind gradient = ocp::GradientKind::Adjoint;
  // problem-level overrides
  double u_min = -3.0;
  double u_max = 1.5;
  double h_min = 0.5;
  double h_max = 4.0;
  double d_min = 3.0;
  double d_max = 40.0;
  double penalty = 10.0;
  double audit_tolerance = 0.5;  // [m] gap-envelope slack accepted by the final audit
  // MPC rollout
  mpc::MpcConfig mpc;
  double mpc_leader_speed = 25.0;
  double mpc_initial_gap = 40.0;
  double mpc_initial_speed = 25.0;
  double mpc_duration = 60.0;
};

sim::Scenario scenario_from_json(const Json& j);
Json scenario_to_json(const sim::Scenario& s);

/// A scenario reference: a built-in name, a path to a scenario file, or an
/// inline object.
sim::Scenario resolve_scenario(const Json& j, const std::filesystem::path& base_dir);

RunConfig run_config_from_json(const Json& j, const std::filesystem::path& base_dir = {});
Json run_config_to_json(const RunConfig& c);

kpi::SweepSpec sweep_from_json(const Json& j, const std::filesystem::path& base_dir = {});
Json sweep_to_json(const kpi::SweepSpec& s);

OptimizeConfig optimize_from_json(const Json& j);
Json optimize_to_json(const OptimizeConfig& c);
ocp::OcpProblem make_problem(const OptimizeConfig& c);

Json controllers_to_json(const sim::ControllerSet& c);
sim::ControllerSet controllers_from_json(const Json& j);
Json planner_to_json(const planner::PlannerConfig& c);
planner::PlannerConfig planner_from_json(const Json& j);

sim::StopAndGoParams stop_and_go_from_json(const Json& j);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

}  // namespace wavectl::config
