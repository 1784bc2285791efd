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
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wavectl/config.hpp"

namespace wavectl::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kCollision = 2, kInfeasible = 3 };

/// Output root: $WAVECTL_OUT when set, else ./out.
std::filesystem::path output_root();

struct SimulateArgs {
  std::string config;      // run config file (optional)
  std::string scenario;    // built-in name or scenario file, overrides the config
  std::string controller;  // overrides the config
  std::string planner;     // "none" or "closed"
  std::optional<std::uint64_t> seed;
  std::string out;         // default: <root>/<scenario>_<controller>_seed<k>
  std::string energy_models;
  bool no_traces = false;
};
int cmd_simulate(const SimulateArgs& a, std::ostream& os);

struct SweepArgs {
  std::string spec;
  std::string out;
  bool resume = true;
  std::string energy_models;
};
int cmd_sweep(const SweepArgs& a, std::ostream& os);

struct MacroArgs {
  std::string run;
  std::string out;  // default: <run>/macro
  double h_t = 10.0;
  double h_x = 200.0;
  std::string energy_models;
};
int cmd_macro(const MacroArgs& a, std::ostream& os);

struct OptimizeArgs {
  std::string config;
  std::string out;
  bool grad_check = false;
  std::optional<int> avs;
  std::optional<int> pieces;
  std::optional<int> iterations;
  std::optional<std::uint64_t> seed;
  std::string mode;  // "ocp" or "mpc", overrides the config
};
int cmd_optimize(const OptimizeArgs& a, std::ostream& os);

struct GenLeaderArgs {
  std::string config;  // stop-and-go parameter overrides (JSON object)
  std::uint64_t seed = 1;
  std::optional<double> duration;
  std::string out;
};
int cmd_gen_leader(const GenLeaderArgs& a, std::ostream& os);

struct BenchArgs {
  int vehicles = 24;      // leader included
  double duration = 900.0;
  int repeats = 3;
};
struct BenchResult {
  std::size_t steps = 0;
  double sim_seconds = 0.0;
  double steps_per_second = 0.0;
  double edie_serial_seconds = 0.0;
  double edie_parallel_seconds = 0.0;
  bool edie_match = false;  // both kernels agree to rounding
  int threads = 1;
};
BenchResult run_bench(const BenchArgs& a);
int cmd_bench(const BenchArgs& a, std::ostream& os);

}  // namespace wavectl::cli
