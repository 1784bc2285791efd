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

#include "wavectl/energy.hpp"
#include "wavectl/simulator.hpp"

namespace wavectl::kpi {

/// Times at which a vehicle's front passes position `x`, interpolated
/// linearly between ticks.
std::vector<double> crossing_times(const sim::VehicleRecord& r, double x);

/// Fraction of the leader's travel at which corridor throughput is sampled.
std::vector<double> throughput_positions(const sim::RunArtifact& art, int count = 5);

/// Vehicles per second. Shockwave and freeflow: mean over five equi-spaced
/// positions of crossings during the run divided by the run length.
/// Bottleneck: discharge rate just downstream of the bottleneck over the
/// final 20% of the platoon's passage there.
double throughput(const sim::RunArtifact& art, sim::ScenarioKind kind);

/// Total distance over total time of the followers; stopped time counts.
double network_speed(const sim::RunArtifact& art);

/// Fuel [g] of one vehicle, summed per tick with the same rates the Edie
/// grid uses.
double vehicle_fuel(const sim::VehicleRecord& r, const energy::EnergyModel& m);

struct KpiValues {
  double fuel_economy = 0.0;   // [mpg]
  double throughput = 0.0;     // [veh/s]
  double network_speed = 0.0;  // [m/s]
  double fuel = 0.0;           // [g]
  double distance = 0.0;       // [m]
  double time = 0.0;           // [s]
};

/// KPIs over the followers (the replayed leader is a boundary condition).
KpiValues compute_kpis(const sim::RunArtifact& art, const std::vector<energy::EnergyModel>& models);

struct VariantSpec {
  std::string name;
  sim::ControllerVariant controller = sim::ControllerVariant::Accel;
  bool planner = true;
};

struct SweepSpec {
  std::vector<sim::Scenario> scenarios;
  std::vector<VariantSpec> variants;
  std::vector<std::uint64_t> seeds{1};
  sim::RunOptions base;
};

struct ReportRow {
  std::string scenario;
  std::string variant;
  bool baseline = false;
  bool failed = false;
  std::string failure;
  KpiValues mean;         // averaged over seeds
  double d_fuel_economy = 0.0;  // [%] vs the scenario baseline
  double d_throughput = 0.0;
  double d_network_speed = 0.0;
};

struct KpiReport {
  std::vector<ReportRow> rows;
};

/// One simulation cell of a sweep.
struct CellResult {
  bool failed = false;
  std::string failure;
  KpiValues kpi;
};

/// Runs every (scenario, variant or baseline, seed) cell, in parallel, and
/// assembles per-scenario rows with deltas against the 0-AV baseline. With
/// `resume_dir`, finished cells leave a marker there and are reloaded
/// instead of rerun.
KpiReport evaluate_matrix(const SweepSpec& spec, const std::vector<energy::EnergyModel>& models,
                          const std::optional<std::filesystem::path>& resume_dir = std::nullopt);

/// Assembles rows from cell results laid out scenario-major, then variant
/// (baseline first), then seed.
KpiReport assemble_report(const SweepSpec& spec, const std::vector<CellResult>& cells);

double percent_delta(double value, double baseline);

void write_report_csv(const std::filesystem::path& path, const KpiReport& r);
void write_report_html(const std::filesystem::path& path, const KpiReport& r);

std::string cell_key(const std::string& scenario, const std::string& variant, std::uint64_t seed);

}  // namespace wavectl::kpi
