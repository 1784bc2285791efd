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

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "wavectl/energy.hpp"
#include "wavectl/simulator.hpp"

namespace wavectl::macro {

/// Box-averaged fields over a time-space lattice. Boxes are half-open
/// [t0 + i h_t, t0 + (i+1) h_t) x [x0 + j h_x, x0 + (j+1) h_x).
struct MacroGrid {
  double t0 = 0.0;
  double x0 = 0.0;
  double h_t = 10.0;
  double h_x = 200.0;
  int nt = 0;
  int nx = 0;
  std::vector<double> rho;  // [veh/m]
  std::vector<double> q;    // [veh/s]
  std::vector<double> f;    // [g/(s m)]

  std::size_t index(int it, int ix) const { return static_cast<std::size_t>(it) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(ix); }
  void resize(int nt_, int nx_);
  double t_end() const { return t0 + nt * h_t; }
  double x_end() const { return x0 + nx * h_x; }
};

/// Per-tick fuel rates of one vehicle: central-difference accelerations,
/// flat road. Entry k applies over [t_k, t_k+1).
std::vector<double> fuel_rates(const sim::VehicleRecord& r, const energy::EnergyModel& m);

using ModelLookup = std::function<const energy::EnergyModel&(const std::string& class_name)>;

/// Edie's generalized definitions. Each tick is a straight line in the
/// time-space plane; pieces are split at box boundaries and contribute
/// their duration, distance and fuel to the box containing them.
MacroGrid edie_fields(const std::vector<sim::VehicleRecord>& vehicles, const ModelLookup& models,
                      double h_t = 10.0, double h_x = 200.0);
/// Serial reference of edie_fields.
MacroGrid edie_fields_serial(const std::vector<sim::VehicleRecord>& vehicles, const ModelLookup& models,
                             double h_t = 10.0, double h_x = 200.0);

/// Pointwise ratios; NaN marks boxes without data.
struct BulkFields {
  std::vector<double> u;    // q / rho [m/s]
  std::vector<double> phi;  // f / rho [g/s per vehicle]
  std::vector<double> psi;  // f / q [g/m]
};
BulkFields bulk_fields(const MacroGrid& g);

/// Dense field export: one row per x bin, one column per t bin, empty cells
/// for no-data. Header comments carry the field name, units and lattice.
void write_field_csv(const std::filesystem::path& path, const MacroGrid& g, const std::vector<double>& field,
                     const std::string& name, const std::string& units);

struct FieldCsv {
  MacroGrid lattice;  // geometry only
  std::string name;
  std::string units;
  std::vector<double> values;  // same layout as MacroGrid fields
};
FieldCsv read_field_csv(const std::filesystem::path& path);

struct OverlayTrack {
  int vehicle_id = 0;
  std::vector<double> t, x;
  std::vector<char> engaged;
};

struct SvgInfo {
  double width = 0.0;
  double height = 0.0;
  double t_min = 0.0, t_max = 0.0;  // rendered data extent
  double x_min = 0.0, x_max = 0.0;
  std::size_t overlay_marks = 0;    // engaged samples drawn
  std::size_t overlay_tracks = 0;
};

/// Standalone SVG heatmap (t right, x up) with engaged samples of the
/// overlay tracks drawn as markers.
SvgInfo write_field_svg(const std::filesystem::path& path, const MacroGrid& g, const std::vector<double>& field,
                        const std::string& title, const std::vector<OverlayTrack>& overlay);

}  // namespace wavectl::macro
