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

#include "wavectl/kpi.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

#include "wavectl/csv.hpp"
#include "wavectl/edie.hpp"

namespace wavectl::kpi {

namespace {

const sim::VehicleRecord& leader_record(const sim::RunArtifact& art) {
  for (const auto& r : art.vehicles) {
    if (r.kind == sim::VehicleKind::Leader) return r;
  }
  if (art.vehicles.empty()) throw std::invalid_argument("kpi: empty run artifact");
  return art.vehicles.front();
}

bool is_follower(const sim::VehicleRecord& r) { return r.kind != sim::VehicleKind::Leader && r.t.size() >= 2; }

double run_length(const sim::RunArtifact& art) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& r : art.vehicles) {
    if (r.t.empty()) continue;
    lo = std::min(lo, r.t.front());
    hi = std::max(hi, r.t.back());
  }
  return hi > lo ? hi - lo : 0.0;
}

}  // namespace

std::vector<double> crossing_times(const sim::VehicleRecord& r, double x) {
  std::vector<double> out;
  for (std::size_t k = 0; k + 1 < r.x.size(); ++k) {
    const double xa = r.x[k], xb = r.x[k + 1];
    // Half-open so a vehicle resting exactly on x is counted once.
    if (xa < x && xb >= x) out.push_back(r.t[k] + (x - xa) / (xb - xa) * (r.t[k + 1] - r.t[k]));
  }
  return out;
}

std::vector<double> throughput_positions(const sim::RunArtifact& art, int count) {
  const auto& lead = leader_record(art);
  if (lead.x.empty()) throw std::invalid_argument("kpi: leader has no samples");
  const double x0 = lead.x.front(), dist = lead.x.back() - lead.x.front();
  std::vector<double> out;
  for (int i = 1; i <= count; ++i) out.push_back(x0 + dist * i / (count + 1));
  return out;
}

double throughput(const sim::RunArtifact& art, sim::ScenarioKind kind) {
  const double T = run_length(art);
  if (!(T > 0.0)) throw std::invalid_argument("throughput: run shorter than the averaging window");
  if (kind != sim::ScenarioKind::Bottleneck) {
    double sum = 0.0;
    const auto positions = throughput_positions(art);
    for (double x : positions) {
      std::size_t n = 0;
      for (const auto& r : art.vehicles) {
        if (is_follower(r)) n += crossing_times(r, x).size();
      }
      sum += static_cast<double>(n) / T;
    }
    return sum / static_cast<double>(positions.size());
  }
  const auto& b = art.scenario.bottleneck;
  if (!b.enabled) throw std::invalid_argument("throughput: bottleneck scenario without a bottleneck region");
  const double x = b.x_end + 50.0;
  std::vector<double> times;
  for (const auto& r : art.vehicles) {
    if (!is_follower(r)) continue;
    for (double c : crossing_times(r, x)) times.push_back(c);
  }
  std::sort(times.begin(), times.end());
  if (times.size() < 2) throw std::invalid_argument("throughput: fewer than two vehicles discharged from the bottleneck");
  const auto k = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(times.size()))));
  const double span = times.back() - times[times.size() - k];
  if (!(span > 0.0)) throw std::invalid_argument("throughput: degenerate discharge window");
  return static_cast<double>(k - 1) / span;
}

double network_speed(const sim::RunArtifact& art) {
  double dist = 0.0, time = 0.0;
  for (const auto& r : art.vehicles) {
    if (!is_follower(r)) continue;
    dist += r.x.back() - r.x.front();
    time += r.t.back() - r.t.front();
  }
  if (!(time > 0.0)) throw std::invalid_argument("network_speed: no driving time");
  return dist / time;
}

double vehicle_fuel(const sim::VehicleRecord& r, const energy::EnergyModel& m) {
  const auto rates = macro::fuel_rates(r, m);
  double g = 0.0;
  for (std::size_t k = 0; k + 1 < r.t.size(); ++k) g += rates[k] * (r.t[k + 1] - r.t[k]);
  return g;
}

KpiValues compute_kpis(const sim::RunArtifact& art, const std::vector<energy::EnergyModel>& models) {
  KpiValues k;
  for (const auto& r : art.vehicles) {
    if (!is_follower(r)) continue;
    k.fuel += vehicle_fuel(r, energy::find_model(models, r.energy_class));
    k.distance += r.x.back() - r.x.front();
    k.time += r.t.back() - r.t.front();
  }
  k.fuel_economy = energy::fuel_economy(k.fuel, k.distance);
  k.network_speed = network_speed(art);
  k.throughput = throughput(art, art.scenario.kind);
  return k;
}

double percent_delta(double value, double baseline) {
  if (value == baseline) return 0.0;
  if (baseline == 0.0 || std::isnan(baseline)) return std::numeric_limits<double>::quiet_NaN();
  return 100.0 * (value - baseline) / baseline;
}

std::string cell_key(const std::string& scenario, const std::string& variant, std::uint64_t seed) {
  return fmt::format("{}__{}__seed{}", scenario, variant, seed);
}

namespace {

struct Cell {
  std::size_t scenario;
  std::optional<std::size_t> variant;  // empty: baseline
  std::uint64_t seed;
};

std::vector<Cell> layout_cells(const SweepSpec& spec) {
  std::vector<Cell> cells;
  for (std::size_t s = 0; s < spec.scenarios.size(); ++s) {
    for (std::size_t v = 0; v <= spec.variants.size(); ++v) {
      for (std::uint64_t seed : spec.seeds) {
        cells.push_back({s, v == 0 ? std::nullopt : std::optional<std::size_t>(v - 1), seed});
      }
    }
  }
  return cells;
}

nlohmann::json to_json(const CellResult& c) {
  return {{"failed", c.failed},
          {"failure", c.failure},
          {"fuel_economy", c.kpi.fuel_economy},
          {"throughput", c.kpi.throughput},
          {"network_speed", c.kpi.network_speed},
          {"fuel", c.kpi.fuel},
          {"distance", c.kpi.distance},
          {"time", c.kpi.time}};
}

CellResult from_json(const nlohmann::json& j) {
  CellResult c;
  c.failed = j.at("failed").get<bool>();
  c.failure = j.at("failure").get<std::string>();
  c.kpi.fuel_economy = j.at("fuel_economy").get<double>();
  c.kpi.throughput = j.at("throughput").get<double>();
  c.kpi.network_speed = j.at("network_speed").get<double>();
  c.kpi.fuel = j.at("fuel").get<double>();
  c.kpi.distance = j.at("distance").get<double>();
  c.kpi.time = j.at("time").get<double>();
  return c;
}

}  // namespace

KpiReport evaluate_matrix(const SweepSpec& spec, const std::vector<energy::EnergyModel>& models,
                          const std::optional<std::filesystem::path>& resume_dir) {
  if (spec.scenarios.empty()) throw std::invalid_argument("sweep: no scenarios");
  if (spec.seeds.empty()) throw std::invalid_argument("sweep: no seeds");
  const auto cells = layout_cells(spec);
  std::vector<CellResult> results(cells.size());
  if (resume_dir) std::filesystem::create_directories(*resume_dir);
  const auto n = static_cast<std::ptrdiff_t>(cells.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const Cell& cell = cells[static_cast<std::size_t>(i)];
    const sim::Scenario& sc = spec.scenarios[cell.scenario];
    const std::string vname = cell.variant ? spec.variants[*cell.variant].name : "baseline";
    std::optional<std::filesystem::path> marker;
    if (resume_dir) marker = *resume_dir / (cell_key(sc.name, vname, cell.seed) + ".json");
    CellResult& out = results[static_cast<std::size_t>(i)];
    if (marker && std::filesystem::exists(*marker)) {
      std::ifstream in(*marker);
      out = from_json(nlohmann::json::parse(in));
      continue;
    }
    try {
      sim::RunOptions o = spec.base;
      o.seed = cell.seed;
      o.traces = false;
      if (cell.variant) {
        o.controllers.variant = spec.variants[*cell.variant].controller;
        o.planner = spec.variants[*cell.variant].planner;
      } else {
        o.controllers.variant = sim::ControllerVariant::Baseline;
        o.planner = false;
      }
      const sim::RunArtifact art = sim::closed_loop_run(sc, o);
      if (art.collision) {
        out.failed = true;
        out.failure = art.failure;
      } else {
        out.kpi = compute_kpis(art, models);
      }
    } catch (const std::exception& e) {
      out.failed = true;
      out.failure = e.what();
    }
    if (marker) {
      // Write-then-rename so an interrupted sweep never leaves a torn marker.
      const auto tmp = std::filesystem::path(marker->string() + ".tmp");
      {
        std::ofstream m(tmp);
        m << to_json(out).dump(2) << "\n";
      }
      std::filesystem::rename(tmp, *marker);
    }
  }
  return assemble_report(spec, results);
}

KpiReport assemble_report(const SweepSpec& spec, const std::vector<CellResult>& cells) {
  const std::size_t per_row = spec.seeds.size();
  const std::size_t rows_per_scenario = spec.variants.size() + 1;
  if (cells.size() != spec.scenarios.size() * rows_per_scenario * per_row) {
    throw std::invalid_argument("assemble_report: cell count does not match the sweep");
  }
  KpiReport rep;
  std::size_t c = 0;
  for (const auto& sc : spec.scenarios) {
    ReportRow base;
    for (std::size_t v = 0; v < rows_per_scenario; ++v) {
      ReportRow row;
      row.scenario = sc.name;
      row.baseline = v == 0;
      row.variant = v == 0 ? "baseline" : spec.variants[v - 1].name;
      for (std::size_t s = 0; s < per_row; ++s, ++c) {
        const CellResult& cell = cells[c];
        if (cell.failed) {
          row.failed = true;
          if (row.failure.empty()) row.failure = cell.failure;
          continue;
        }
        row.mean.fuel_economy += cell.kpi.fuel_economy / per_row;
        row.mean.throughput += cell.kpi.throughput / per_row;
        row.mean.network_speed += cell.kpi.network_speed / per_row;
        row.mean.fuel += cell.kpi.fuel / per_row;
        row.mean.distance += cell.kpi.distance / per_row;
        row.mean.time += cell.kpi.time / per_row;
      }
      if (v == 0) base = row;
      const bool usable = !row.failed && !base.failed;
      const double nan = std::numeric_limits<double>::quiet_NaN();
      row.d_fuel_economy = usable ? percent_delta(row.mean.fuel_economy, base.mean.fuel_economy) : nan;
      row.d_throughput = usable ? percent_delta(row.mean.throughput, base.mean.throughput) : nan;
      row.d_network_speed = usable ? percent_delta(row.mean.network_speed, base.mean.network_speed) : nan;
      rep.rows.push_back(row);
    }
  }
  return rep;
}

void write_report_csv(const std::filesystem::path& path, const KpiReport& r) {
  auto out = csv::open_out(path);
  out << "scenario,variant,status,fuel_economy_mpg,throughput_veh_s,network_speed_m_s,"
         "d_fuel_economy_pct,d_throughput_pct,d_network_speed_pct\n";
  for (const auto& row : r.rows) {
    if (row.failed) {
      out << fmt::format("{},{},FAILED,,,,,,\n", row.scenario, row.variant);
      continue;
    }
    out << fmt::format("{},{},ok,{},{},{},{},{},{}\n", row.scenario, row.variant, row.mean.fuel_economy,
                       row.mean.throughput, row.mean.network_speed, row.d_fuel_economy, row.d_throughput,
                       row.d_network_speed);
  }
}

namespace {

std::string delta_cell(double d) {
  if (std::isnan(d)) return "<td class=\"na\">n/a</td>";
  // Green for improvement, red for regression, saturating at 10%.
  const double s = std::min(1.0, std::abs(d) / 10.0);
  const int fade = static_cast<int>(std::lround(255 - 155 * s));
  const std::string color = d > 0.0 ? fmt::format("rgb({},255,{})", fade, fade)
                            : d < 0.0 ? fmt::format("rgb(255,{},{})", fade, fade)
                                      : std::string("rgb(240,240,240)");
  return fmt::format("<td style=\"background:{}\">{:+.2f}%</td>", color, d);
}

}  // namespace

void write_report_html(const std::filesystem::path& path, const KpiReport& r) {
  auto out = csv::open_out(path);
  out << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>KPI report</title>\n"
         "<style>body{font-family:sans-serif}table{border-collapse:collapse}"
         "td,th{border:1px solid #999;padding:4px 8px;text-align:right}"
         "td.l{text-align:left}tr.failed td{background:#555;color:#fff}.na{color:#888}</style>\n"
         "</head><body>\n<h1>KPI report</h1>\n<table>\n"
         "<tr><th>scenario</th><th>variant</th><th>fuel economy [mpg]</th><th>throughput [veh/s]</th>"
         "<th>network speed [m/s]</th><th>&Delta; fuel economy</th><th>&Delta; throughput</th>"
         "<th>&Delta; network speed</th></tr>\n";
  for (const auto& row : r.rows) {
    if (row.failed) {
      out << fmt::format("<tr class=\"failed\"><td class=\"l\">{}</td><td class=\"l\">{}</td>"
                         "<td colspan=\"6\" class=\"l\">FAILED: {}</td></tr>\n",
                         row.scenario, row.variant, row.failure);
      continue;
    }
    out << fmt::format("<tr><td class=\"l\">{}</td><td class=\"l\">{}</td><td>{:.3f}</td><td>{:.5f}</td><td>{:.3f}</td>",
                       row.scenario, row.variant, row.mean.fuel_economy, row.mean.throughput, row.mean.network_speed);
    out << delta_cell(row.d_fuel_economy) << delta_cell(row.d_throughput) << delta_cell(row.d_network_speed)
        << "</tr>\n";
  }
  out << "</table>\n</body></html>\n";
}

}  // namespace wavectl::kpi
