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

#include "wavectl/edie.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <omp.h>

#include "wavectl/csv.hpp"

namespace wavectl::macro {

void MacroGrid::resize(int nt_, int nx_) {
  nt = nt_;
  nx = nx_;
  const auto n = static_cast<std::size_t>(nt) * static_cast<std::size_t>(nx);
  rho.assign(n, 0.0);
  q.assign(n, 0.0);
  f.assign(n, 0.0);
}

std::vector<double> fuel_rates(const sim::VehicleRecord& r, const energy::EnergyModel& m) {
  if (r.v.size() < 2) return {};
  const double dt = r.t[1] - r.t[0];
  const auto acc = energy::finite_difference_accel(r.v, dt);
  std::vector<double> out(r.v.size());
  for (std::size_t k = 0; k < r.v.size(); ++k) out[k] = energy::fuel_rate(r.v[k], acc[k], 0.0, m);
  return out;
}

namespace {

MacroGrid lattice_for(const std::vector<sim::VehicleRecord>& vehicles, double h_t, double h_x) {
  if (!(h_t > 0.0 && h_x > 0.0)) throw std::invalid_argument("edie: box sizes must be positive");
  MacroGrid g;
  g.h_t = h_t;
  g.h_x = h_x;
  double t_lo = std::numeric_limits<double>::infinity(), t_hi = -t_lo, x_lo = t_lo, x_hi = -t_lo;
  for (const auto& r : vehicles) {
    if (r.t.empty()) continue;
    t_lo = std::min(t_lo, r.t.front());
    t_hi = std::max(t_hi, r.t.back());
    x_lo = std::min(x_lo, *std::min_element(r.x.begin(), r.x.end()));
    x_hi = std::max(x_hi, *std::max_element(r.x.begin(), r.x.end()));
  }
  if (!std::isfinite(t_lo)) {
    g.resize(1, 1);
    return g;
  }
  g.t0 = std::floor(t_lo / h_t) * h_t;
  g.x0 = std::floor(x_lo / h_x) * h_x;
  g.resize(static_cast<int>(std::floor((t_hi - g.t0) / h_t)) + 1, static_cast<int>(std::floor((x_hi - g.x0) / h_x)) + 1);
  return g;
}

/// Adds one vehicle's time, distance and fuel to the raw (unnormalized) sums.
void accumulate(const sim::VehicleRecord& r, const std::vector<double>& rates, const MacroGrid& g,
                double* time_sum, double* dist_sum, double* fuel_sum) {
  std::vector<double> cuts;
  for (std::size_t k = 0; k + 1 < r.t.size(); ++k) {
    const double ta = r.t[k], tb = r.t[k + 1], xa = r.x[k], xb = r.x[k + 1];
    const double span_t = tb - ta, span_x = xb - xa;
    if (!(span_t > 0.0)) continue;
    cuts.clear();
    cuts.push_back(0.0);
    cuts.push_back(1.0);
    for (double i = std::floor((ta - g.t0) / g.h_t) + 1.0;; i += 1.0) {
      const double T = g.t0 + i * g.h_t;
      if (T >= tb) break;
      if (T > ta) cuts.push_back((T - ta) / span_t);
    }
    if (span_x != 0.0) {
      const double lo = std::min(xa, xb), hi = std::max(xa, xb);
      for (double j = std::floor((lo - g.x0) / g.h_x) + 1.0;; j += 1.0) {
        const double X = g.x0 + j * g.h_x;
        if (X >= hi) break;
        if (X > lo) cuts.push_back((X - xa) / span_x);
      }
    }
    std::sort(cuts.begin(), cuts.end());
    const double rate = rates.empty() ? 0.0 : rates[k];
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double s0 = cuts[c], s1 = cuts[c + 1];
      if (!(s1 > s0)) continue;
      const double sm = 0.5 * (s0 + s1);
      const int it = std::clamp(static_cast<int>(std::floor((ta + sm * span_t - g.t0) / g.h_t)), 0, g.nt - 1);
      const int ix = std::clamp(static_cast<int>(std::floor((xa + sm * span_x - g.x0) / g.h_x)), 0, g.nx - 1);
      const std::size_t idx = g.index(it, ix);
      const double piece_t = (s1 - s0) * span_t;
      time_sum[idx] += piece_t;
      dist_sum[idx] += (s1 - s0) * std::abs(span_x);
      fuel_sum[idx] += rate * piece_t;
    }
  }
}

void normalize(MacroGrid& g) {
  const double area = g.h_t * g.h_x;
  for (auto* field : {&g.rho, &g.q, &g.f}) {
    for (double& v : *field) v /= area;
  }
}

}  // namespace

MacroGrid edie_fields_serial(const std::vector<sim::VehicleRecord>& vehicles, const ModelLookup& models,
                             double h_t, double h_x) {
  MacroGrid g = lattice_for(vehicles, h_t, h_x);
  for (const auto& r : vehicles) {
    const auto rates = fuel_rates(r, models(r.energy_class));
    accumulate(r, rates, g, g.rho.data(), g.q.data(), g.f.data());
  }
  normalize(g);
  return g;
}

MacroGrid edie_fields(const std::vector<sim::VehicleRecord>& vehicles, const ModelLookup& models, double h_t,
                      double h_x) {
  MacroGrid g = lattice_for(vehicles, h_t, h_x);
  const std::size_t cells = g.rho.size();
  const int threads = omp_get_max_threads();
  // One partial grid per thread, merged in thread order so the result does
  // not depend on scheduling.
  std::vector<std::vector<double>> partial(static_cast<std::size_t>(threads));
  const auto n = static_cast<std::ptrdiff_t>(vehicles.size());
#pragma omp parallel num_threads(threads)
  {
    const auto tid = static_cast<std::size_t>(omp_get_thread_num());
    std::vector<double>& mine = partial[tid];
    mine.assign(3 * cells, 0.0);
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto& r = vehicles[static_cast<std::size_t>(i)];
      const auto rates = fuel_rates(r, models(r.energy_class));
      accumulate(r, rates, g, mine.data(), mine.data() + cells, mine.data() + 2 * cells);
    }
  }
  for (const auto& part : partial) {
    if (part.empty()) continue;
    for (std::size_t c = 0; c < cells; ++c) {
      g.rho[c] += part[c];
      g.q[c] += part[cells + c];
      g.f[c] += part[2 * cells + c];
    }
  }
  normalize(g);
  return g;
}

BulkFields bulk_fields(const MacroGrid& g) {
  constexpr double kNoData = std::numeric_limits<double>::quiet_NaN();
  BulkFields b;
  const std::size_t n = g.rho.size();
  b.u.assign(n, kNoData);
  b.phi.assign(n, kNoData);
  b.psi.assign(n, kNoData);
  for (std::size_t i = 0; i < n; ++i) {
    if (g.rho[i] > 0.0) {
      b.u[i] = g.q[i] / g.rho[i];
      b.phi[i] = g.f[i] / g.rho[i];
    }
    if (g.q[i] > 0.0) b.psi[i] = g.f[i] / g.q[i];
  }
  return b;
}

void write_field_csv(const std::filesystem::path& path, const MacroGrid& g, const std::vector<double>& field,
                     const std::string& name, const std::string& units) {
  if (field.size() != g.rho.size()) throw std::invalid_argument("write_field_csv: field does not match grid");
  auto out = csv::open_out(path);
  out << fmt::format("# field={} units={}\n", name, units);
  out << fmt::format("# h_t={} s h_x={} m t0={} x0={} nt={} nx={}\n", g.h_t, g.h_x, g.t0, g.x0, g.nt, g.nx);
  out << "x_start";
  for (int it = 0; it < g.nt; ++it) out << fmt::format(",{}", g.t0 + it * g.h_t);
  out << "\n";
  for (int ix = 0; ix < g.nx; ++ix) {
    out << fmt::format("{}", g.x0 + ix * g.h_x);
    for (int it = 0; it < g.nt; ++it) {
      const double v = field[g.index(it, ix)];
      out << ',';
      if (!std::isnan(v)) out << fmt::format("{}", v);
    }
    out << "\n";
  }
}

FieldCsv read_field_csv(const std::filesystem::path& path) {
  const csv::Table tab = csv::read(path);
  FieldCsv out;
  for (const std::string& c : tab.comments) {
    std::istringstream in(c.substr(1));
    std::string tok;
    while (in >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
      if (key == "field") out.name = val;
      else if (key == "units") out.units = val;
      else if (key == "h_t") out.lattice.h_t = csv::to_double(val);
      else if (key == "h_x") out.lattice.h_x = csv::to_double(val);
      else if (key == "t0") out.lattice.t0 = csv::to_double(val);
      else if (key == "x0") out.lattice.x0 = csv::to_double(val);
      else if (key == "nt") out.lattice.nt = csv::to_int(val);
      else if (key == "nx") out.lattice.nx = csv::to_int(val);
    }
  }
  const int nt = out.lattice.nt, nx = out.lattice.nx;
  if (static_cast<int>(tab.header.size()) != nt + 1 || static_cast<int>(tab.rows.size()) != nx) {
    throw std::runtime_error("field csv does not match its lattice header: " + path.string());
  }
  out.values.assign(static_cast<std::size_t>(nt) * static_cast<std::size_t>(nx), 0.0);
  for (int ix = 0; ix < nx; ++ix) {
    const auto& row = tab.rows[static_cast<std::size_t>(ix)];
    if (static_cast<int>(row.size()) != nt + 1) throw std::runtime_error("ragged field csv row");
    for (int it = 0; it < nt; ++it) {
      const std::string& cell = row[static_cast<std::size_t>(it + 1)];
      out.values[out.lattice.index(it, ix)] =
          cell.empty() ? std::numeric_limits<double>::quiet_NaN() : csv::to_double(cell);
    }
  }
  return out;
}

namespace {

std::string colormap(double s) {
  // Perceptually ordered dark-blue to yellow ramp.
  static constexpr std::array<std::array<double, 3>, 5> stops{{
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
  s = std::clamp(s, 0.0, 1.0) * (stops.size() - 1);
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(s), stops.size() - 2);
  const double w = s - static_cast<double>(i);
  int rgb[3];
  for (int c = 0; c < 3; ++c) rgb[c] = static_cast<int>(std::lround(stops[i][c] + w * (stops[i + 1][c] - stops[i][c])));
  return fmt::format("#{:02x}{:02x}{:02x}", rgb[0], rgb[1], rgb[2]);
}

}  // namespace

SvgInfo write_field_svg(const std::filesystem::path& path, const MacroGrid& g, const std::vector<double>& field,
                        const std::string& title, const std::vector<OverlayTrack>& overlay) {
  if (field.size() != g.rho.size()) throw std::invalid_argument("write_field_svg: field does not match grid");
  const double margin = 50.0;
  const double cw = std::clamp(900.0 / std::max(1, g.nt), 2.0, 16.0);
  const double ch = std::clamp(500.0 / std::max(1, g.nx), 2.0, 16.0);
  SvgInfo info;
  info.t_min = g.t0;
  info.t_max = g.t_end();
  info.x_min = g.x0;
  info.x_max = g.x_end();
  const double plot_w = cw * g.nt, plot_h = ch * g.nx;
  info.width = plot_w + 2 * margin;
  info.height = plot_h + 2 * margin;
  auto px = [&](double t) { return margin + (t - g.t0) / g.h_t * cw; };
  auto py = [&](double x) { return margin + plot_h - (x - g.x0) / g.h_x * ch; };

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : field) {
    if (std::isnan(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double range = (std::isfinite(lo) && hi > lo) ? hi - lo : 1.0;

  auto out = csv::open_out(path);
  out << fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" "
      "data-t-min=\"{}\" data-t-max=\"{}\" data-x-min=\"{}\" data-x-max=\"{}\">\n",
      info.width, info.height, info.width, info.height, info.t_min, info.t_max, info.x_min, info.x_max);
  out << fmt::format("<title>{}</title>\n", title);
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (int it = 0; it < g.nt; ++it) {
    for (int ix = 0; ix < g.nx; ++ix) {
      const double v = field[g.index(it, ix)];
      const std::string fill = std::isnan(v) ? "#e0e0e0" : colormap((v - (std::isfinite(lo) ? lo : 0.0)) / range);
      out << fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"/>\n", px(g.t0 + it * g.h_t),
                         py(g.x0 + (ix + 1) * g.h_x), cw, ch, fill);
    }
  }
  for (const OverlayTrack& tr : overlay) {
    ++info.overlay_tracks;
    std::size_t k = 0;
    while (k < tr.t.size()) {
      const bool on = tr.engaged[k] != 0;
      std::string pts;
      std::size_t n = 0;
      for (; k < tr.t.size() && (tr.engaged[k] != 0) == on; ++k, ++n) {
        pts += fmt::format("{:.2f},{:.2f} ", px(tr.t[k]), py(tr.x[k]));
      }
      if (on) info.overlay_marks += n;
      out << fmt::format("<polyline data-vehicle=\"{}\" data-engaged=\"{}\" data-samples=\"{}\" fill=\"none\" "
                         "stroke=\"{}\" stroke-width=\"1.2\"{} points=\"{}\"/>\n",
                         tr.vehicle_id, on ? 1 : 0, n, on ? "#ff2d2d" : "#202020",
                         on ? "" : " stroke-dasharray=\"3,3\"", pts);
    }
  }
  out << fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"14\" font-family=\"sans-serif\">{} [{:.4g}, {:.4g}]</text>\n",
                     margin, margin - 15, title, std::isfinite(lo) ? lo : 0.0, std::isfinite(hi) ? hi : 0.0);
  out << fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"12\" font-family=\"sans-serif\">t [s]</text>\n",
                     margin + plot_w / 2, info.height - 15);
  out << fmt::format("<text x=\"12\" y=\"{}\" font-size=\"12\" font-family=\"sans-serif\">x [m]</text>\n",
                     margin + plot_h / 2);
  out << "</svg>\n";
  return info;
}

}  // namespace wavectl::macro
