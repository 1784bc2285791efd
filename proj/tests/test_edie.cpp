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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <doctest.h>

#include "wavectl/edie.hpp"
#include "wavectl/energy.hpp"
#include "wavectl/simulator.hpp"

using namespace wavectl;

namespace {

const std::vector<energy::EnergyModel>& models() {
  static const auto m = energy::default_models();
  return m;
}

const energy::EnergyModel& lookup(const std::string& name) { return energy::find_model(models(), name); }

sim::VehicleRecord cruise(int id, double x0, double v, double t0, double t1, double dt) {
  sim::VehicleRecord r;
  r.id = id;
  r.kind = sim::VehicleKind::Human;
  r.energy_class = "midsize_sedan";
  const auto n = static_cast<int>(std::llround((t1 - t0) / dt));
  for (int k = 0; k <= n; ++k) {
    const double t = t0 + k * dt;
    r.t.push_back(t);
    r.x.push_back(x0 + v * (t - t0));
    r.v.push_back(v);
    r.a.push_back(0.0);
    r.engaged.push_back(0);
  }
  return r;
}

sim::RunArtifact shockwave_run(double duration, double dt = 0.1) {
  auto s = sim::builtin_scenario("shockwave");
  s.duration = duration;
  s.dt = dt;
  sim::RunOptions o;
  o.seed = 2;
  return sim::closed_loop_run(s, o);
}

std::filesystem::path scratch(const char* name) {
  auto p = std::filesystem::temp_directory_path() / "wavectl_tests" / name;
  std::filesystem::create_directories(p.parent_path());
  return p;
}

}  // namespace

TEST_SUITE("edie") {

TEST_CASE("single vehicle traversing one box: hand values") {
  // Dyadic sampling keeps every piece exact in floating point.
  const auto r = cruise(1, 0.0, 20.0, 0.0, 10.0, 0.125);
  const auto g = macro::edie_fields({r}, lookup);
  REQUIRE(g.nt >= 1);
  REQUIRE(g.nx >= 1);
  CHECK(g.rho[g.index(0, 0)] == 0.005);
  CHECK(g.q[g.index(0, 0)] == 0.1);
  const auto b = macro::bulk_fields(g);
  CHECK(b.u[g.index(0, 0)] == doctest::Approx(20.0).epsilon(1e-15));

  const auto r10 = cruise(1, 0.0, 20.0, 0.0, 10.0, 0.1);
  const auto g10 = macro::edie_fields({r10}, lookup);
  CHECK(g10.rho[g10.index(0, 0)] == doctest::Approx(0.005).epsilon(1e-12));
  CHECK(g10.q[g10.index(0, 0)] == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("parked vehicle") {
  const auto r = cruise(1, 50.0, 0.0, 0.0, 30.0, 0.1);
  const auto g = macro::edie_fields({r}, lookup);
  for (int it = 0; it < 3; ++it) {
    CHECK(g.rho[g.index(it, 0)] == doctest::Approx(1.0 / 200.0));
    CHECK(g.q[g.index(it, 0)] == 0.0);
  }
  const auto b = macro::bulk_fields(g);
  CHECK(b.u[g.index(0, 0)] == 0.0);
  CHECK(std::isnan(b.psi[g.index(0, 0)]));
}

TEST_CASE("empty input gives an all-zero grid") {
  const auto g = macro::edie_fields({}, lookup);
  for (double v : g.rho) CHECK(v == 0.0);
  const auto b = macro::bulk_fields(g);
  for (double v : b.u) CHECK(std::isnan(v));
}

TEST_CASE("partition identity and the bulk speed identity on a simulated run") {
  const auto art = shockwave_run(600.0);
  REQUIRE_FALSE(art.collision);
  const auto g = macro::edie_fields(art.vehicles, lookup);
  double total = 0.0, time = 0.0;
  for (const auto& r : art.vehicles) {
    for (std::size_t k = 1; k < r.x.size(); ++k) total += std::abs(r.x[k] - r.x[k - 1]);
    time += r.t.back() - r.t.front();
  }
  double dist_sum = 0.0, time_sum = 0.0;
  for (std::size_t i = 0; i < g.q.size(); ++i) {
    dist_sum += g.q[i] * g.h_t * g.h_x;
    time_sum += g.rho[i] * g.h_t * g.h_x;
  }
  CHECK(dist_sum == doctest::Approx(total).epsilon(1e-12));
  CHECK(time_sum == doctest::Approx(time).epsilon(1e-12));

  const auto b = macro::bulk_fields(g);
  int occupied = 0;
  for (std::size_t i = 0; i < g.rho.size(); ++i) {
    if (!(g.rho[i] > 0.0)) continue;
    ++occupied;
    REQUIRE(std::abs(g.rho[i] * b.u[i] - g.q[i]) <= 1e-12 * std::abs(g.q[i]) + 1e-300);
    REQUIRE(g.q[i] >= 0.0);
    REQUIRE(g.f[i] >= 0.0);
  }
  CHECK(occupied > 100);
}

TEST_CASE("cruise fuel per distance") {
  const auto r = cruise(1, 0.0, 25.0, 0.0, 60.0, 0.1);
  const auto g = macro::edie_fields({r}, lookup);
  const auto b = macro::bulk_fields(g);
  const double expected = energy::fuel_rate(25.0, 0.0, 0.0, lookup("midsize_sedan")) / 25.0;
  int checked = 0;
  for (std::size_t i = 0; i < g.q.size(); ++i) {
    if (g.q[i] > 0.0) {
      CHECK(b.psi[i] == doctest::Approx(expected).epsilon(1e-12));
      CHECK(b.u[i] == doctest::Approx(25.0).epsilon(1e-12));
      ++checked;
    }
  }
  CHECK(checked > 5);
}

TEST_CASE("parallel build matches the serial reference") {
  const auto art = shockwave_run(300.0);
  const auto par = macro::edie_fields(art.vehicles, lookup);
  const auto ser = macro::edie_fields_serial(art.vehicles, lookup);
  REQUIRE(par.rho.size() == ser.rho.size());
  for (std::size_t i = 0; i < par.rho.size(); ++i) {
    CHECK(par.rho[i] == doctest::Approx(ser.rho[i]).epsilon(1e-12));
    CHECK(par.q[i] == doctest::Approx(ser.q[i]).epsilon(1e-12));
    CHECK(par.f[i] == doctest::Approx(ser.f[i]).epsilon(1e-12));
  }
}

TEST_CASE("grids do not depend on vehicle order or ids") {
  const auto art = shockwave_run(300.0);
  auto shuffled = art.vehicles;
  std::mt19937 rng(1);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  for (auto& r : shuffled) r.id += 1000;
  const auto a = macro::edie_fields(art.vehicles, lookup);
  const auto b = macro::edie_fields(shuffled, lookup);
  REQUIRE(a.rho.size() == b.rho.size());
  for (std::size_t i = 0; i < a.rho.size(); ++i) {
    CHECK(a.rho[i] == doctest::Approx(b.rho[i]).epsilon(1e-12));
    CHECK(a.q[i] == doctest::Approx(b.q[i]).epsilon(1e-12));
    CHECK(a.f[i] == doctest::Approx(b.f[i]).epsilon(1e-12));
  }
}

TEST_CASE("refining the time step barely changes the fields") {
  const auto coarse = macro::edie_fields(shockwave_run(600.0, 0.1).vehicles, lookup);
  const auto fine = macro::edie_fields(shockwave_run(600.0, 0.05).vehicles, lookup);
  REQUIRE(coarse.rho.size() == fine.rho.size());
  auto rel_l1 = [](const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0, s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      d += std::abs(a[i] - b[i]);
      s += std::abs(b[i]);
    }
    return d / s;
  };
  CHECK(rel_l1(coarse.rho, fine.rho) < 0.005);
  CHECK(rel_l1(coarse.q, fine.q) < 0.005);
  CHECK(rel_l1(coarse.f, fine.f) < 0.005);
}

TEST_CASE("field csv round trip keeps values and no-data cells") {
  const auto art = shockwave_run(120.0);
  const auto g = macro::edie_fields(art.vehicles, lookup);
  const auto b = macro::bulk_fields(g);
  macro::write_field_csv(scratch("psi.csv"), g, b.psi, "psi", "g/m");
  const auto back = macro::read_field_csv(scratch("psi.csv"));
  CHECK(back.name == "psi");
  CHECK(back.units == "g/m");
  CHECK(back.lattice.nt == g.nt);
  CHECK(back.lattice.nx == g.nx);
  CHECK(back.lattice.h_t == g.h_t);
  REQUIRE(back.values.size() == b.psi.size());
  int nodata = 0;
  for (std::size_t i = 0; i < b.psi.size(); ++i) {
    if (std::isnan(b.psi[i])) {
      CHECK(std::isnan(back.values[i]));
      ++nodata;
    } else {
      CHECK(back.values[i] == b.psi[i]);
    }
  }
  CHECK(nodata > 0);
}

TEST_CASE("svg overlay marks engaged samples and spans the grid") {
  auto r = cruise(3, 0.0, 20.0, 0.0, 60.0, 0.1);
  for (std::size_t k = 0; k < r.engaged.size(); ++k) r.engaged[k] = (k / 50) % 2 == 0 ? 1 : 0;
  const auto g = macro::edie_fields({r}, lookup);
  const auto b = macro::bulk_fields(g);
  macro::OverlayTrack tr{r.id, r.t, r.x, r.engaged};
  const auto info = macro::write_field_svg(scratch("u.svg"), g, b.u, "u", {tr});
  const auto engaged = static_cast<std::size_t>(std::count(r.engaged.begin(), r.engaged.end(), 1));
  CHECK(info.overlay_marks == engaged);
  CHECK(info.overlay_tracks == 1);
  CHECK(info.t_min == g.t0);
  CHECK(info.t_max == g.t_end());
  CHECK(info.x_min == g.x0);
  CHECK(info.x_max == g.x_end());
  CHECK(info.t_min <= r.t.front());
  CHECK(info.t_max >= r.t.back());
  CHECK(info.x_max >= r.x.back());
  std::ifstream in(scratch("u.svg"));
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str().find("</svg>") != std::string::npos);
}

}  // TEST_SUITE
