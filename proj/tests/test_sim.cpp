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
#include <numeric>

#include <doctest.h>

#include "wavectl/cfm.hpp"
#include "wavectl/simulator.hpp"

using namespace wavectl;
using sim::Scenario;

namespace {

Scenario constant_platoon(double speed, int humans, double duration) {
  Scenario s;
  s.name = "constant";
  s.kind = sim::ScenarioKind::Freeflow;
  s.avs = 0;
  s.humans = humans;
  s.duration = duration;
  s.leader.kind = sim::LeaderSource::Kind::Constant;
  s.leader.speed = speed;
  return s;
}

sim::RunOptions quiet(sim::ControllerVariant v = sim::ControllerVariant::Accel, std::uint64_t seed = 1) {
  sim::RunOptions o;
  o.seed = seed;
  o.controllers.variant = v;
  return o;
}

double variance(const std::vector<double>& xs) {
  const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size());
}

std::filesystem::path scratch(const char* name) {
  auto p = std::filesystem::temp_directory_path() / "wavectl_tests" / name;
  std::filesystem::create_directories(p.parent_path());
  return p;
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("leader file round trip and validation") {
  sim::LeaderTrajectory tr = sim::constant_leader(20.0, 2.0);
  for (std::size_t i = 0; i < tr.v.size(); ++i) tr.v[i] = 20.0 + 0.1234567891234 * static_cast<double>(i);
  sim::save_leader_trajectory(scratch("leader.csv"), tr);
  const auto back = sim::load_leader_trajectory(scratch("leader.csv"));
  CHECK(back.t == tr.t);
  CHECK(back.v == tr.v);

  {
    std::ofstream out(scratch("gap.csv"));
    out << "t,v\n0,10\n0.1,10\n1.1,10\n";
  }
  CHECK_THROWS_AS(sim::load_leader_trajectory(scratch("gap.csv")), std::invalid_argument);
  {
    std::ofstream out(scratch("neg.csv"));
    out << "t,v\n0,10\n0.1,-1\n";
  }
  CHECK_THROWS_AS(sim::load_leader_trajectory(scratch("neg.csv")), std::invalid_argument);
}

TEST_CASE("generated stop-and-go leader passes validation and cycles") {
  sim::StopAndGoParams p;
  p.duration = 900.0;
  const auto lead = sim::generate_stop_and_go(5, p);
  CHECK_NOTHROW(lead.trajectory.validate());
  const auto [lo, hi] = std::minmax_element(lead.trajectory.v.begin(), lead.trajectory.v.end());
  CHECK(*lo < 10.0);
  CHECK(*hi > 25.0);
  const auto again = sim::generate_stop_and_go(5, p);
  CHECK(again.trajectory.v == lead.trajectory.v);
  CHECK(sim::generate_stop_and_go(6, p).trajectory.v != lead.trajectory.v);
}

TEST_CASE("equilibrium platoon advances without accelerating") {
  const auto s = constant_platoon(20.0, 10, 60.0);
  sim::Simulator simu(s, quiet(sim::ControllerVariant::Baseline));
  for (int k = 0; k < 600; ++k) simu.step(nullptr);
  for (const auto& v : simu.vehicles()) {
    CHECK(v.v == doctest::Approx(20.0).epsilon(1e-9));
    CHECK(std::abs(v.a) < 1e-9);
  }
}

TEST_CASE("leader replays the trajectory sample at every tick") {
  auto s = sim::builtin_scenario("shockwave");
  s.duration = 120.0;
  const auto art = sim::closed_loop_run(s, quiet(sim::ControllerVariant::Baseline, 3));
  const auto lead = s.make_leader(3);
  const auto& rec = art.vehicles.front();
  REQUIRE(rec.kind == sim::VehicleKind::Leader);
  for (std::size_t k = 0; k < rec.t.size(); ++k) {
    REQUIRE(rec.v[k] == doctest::Approx(lead.trajectory.speed_at(rec.t[k])).epsilon(1e-12));
  }
}

TEST_CASE("positions converge under dt refinement") {
  auto final_positions = [](double dt) {
    auto s = sim::builtin_scenario("pulse");
    s.duration = 30.0;
    s.dt = dt;
    sim::Simulator simu(s, quiet(sim::ControllerVariant::Baseline));
    const auto steps = std::llround(s.duration / dt);
    for (long long k = 0; k < steps; ++k) simu.step(nullptr);
    std::vector<double> x;
    for (const auto& v : simu.vehicles()) x.push_back(v.x);
    return x;
  };
  const auto ref = final_positions(0.0125);
  auto err = [&](double dt) {
    const auto x = final_positions(dt);
    double e = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) e = std::max(e, std::abs(x[i] - ref[i]));
    return e;
  };
  const double e1 = err(0.1), e2 = err(0.05);
  CHECK(e1 < 1.0);
  CHECK(e2 < 0.7 * e1);
}

TEST_CASE("cut-in produces the scripted gap and leaves vehicles ahead untouched") {
  const auto s = sim::builtin_scenario("cutin");
  sim::Simulator simu(s, quiet());
  const auto steps = std::llround(30.0 / s.dt);
  for (long long k = 0; k < steps; ++k) simu.step(nullptr);
  const std::size_t before = simu.vehicles().size();
  simu.step(nullptr);  // applies the event first, then integrates
  REQUIRE(simu.vehicles().size() == before + 1);
  REQUIRE(simu.artifact().events.size() == 1);
  const auto& ev = simu.artifact().events.front();
  CHECK(ev.type == "cut_in");
  CHECK(ev.value == 65.0);
  // The recorded state at the event tick has the new vehicle 65 m ahead of the AV.
  const auto& recs = simu.artifact().vehicles;
  const auto& inserted = recs.back();
  const auto& av = recs[1];
  const double gap = inserted.x.front() - av.x.back() - s.vehicle_length;
  CHECK(gap == doctest::Approx(65.0));

  auto bad = s;
  bad.cuts[0].gap = 3.0;
  sim::Simulator unsafe(bad, quiet());
  CHECK_THROWS_AS(
      [&] {
        for (long long k = 0; k <= steps; ++k) unsafe.step(nullptr);
      }(),
      std::invalid_argument);
}

TEST_CASE("cut-out exposes the gap to the next leader") {
  auto s = constant_platoon(20.0, 4, 20.0);
  s.cuts.push_back({5.0, 2, sim::CutEvent::Type::Out, 0.0, 0.0});
  sim::Simulator simu(s, quiet(sim::ControllerVariant::Baseline));
  for (int k = 0; k < 50; ++k) simu.step(nullptr);
  const auto& vs = simu.vehicles();
  const std::size_t count = vs.size();
  const double expect = vs[0].x - vs[2].x - s.vehicle_length;
  simu.step(nullptr);
  const auto& ev = simu.artifact().events.back();
  CHECK(ev.type == "cut_out");
  CHECK(ev.value == doctest::Approx(expect));
  CHECK(simu.vehicles().size() == count - 1);
}

TEST_CASE("a cut-in only changes vehicles behind the insertion point") {
  auto base = constant_platoon(25.0, 6, 60.0);
  base.avs = 1;
  base.humans = 5;
  auto with_cut = base;
  with_cut.cuts.push_back({20.0, 3, sim::CutEvent::Type::In, 20.0, 24.0});
  const auto a = sim::closed_loop_run(base, quiet());
  const auto b = sim::closed_loop_run(with_cut, quiet());
  REQUIRE_FALSE(b.collision);
  for (int id = 0; id < 3; ++id) {
    CHECK(a.vehicles[static_cast<std::size_t>(id)].x == b.vehicles[static_cast<std::size_t>(id)].x);
  }
  CHECK(a.vehicles[3].x != b.vehicles[3].x);
}

TEST_CASE("bottleneck speed limit") {
  sim::BottleneckSpec b;
  b.kappa = 0.25;
  b.v_free = 25.0;
  CHECK(sim::bottleneck_speed_limit(0.0, b) == 25.0);
  CHECK(sim::bottleneck_speed_limit(0.25 / 25.0, b) == doctest::Approx(25.0));
  CHECK(sim::bottleneck_speed_limit(0.05, b) == doctest::Approx(5.0));
  CHECK(sim::bottleneck_speed_limit(0.1, b) == doctest::Approx(0.5 * sim::bottleneck_speed_limit(0.05, b)));
  CHECK_THROWS_AS(sim::bottleneck_speed_limit(-1.0, b), std::invalid_argument);
}

TEST_CASE("bottleneck slows traffic inside the region") {
  const auto s = sim::builtin_scenario("bottleneck");
  const auto art = sim::closed_loop_run(s, quiet(sim::ControllerVariant::Baseline));
  REQUIRE_FALSE(art.collision);
  double slowest = 1e9;
  for (const auto& r : art.vehicles) {
    for (std::size_t k = 0; k < r.t.size(); ++k) {
      if (r.x[k] >= s.bottleneck.x_begin && r.x[k] < s.bottleneck.x_end) slowest = std::min(slowest, r.v[k]);
    }
  }
  CHECK(slowest < 0.9 * s.bottleneck.v_free);
}

TEST_CASE("a stopped cut-in vehicle ends the run as a collision") {
  auto s = sim::builtin_scenario("cutin");
  s.cuts[0].gap = 5.0;
  s.cuts[0].speed = 0.0;
  const auto art = sim::closed_loop_run(s, quiet());
  CHECK(art.collision);
  CHECK(art.events.back().type == "collision");
  CHECK(art.steps < static_cast<std::size_t>(std::llround(s.duration / s.dt)));
}

TEST_CASE("runs are deterministic in the seed") {
  auto s = sim::builtin_scenario("shockwave");
  s.duration = 300.0;
  const auto a = sim::closed_loop_run(s, quiet(sim::ControllerVariant::Accel, 9));
  const auto b = sim::closed_loop_run(s, quiet(sim::ControllerVariant::Accel, 9));
  REQUIRE(a.vehicles.size() == b.vehicles.size());
  for (std::size_t i = 0; i < a.vehicles.size(); ++i) {
    CHECK(a.vehicles[i].x == b.vehicles[i].x);
    CHECK(a.vehicles[i].v == b.vehicles[i].v);
  }
  CHECK(a.pings.size() == b.pings.size());
  const auto c = sim::closed_loop_run(s, quiet(sim::ControllerVariant::Accel, 10));
  CHECK(c.vehicles[0].v != a.vehicles[0].v);
}

TEST_CASE("plan cadence and causality on the event log") {
  auto s = sim::builtin_scenario("shockwave");
  s.duration = 600.0;
  const auto art = sim::closed_loop_run(s, quiet());
  REQUIRE_FALSE(art.collision);
  std::vector<double> plan_times;
  for (const auto& e : art.events) {
    if (e.type != "plan") continue;
    plan_times.push_back(e.t);
    CHECK(e.value <= e.t);   // latest feed arrival consumed
    CHECK(e.value2 <= e.t);  // latest ping consumed
  }
  REQUIRE(plan_times.size() == 10);
  for (std::size_t i = 0; i < plan_times.size(); ++i) CHECK(plan_times[i] == doctest::Approx(60.0 * i));
  for (const auto& d : art.plan_diagnostics) CHECK(d.max_input_arrival <= d.t);
  for (const auto& e : art.estimates) CHECK(e.arrival_t == e.measured_t + 180.0);
  // Vehicles consult the most recent plan and never one from the future.
  for (const auto& row : art.traces) {
    REQUIRE(row.plan_t <= row.t + 1e-9);
    REQUIRE(row.t - row.plan_t < 60.0 + 1e-9);
  }
}

TEST_CASE("disabling the planner equals driving with no plan") {
  auto s = sim::builtin_scenario("shockwave");
  s.duration = 200.0;
  auto o = quiet();
  o.planner = false;
  const auto art = sim::closed_loop_run(s, o);
  sim::Simulator manual(s, o);
  for (int k = 0; k < 2000; ++k) manual.step(nullptr);
  manual.finish();
  const auto& ref = manual.artifact();
  REQUIRE(art.vehicles.size() == ref.vehicles.size());
  for (std::size_t i = 0; i < art.vehicles.size(); ++i) CHECK(art.vehicles[i].x == ref.vehicles[i].x);
  CHECK(art.plans.empty());
  for (const auto& row : art.traces) REQUIRE(row.plan_t == -1.0);
}

TEST_CASE("logged distance equals the integral of logged speed") {
  auto s = sim::builtin_scenario("shockwave");
  s.duration = 300.0;
  const auto art = sim::closed_loop_run(s, quiet(sim::ControllerVariant::Accel, 2));
  for (const auto& r : art.vehicles) {
    double dist = 0.0;
    for (std::size_t k = 1; k < r.t.size(); ++k) dist += 0.5 * (r.v[k - 1] + r.v[k]) * (r.t[k] - r.t[k - 1]);
    CHECK(r.x.back() - r.x.front() == doctest::Approx(dist).epsilon(1e-9));
  }
}

TEST_CASE("no overlap at any recorded tick") {
  auto s = sim::builtin_scenario("shockwave");
  s.duration = 300.0;
  const auto art = sim::closed_loop_run(s, quiet(sim::ControllerVariant::Mpc, 4));
  REQUIRE_FALSE(art.collision);
  const std::size_t ticks = art.vehicles.front().t.size();
  for (std::size_t k = 0; k < ticks; ++k) {
    for (std::size_t i = 1; i < art.vehicles.size(); ++i) {
      REQUIRE(art.vehicles[i - 1].x[k] - art.vehicles[i].x[k] - s.vehicle_length > 0.0);
    }
  }
}

TEST_CASE("baseline shockwave amplifies speed variance downstream") {
  const auto s = sim::builtin_scenario("shockwave");
  const auto art = sim::closed_loop_run(s, quiet(sim::ControllerVariant::Baseline, 1));
  REQUIRE_FALSE(art.collision);
  CHECK(variance(art.vehicles.back().v) > variance(art.vehicles.front().v));
}

TEST_CASE("artifact round trip") {
  auto s = sim::builtin_scenario("freeflow");
  s.duration = 30.0;
  const auto art = sim::closed_loop_run(s, quiet());
  sim::write_artifact(scratch("artifact"), art);
  const auto back = sim::read_artifact(scratch("artifact"));
  REQUIRE(back.vehicles.size() == art.vehicles.size());
  for (std::size_t i = 0; i < art.vehicles.size(); ++i) {
    CHECK(back.vehicles[i].id == art.vehicles[i].id);
    CHECK(back.vehicles[i].kind == art.vehicles[i].kind);
    CHECK(back.vehicles[i].x == art.vehicles[i].x);
    CHECK(back.vehicles[i].v == art.vehicles[i].v);
  }
}

TEST_CASE("scenario validation") {
  Scenario s;
  s.dt = 0.03;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.dt = 0.1;
  s.cuts.push_back({10.0, 99, sim::CutEvent::Type::In, 65.0, 20.0});
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  CHECK_THROWS_AS(sim::builtin_scenario("nowhere"), std::invalid_argument);
  CHECK(sim::parse_variant(sim::variant_name(sim::ControllerVariant::AccelNoLc)) == sim::ControllerVariant::AccelNoLc);
  Scenario inter;
  inter.avs = 2;
  inter.humans = 6;
  inter.interleaved = true;
  const auto lay = inter.layout();
  CHECK(lay[0] == sim::VehicleKind::Av);
  CHECK(lay[4] == sim::VehicleKind::Av);
  CHECK(std::count(lay.begin(), lay.end(), sim::VehicleKind::Av) == 2);
}

}  // TEST_SUITE
