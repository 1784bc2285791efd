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
#include <random>
#include <vector>

#include <doctest.h>

#include "wavectl/leader.hpp"
#include "wavectl/planner.hpp"

using namespace wavectl;
using planner::PlannerConfig;
using planner::SpeedField;

namespace {

// Coarse snapshot of a wave field: one segment mean per coarse segment.
planner::TseSnapshot coarse_snapshot(const sim::WaveField& wf, double t, const PlannerConfig& cfg) {
  planner::TseSnapshot s;
  s.measured_t = t;
  for (double a = cfg.corridor_begin; a < cfg.corridor_end; a += cfg.coarse_length) {
    const double b = std::min(a + cfg.coarse_length, cfg.corridor_end);
    s.field.x.push_back(0.5 * (a + b));
    s.field.v.push_back(wf.segment_mean(a, b, t));
  }
  return s;
}

// Centroid of the speed deficit below v_free, evaluated on a 10 m grid.
double deficit_centroid(const std::vector<double>& xs, const std::vector<double>& v, double v_free) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = std::max(0.0, v_free - v[i]);
    num += d * xs[i];
    den += d;
  }
  return num / den;
}

double rmse(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

std::filesystem::path scratch(const char* name) {
  auto p = std::filesystem::temp_directory_path() / "wavectl_tests" / name;
  std::filesystem::create_directories(p.parent_path());
  return p;
}

}  // namespace

TEST_SUITE("planner") {

TEST_CASE("store stamps estimate arrival with the latency") {
  planner::DataStore store(180.0);
  CHECK(store.ingest_segment_estimate({0, 400.0, 25.0, 60.0, 0.0}) == planner::IngestResult::Accepted);
  CHECK(store.history_arrived_by(239.0).empty());
  const auto h = store.history_arrived_by(240.0);
  REQUIRE(h.size() == 1);
  CHECK(h[0].arrival_t == 240.0);
  CHECK(h[0].measured_t == 60.0);
}

TEST_CASE("store ping window, dedup and ordering") {
  planner::DataStore store;
  for (int k = 0; k <= 60; ++k) CHECK(store.ingest_ping({7, 100.0 + k, 10.0 * k, 20.0, 0}) == planner::IngestResult::Accepted);
  CHECK(store.ingest_ping({7, 130.0, 0.0, 20.0, 0}) == planner::IngestResult::Duplicate);
  CHECK(store.pings_in_window(100.0, 160.0).size() == 61);
  CHECK(store.ingest_ping({7, 150.5, 0.0, 20.0, 0}) == planner::IngestResult::OutOfOrder);
  CHECK(store.ingest_ping({7, 157.5, 0.0, 20.0, 0}) == planner::IngestResult::Accepted);
  CHECK_FALSE(store.warnings().empty());
  CHECK(store.ingest_segment_estimate({0, 400.0, 25.0, 600.0, 0.0}) == planner::IngestResult::Accepted);
  CHECK(store.ingest_segment_estimate({0, 400.0, 25.0, 580.0, 0.0}) == planner::IngestResult::OutOfOrder);
  CHECK(store.ingest_segment_estimate({0, 400.0, 25.0, 600.0, 0.0}) == planner::IngestResult::Duplicate);
}

TEST_CASE("prediction of a constant or free-flow field is persistence") {
  PlannerConfig cfg;
  planner::TseSnapshot s;
  s.measured_t = 0.0;
  s.field = {{400.0, 1200.0, 2000.0}, {25.0, 25.0, 25.0}};
  const std::vector<double> xs = {0.0, 500.0, 1900.0, 5000.0};
  const auto pred = planner::predict_tse({s}, 180.0, xs, cfg);
  for (double v : pred) CHECK(v == 25.0);

  s.field.v = {29.0, 22.0, 27.0};  // all above 60% of free speed
  CHECK(planner::predict_tse({s}, 180.0, xs, cfg) == planner::persistence_tse({s}, xs));
  CHECK_THROWS_AS(planner::predict_tse({}, 0.0, xs, cfg), std::invalid_argument);
}

TEST_CASE("moving wave is localized within one fine segment and beats persistence") {
  PlannerConfig cfg;
  sim::WaveField wf;
  wf.v_free = 30.0;
  wf.wave_speed = -5.0;
  wf.waves = {{10000.0, 3000.0, 20.0}};
  const double now = 180.0;
  const auto snap = coarse_snapshot(wf, 0.0, cfg);

  std::vector<double> grid;
  for (double x = 2000.0; x < 18000.0; x += 10.0) grid.push_back(x);
  const auto pred = planner::predict_tse({snap}, now, grid, cfg);
  std::vector<double> truth;
  for (double x : grid) truth.push_back(wf.speed(x, now));
  const double true_center = deficit_centroid(grid, truth, wf.v_free);
  CHECK(true_center == doctest::Approx(10000.0 - 900.0).epsilon(1e-3));
  CHECK(std::abs(deficit_centroid(grid, pred, wf.v_free) - true_center) <= cfg.fine_length);

  const auto centers = cfg.fine_centers();
  std::vector<double> truth_c;
  for (double x : centers) truth_c.push_back(wf.segment_mean(x - 100.0, x + 100.0, now));
  const double e_pred = rmse(planner::predict_tse({snap}, now, centers, cfg), truth_c);
  const double e_pers = rmse(planner::persistence_tse({snap}, centers), truth_c);
  CHECK(e_pred <= 0.7 * e_pers);
}

TEST_CASE("fusion gives pings precedence per lane") {
  const std::vector<double> edges = {0.0, 200.0, 400.0, 600.0};
  const std::vector<double> pred = {25.0, 25.0, 25.0};
  auto none = planner::fuse(pred, {}, edges, 2);
  REQUIRE(none.size() == 2);
  CHECK(none[0].v == pred);
  CHECK(none[1].v == pred);

  const std::vector<planner::VehiclePing> pings = {
      {1, 0.0, 250.0, 15.0, 0}, {2, 0.0, 50.0, 10.0, 1}, {3, 0.0, 120.0, 20.0, 1}};
  const auto fused = planner::fuse(pred, pings, edges, 2);
  CHECK(fused[0].v == std::vector<double>{25.0, 15.0, 25.0});
  CHECK(fused[1].v == std::vector<double>{15.0, 25.0, 25.0});
  CHECK(fused[0].x == std::vector<double>{100.0, 300.0, 500.0});
}

TEST_CASE("kernel smoothing") {
  const SpeedField flat{{0.0, 1000.0, 2000.0}, {18.0, 18.0, 18.0}};
  for (auto k : {planner::KernelKind::Uniform, planner::KernelKind::Triangular, planner::KernelKind::Quartic,
                 planner::KernelKind::Gaussian}) {
    CHECK(planner::kernel_smooth(flat, 300.0, 700.0, k) == doctest::Approx(18.0).epsilon(1e-14));
  }
  const SpeedField line{{0.0, 10000.0}, {0.0, 10000.0}};
  CHECK(planner::kernel_smooth(line, 1234.0, 500.0, planner::KernelKind::Uniform) == doctest::Approx(1484.0));
  // Triangular weight 1 - u on a linear field: mean offset w/3.
  CHECK(planner::kernel_smooth(line, 1200.0, 600.0, planner::KernelKind::Triangular) == doctest::Approx(1400.0));
  CHECK_THROWS_AS(planner::kernel_smooth(line, 0.0, 0.0, planner::KernelKind::Uniform), std::invalid_argument);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> spd(0.0, 30.0);
  SpeedField rough;
  for (int i = 0; i < 40; ++i) {
    rough.x.push_back(100.0 * i);
    rough.v.push_back(spd(rng));
  }
  for (double xa = 0.0; xa < 3500.0; xa += 137.0) {
    double lo = 1e9, hi = -1e9;
    for (double x = xa; x <= xa + 400.0; x += 1.0) {
      lo = std::min(lo, rough.at(x));
      hi = std::max(hi, rough.at(x));
    }
    for (auto k : {planner::KernelKind::Uniform, planner::KernelKind::Gaussian}) {
      const double s = planner::kernel_smooth(rough, xa, 400.0, k);
      CHECK(s >= lo - 1e-9);
      CHECK(s <= hi + 1e-9);
    }
  }
}

TEST_CASE("bottleneck identification persists before firing") {
  std::vector<double> edges;
  for (int i = 0; i <= 10; ++i) edges.push_back(200.0 * i);
  SpeedField f;
  for (int i = 0; i < 10; ++i) {
    f.x.push_back(200.0 * i + 100.0);
    f.v.push_back(i >= 5 && i <= 7 ? 8.0 : 28.0);
  }
  planner::BottleneckTracker tr(18.0, 3);
  CHECK_FALSE(tr.update(f, edges).has_value());
  CHECK_FALSE(tr.update(f, edges).has_value());
  const auto r = tr.update(f, edges);
  REQUIRE(r.has_value());
  CHECK(r->first == 5);
  CHECK(r->last == 7);
  CHECK(r->x_begin == 1000.0);
  CHECK(r->x_end == 1600.0);
  CHECK(r->speed == 8.0);

  SpeedField free = f;
  std::fill(free.v.begin(), free.v.end(), 28.0);
  CHECK_FALSE(tr.update(free, edges).has_value());
  planner::BottleneckTracker once(18.0, 3);
  CHECK_FALSE(once.update(f, edges).has_value());
}

TEST_CASE("buffer ramps linearly upstream of the bottleneck") {
  SpeedField s;
  for (int i = 0; i < 40; ++i) {
    s.x.push_back(50.0 * i + 25.0);
    s.v.push_back(s.x.back() < 1500.0 ? 30.0 : 10.0);
  }
  planner::BottleneckRegion r;
  r.x_begin = 1500.0;
  r.x_end = 2000.0;
  r.speed = 10.0;
  const auto plan = planner::design_buffer(s, r, 1000.0);
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    const double x = s.x[i];
    if (x >= 500.0 && x < 1500.0) {
      CHECK(plan[i] == doctest::Approx(30.0 - 20.0 * (x - 500.0) / 1000.0));
      CHECK(plan[i] >= 10.0);
      CHECK(plan[i] <= 30.0);
    } else {
      CHECK(plan[i] == s.v[i]);
    }
  }
  // The midpoint of the buffer, x = 1000, sits at center index 19 (x = 975) and 20 (1025).
  CHECK(0.5 * (plan[19] + plan[20]) == doctest::Approx(20.0));
  CHECK(planner::design_buffer(s, std::nullopt, 1000.0) == s.v);
}

TEST_CASE("plan query interpolates and falls back across lanes") {
  planner::SpeedPlan p;
  p.lanes = {{0, {100.0, 300.0}, {20.0, 30.0}}, {1, {100.0, 300.0}, {10.0, 10.0}}};
  CHECK(p.query(100.0, 0) == 20.0);
  CHECK(p.query(200.0, 0) == doctest::Approx(25.0));
  CHECK(p.query(5000.0, 0) == 30.0);
  CHECK(p.query(-10.0, 1) == 10.0);
  CHECK(p.query(200.0, 5) == doctest::Approx(17.5));
}

TEST_CASE("constant free-flow field is a fixed point of the pipeline") {
  PlannerConfig cfg;
  cfg.corridor_end = 8000.0;
  cfg.lanes = 2;
  planner::DataStore store(cfg.latency);
  planner::SpeedPlanner sp(cfg);
  int seg = 0;
  for (double a = 0.0; a < cfg.corridor_end; a += cfg.coarse_length) {
    for (double t = 0.0; t <= 600.0; t += 60.0) {
      store.ingest_segment_estimate({seg, a + cfg.coarse_length / 2, 26.0, t, 0.0});
    }
    ++seg;
  }
  for (int k = 0; k < 600; ++k) store.ingest_ping({1, double(k), 26.0 * k, 26.0, k % 2});
  // From the first feed arrival on; earlier plans fall back to the road free speed.
  for (double t = 180.0; t <= 600.0; t += 60.0) sp.publish(store, t);
  REQUIRE(store.plans().size() == 8);
  for (const auto& plan : store.plans()) {
    for (const auto& lp : plan.lanes) {
      for (double v : lp.target) CHECK(v == doctest::Approx(26.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("plans consume only data that has arrived") {
  PlannerConfig cfg;
  cfg.corridor_end = 4000.0;
  planner::DataStore store(cfg.latency);
  planner::SpeedPlanner sp(cfg);
  for (double t = 0.0; t <= 1200.0; t += 60.0) {
    for (int j = 0; j < 5; ++j) store.ingest_segment_estimate({j, 400.0 + 800.0 * j, 20.0, t, 0.0});
  }
  for (double t = 60.0; t <= 600.0; t += 60.0) {
    const auto d = sp.publish(store, t);
    CHECK(d.max_input_arrival <= t);
    CHECK(d.predicted == (t >= 180.0));
  }
  const auto* latest = store.latest_plan(330.0);
  REQUIRE(latest != nullptr);
  CHECK(latest->t == 300.0);
  CHECK(store.latest_plan(30.0) == nullptr);
}

TEST_CASE("stale source does not reach lanes covered by pings") {
  PlannerConfig cfg;
  cfg.corridor_end = 4000.0;
  cfg.buffer = false;
  auto plan_with_source = [&](double stale) {
    planner::DataStore store(cfg.latency);
    planner::SpeedPlanner sp(cfg);
    for (int j = 0; j < 5; ++j) store.ingest_segment_estimate({j, 400.0 + 800.0 * j, stale, 0.0, 0.0});
    // One ping in every fine segment within the last minute.
    for (int i = 0; i < 20; ++i) store.ingest_ping({i, 200.0, 200.0 * i + 100.0, 12.0 + 0.5 * i, 0});
    sp.publish(store, 240.0);
    return store.plans().back().lanes[0].target;
  };
  CHECK(plan_with_source(30.0) == plan_with_source(5.0));
}

TEST_CASE("csv interfaces round trip") {
  const std::vector<planner::VehiclePing> pings = {{1, 0.5, 12.25, 20.125, 0}, {2, 1.0, 99.0, 0.0, 1}};
  planner::write_pings_csv(scratch("pings.csv"), pings);
  const auto back = planner::read_pings_csv(scratch("pings.csv"));
  REQUIRE(back.size() == 2);
  CHECK(back[1].vehicle_id == 2);
  CHECK(back[0].speed == 20.125);

  std::vector<planner::SegmentEstimate> est = {{3, 402.336, 24.5, 60.0, 0.0}};
  planner::write_estimates_csv(scratch("est.csv"), est);
  const auto eb = planner::read_estimates_csv(scratch("est.csv"));
  REQUIRE(eb.size() == 1);
  CHECK(eb[0].x_center == 402.336);

  planner::SpeedPlan p{60.0, {{0, {100.0, 300.0}, {20.0, 21.5}}}};
  planner::write_plans_csv(scratch("plans.csv"), {p, planner::SpeedPlan{120.0, p.lanes}});
  const auto pb = planner::read_plans_csv(scratch("plans.csv"));
  REQUIRE(pb.size() == 2);
  CHECK(pb[1].t == 120.0);
  CHECK(pb[0].lanes[0].target == p.lanes[0].target);
}

TEST_CASE("config validation") {
  PlannerConfig cfg;
  cfg.window = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  CHECK_THROWS_AS(planner::parse_kernel("box"), std::invalid_argument);
  CHECK(planner::parse_kernel(planner::kernel_name(planner::KernelKind::Quartic)) == planner::KernelKind::Quartic);
}

}  // TEST_SUITE
