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
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <doctest.h>

#include "wavectl/acc_controller.hpp"

using namespace wavectl;
using Samples = std::vector<std::optional<double>>;

TEST_SUITE("acc") {

TEST_CASE("clipping worked examples") {
  const Samples sixty(10, 60.0);
  CHECK(*acc::clip_speed_setting(70.0, sixty) == 65);
  const Samples ten(10, 10.0);
  CHECK(*acc::clip_speed_value(8.0, ten) == 20.0);
  CHECK(*acc::clip_speed_setting(8.0, ten) == 20);
  CHECK(*acc::clip_speed_setting(58.0, sixty) == 58);
}

TEST_CASE("clipping skips zeros and empty samples") {
  Samples mixed = {60.0, 0.0, std::nullopt, 60.0, 0.0};
  CHECK(*acc::clip_speed_setting(70.0, mixed) == 65);
  Samples none = {0.0, std::nullopt};
  CHECK_FALSE(acc::clip_speed_setting(50.0, none).has_value());
  CHECK_FALSE(acc::clip_speed_setting(50.0, Samples{}).has_value());
}

TEST_CASE("randomized clipping lands in the absolute range and the band") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> speed(0.0, 90.0), action(-20.0, 120.0);
  std::uniform_int_distribution<int> count(1, 10);
  for (int i = 0; i < 1000; ++i) {
    Samples recent;
    const int n = count(rng);
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
      const double s = speed(rng) + 0.1;
      recent.push_back(s);
      sum += s;
    }
    const double mean = sum / n;
    const double a = action(rng);
    const double value = *acc::clip_speed_value(a, recent);
    const int setting = *acc::clip_speed_setting(a, recent);
    REQUIRE(value >= 20.0);
    REQUIRE(value <= 73.0);
    REQUIRE(setting >= 20);
    REQUIRE(setting <= 73);
    // Independent two-stage clamp.
    const double expected = std::clamp(std::clamp(a, mean - 15.0, mean + 5.0), 20.0, 73.0);
    REQUIRE(value == doctest::Approx(expected).epsilon(1e-12));
    const bool band_reachable = std::max(20.0, mean - 15.0) <= std::min(73.0, mean + 5.0);
    if (band_reachable && std::ceil(std::max(20.0, mean - 15.0)) <= std::floor(std::min(73.0, mean + 5.0))) {
      REQUIRE(setting >= mean - 15.0);
      REQUIRE(setting <= mean + 5.0);
    }
  }
}

TEST_CASE("gap bars and setpoint validation") {
  CHECK(acc::gap_bar_time(1) == 1.2);
  CHECK(acc::gap_bar_time(2) == 1.5);
  CHECK(acc::gap_bar_time(3) == 2.0);
  CHECK_THROWS_AS(acc::gap_bar_time(4), std::invalid_argument);
  CHECK_THROWS_AS(acc::validate_setpoints({19, 1}), std::invalid_argument);
  CHECK_THROWS_AS(acc::acc_plant_accel(20.0, 20.0, std::nullopt, {74, 1}, {}), std::invalid_argument);
}

TEST_CASE("plant equilibria") {
  acc::AccPlantParams p;
  const acc::AccSetpoints sp{45, 2};
  const double v_ref = 45 * acc::kMphToMps;
  CHECK(acc::acc_plant_accel(v_ref, 0.0, std::nullopt, sp, p) == doctest::Approx(0.0));
  const double v = 15.0;
  const double d = 1.5 * v + p.d_off;
  // Speed mode would accelerate (v < v_ref), gap mode sits at equilibrium.
  CHECK(acc::acc_plant_accel(v, v, d, sp, p) == doctest::Approx(0.0).epsilon(1e-12));
  // Beyond the switch range only the speed law acts.
  CHECK(acc::acc_plant_accel(v, 0.0, 500.0, sp, p) ==
        doctest::Approx(std::min(p.a_max, p.k_p * (v_ref - v))));
}

TEST_CASE("plant never exceeds the speed-mode command") {
  acc::AccPlantParams p;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> spd(0.0, 35.0), gap(0.5, 200.0);
  std::uniform_int_distribution<int> setting(20, 73), bar(1, 3);
  for (int i = 0; i < 5000; ++i) {
    const acc::AccSetpoints sp{setting(rng), bar(rng)};
    const double v = spd(rng);
    const double a = acc::acc_plant_accel(v, spd(rng), gap(rng), sp, p);
    const double speed_mode = std::clamp(p.k_p * (sp.speed_setting * acc::kMphToMps - v), p.a_min, p.a_max);
    REQUIRE(a <= speed_mode + 1e-12);
  }
}

TEST_CASE("speed step response is monotone with bounded overshoot") {
  acc::AccPlantParams p;
  const double dt = 0.1;
  double v = 50 * acc::kMphToMps;
  const double target = 55 * acc::kMphToMps;
  double prev = v, peak = v;
  for (int k = 0; k < 600; ++k) {
    v += dt * acc::acc_plant_accel(v, 0.0, std::nullopt, {55, 1}, p);
    CHECK(v >= prev - 1e-12);
    prev = v;
    peak = std::max(peak, v);
  }
  CHECK(std::abs(v - target) < 1e-3);
  CHECK(peak - target <= 0.1 * (target - 50 * acc::kMphToMps));
}

TEST_CASE("gap mode is locally stable") {
  acc::AccPlantParams p;
  const acc::AccSetpoints sp{73, 2};
  const double v0 = 20.0, d0 = 1.5 * v0 + p.d_off;
  // Jacobian of (d' = v_l - v, v' = a(v, v_l, d)) by central differences.
  const double eps = 1e-6;
  auto a = [&](double v, double d) { return acc::acc_plant_accel(v, v0, d, sp, p); };
  Eigen::Matrix2d J;
  J << 0.0, -1.0, (a(v0, d0 + eps) - a(v0, d0 - eps)) / (2 * eps), (a(v0 + eps, d0) - a(v0 - eps, d0)) / (2 * eps);
  const Eigen::Vector2cd ev = J.eigenvalues();
  CHECK(ev[0].real() < 0.0);
  CHECK(ev[1].real() < 0.0);

  // A 5 m perturbation decays in simulation.
  double d = d0 + 5.0, v = v0;
  for (int k = 0; k < 3000; ++k) {
    const double acc_now = a(v, d);
    d += (v0 - v) * 0.1;
    v += acc_now * 0.1;
  }
  CHECK(std::abs(d - d0) < 0.01);
  CHECK(std::abs(v - v0) < 0.01);
}

TEST_CASE("reward terms") {
  acc::RewardParams p;
  const std::vector<double> zero = {0.0, 0.0};
  CHECK(acc::reward(0.0, 20.0, 20.0, zero, 30.0, p) == 1.0);
  CHECK(acc::reward(0.0, 20.0, 20.0, zero, 3.0, p) == doctest::Approx(1.0 - p.c4));
  CHECK(acc::reward(0.0, 20.0, 20.0, zero, 200.0, p) == doctest::Approx(1.0 - p.c4));
  const std::vector<double> fuel = {0.8, 1.2, 1.0};
  const double by_hand = 1.0 - 0.05 * 0.25 - 0.01 * 4.0 - 0.1 * (3.0 / 3.0);
  CHECK(acc::reward(-0.5, 22.0, 20.0, fuel, 30.0, p) == doctest::Approx(by_hand));
  CHECK_THROWS_AS(acc::reward(0.0, 0.0, 0.0, std::vector<double>{}, 10.0, p), std::invalid_argument);
}

TEST_CASE("heuristic policy") {
  const Samples recent(10, 50.0);
  acc::AccObservation obs;
  obs.v = 50 * acc::kMphToMps;
  obs.v_s = obs.v;
  obs.current = {40, 2};
  auto sp = acc::heuristic_policy(obs, recent);
  CHECK(sp.speed_setting == 50);
  CHECK(sp.gap_setting == 1);

  obs.v_s = 20 * acc::kMphToMps;
  sp = acc::heuristic_policy(obs, recent);
  CHECK(sp.gap_setting == 3);
  CHECK(sp.speed_setting == 35);

  obs.v_s.reset();
  CHECK(acc::heuristic_policy(obs, recent) == obs.current);
}

TEST_CASE("button presses stay within the single plus hold budget") {
  for (int from = 20; from <= 73; ++from) {
    for (int to = 20; to <= 73; ++to) {
      const auto plan = acc::plan_presses({from, 1}, {to, 1});
      const int delta = std::abs(to - from);
      REQUIRE(plan.single_presses + plan.hold_presses <= delta);
      REQUIRE(plan.single_presses + 5 * plan.hold_presses == delta);
      REQUIRE(plan.hold_presses == delta / 5);
      REQUIRE(plan.gap_presses == 0);
    }
  }
  CHECK(acc::plan_presses({40, 3}, {40, 1}).gap_presses == 1);
  CHECK(acc::plan_presses({40, 1}, {45, 1}).direction == 1);
}

TEST_CASE("setpoint changes land after the press latency") {
  acc::AccPlantParams p;
  acc::AccController ctl(p, {40, 1});
  const double v = 50 * acc::kMphToMps;
  const double dt = 0.1;
  int landed_tick = -1;
  for (int k = 0; k < 20; ++k) {
    const auto row = ctl.step(k * dt, v, std::nullopt, std::nullopt, v);
    if (k == 0) CHECK(row.press_batch);
    if (landed_tick < 0 && row.active.speed_setting == 50) landed_tick = k;
  }
  CHECK(landed_tick == 5);
}

}  // TEST_SUITE
