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
#include <random>

#include <doctest.h>

#include "wavectl/cfm.hpp"
#include "wavectl/ocp.hpp"

using namespace wavectl;

namespace {

ocp::OcpSetup small_setup(int avs, int pieces) {
  ocp::OcpSetup s;
  s.followers = 8;
  s.avs = avs;
  s.horizon = 60.0;
  s.pieces = pieces;
  s.leader.duration = 60.0;
  s.leader.first_wave = 300.0;
  return s;
}

// A platoon behind a leader cruising at a constant speed.
ocp::OcpProblem steady_problem(int avs) {
  auto p = ocp::make_problem(small_setup(avs, 20));
  const double v = p.v0.front();
  for (std::size_t k = 0; k < p.leader_v.size(); ++k) {
    p.leader_v[k] = v;
    p.leader_x[k] = p.leader_x.front() + v * p.dt * static_cast<double>(k);
  }
  return p;
}

}  // namespace

TEST_SUITE("ocp") {

TEST_CASE("Bando equilibrium gap inverts the optimal velocity") {
  const cfm::OvmParams p;
  for (double v : {2.0, 10.0, 20.0, 25.0}) {
    const double h = ocp::bando_equilibrium_gap(v, p);
    CHECK(cfm::bando_optimal_velocity(h, p) == doctest::Approx(v).epsilon(1e-9));
  }
}

TEST_CASE("problem construction places the platoon at equilibrium") {
  const auto p = ocp::make_problem(small_setup(2, 20));
  CHECK(p.followers() == 8);
  CHECK(p.av_count() == 2);
  CHECK(p.is_av.front() == 1);
  CHECK(p.steps() % p.pieces == 0);
  CHECK(p.control_size() == 40u);
  for (int i = 0; i < p.followers(); ++i) {
    const double front = i == 0 ? p.leader_x.front() : p.x0[static_cast<std::size_t>(i - 1)];
    const double gap = front - p.x0[static_cast<std::size_t>(i)] - p.ovm.l;
    CHECK(cfm::bando_optimal_velocity(gap, p.ovm) == doctest::Approx(p.v0[static_cast<std::size_t>(i)]).epsilon(1e-9));
  }
}

TEST_CASE("steady leader leaves an all-human platoon at rest relative to it") {
  const auto p = steady_problem(0);
  CHECK(p.control_size() == 0u);
  const auto e = ocp::ocp_objective({}, p);
  CHECK(e.objective == doctest::Approx(0.0).scale(1.0));
  CHECK(ocp::baseline_objective(p) == doctest::Approx(e.objective));
  const auto s = ocp::rollout({}, p);
  for (double v : s.v.back()) CHECK(v == doctest::Approx(p.v0.front()).epsilon(1e-9));
}

TEST_CASE("an all-human platoon scores the baseline") {
  auto p = ocp::make_problem(small_setup(0, 20));
  const auto e = ocp::ocp_objective({}, p);
  CHECK_FALSE(e.collision);
  CHECK(e.objective == doctest::Approx(ocp::baseline_objective(p)).epsilon(1e-12));
}

TEST_CASE("zero controls behind a steady leader cost nothing") {
  const auto p = steady_problem(1);
  const auto e = ocp::ocp_objective(std::vector<double>(p.control_size(), 0.0), p);
  CHECK_FALSE(e.collision);
  CHECK(std::isfinite(e.total));
  CHECK(e.objective == doctest::Approx(0.0).scale(1.0));
  CHECK(e.total >= e.objective);
}

TEST_CASE("cruising through a braking leader is reported as a collision") {
  const auto p = ocp::make_problem(small_setup(1, 20));
  const auto e = ocp::ocp_objective(std::vector<double>(p.control_size(), 0.0), p);
  CHECK(e.collision);
  CHECK(std::isinf(e.total));
  CHECK(e.diagnostic.find("collision") != std::string::npos);
  CHECK_THROWS(ocp::rollout(std::vector<double>(p.control_size(), 0.0), p));
}

TEST_CASE("human mimic with one piece per step reproduces the baseline") {
  auto s = small_setup(1, 600);
  const auto p = ocp::make_problem(s);
  REQUIRE(p.steps_per_piece() == 1);
  const auto u = ocp::human_mimic_guess(p);
  const auto e = ocp::ocp_objective(u, p);
  CHECK_FALSE(e.collision);
  CHECK(e.objective == doctest::Approx(ocp::baseline_objective(p)).epsilon(1e-9));
}

TEST_CASE("adjoint gradient agrees with central differences") {
  for (int pieces : {10, 20, 40}) {
    CAPTURE(pieces);
    const auto p = ocp::make_problem(small_setup(2, pieces));
    const auto g = ocp::gradient_check(p, 7);
    CHECK(g.pieces == pieces);
    CHECK(g.max_abs_gradient > 0.0);
    CHECK(g.max_rel_error <= 1e-4);
  }
}

TEST_CASE("a small step against the gradient decreases the total") {
  const auto p = ocp::make_problem(small_setup(1, 20));
  const auto u = ocp::initial_guess(p);
  const auto g = ocp::gradient_adjoint(u, p);
  double norm2 = 0.0;
  for (double x : g) norm2 += x * x;
  REQUIRE(norm2 > 0.0);
  const double f0 = ocp::ocp_objective(u, p).total;
  auto step = u;
  const double t = 1e-3 / std::sqrt(norm2);
  for (std::size_t i = 0; i < u.size(); ++i) step[i] -= t * g[i];
  const double f1 = ocp::ocp_objective(step, p).total;
  CHECK(f1 < f0);
  // First-order model of the decrease.
  CHECK((f0 - f1) == doctest::Approx(t * norm2).epsilon(0.05));
}

TEST_CASE("optimizer trace is monotone and controls stay in bounds") {
  const auto p = ocp::make_problem(small_setup(1, 20));
  const auto r = ocp::ocp_optimize(p, ocp::initial_guess(p), 15);
  REQUIRE(r.trace.size() >= 2);
  for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] <= r.trace[i - 1]);
  for (double u : r.u) {
    CHECK(u >= p.u_min);
    CHECK(u <= p.u_max);
  }
  CHECK(r.final_eval.total == doctest::Approx(r.trace.back()));
}

TEST_CASE("inactive AVs keep their controls") {
  const auto p = ocp::make_problem(small_setup(2, 20));
  const auto u0 = ocp::initial_guess(p);
  const auto r = ocp::ocp_optimize(p, u0, 5, ocp::GradientKind::Adjoint, {1, 0});
  const auto n = static_cast<std::size_t>(p.pieces);
  // Layout is AV-major, so the second AV owns the second block.
  for (std::size_t i = n; i < 2 * n; ++i) CHECK(r.u[i] == u0[i]);
}

TEST_CASE("one optimized AV lowers the platoon objective below the baseline") {
  const auto p = ocp::make_problem(small_setup(1, 20));
  const auto r = ocp::ocp_optimize_sequential(p, 30, 0);
  CHECK_FALSE(r.result.final_eval.collision);
  CHECK(r.result.final_eval.objective < ocp::baseline_objective(p));
  REQUIRE(r.after_each_av.size() == 1u);
}

TEST_CASE("validation") {
  auto p = ocp::make_problem(small_setup(1, 20));
  CHECK_NOTHROW(p.validate());
  auto bad = p;
  bad.pieces = 7;
  CHECK_THROWS(bad.validate());
  bad = p;
  bad.u_min = 1.0;
  bad.u_max = -1.0;
  CHECK_THROWS(bad.validate());
  bad = p;
  bad.x0.pop_back();
  CHECK_THROWS(bad.validate());
  CHECK_THROWS(ocp::ocp_objective(std::vector<double>(3, 0.0), p));
}

}  // TEST_SUITE
