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

#include "wavectl/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>

#include <fmt/format.h>

#include "wavectl/csv.hpp"

namespace wavectl::sim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// Acceleration used by a replayed leader to rejoin its profile after the
// bottleneck held it below the recorded speed.
constexpr double kLeaderRecoveryAccel = 1.5;

std::int64_t steps_for(double seconds, double dt) { return std::llround(seconds / dt); }

}  // namespace

std::string variant_name(ControllerVariant v) {
  switch (v) {
    case ControllerVariant::Baseline: return "baseline";
    case ControllerVariant::Accel: return "accel";
    case ControllerVariant::AccelNoLc: return "accel_nolc";
    case ControllerVariant::Acc: return "acc";
    case ControllerVariant::Mpc: return "mpc";
  }
  return "?";
}

ControllerVariant parse_variant(const std::string& s) {
  if (s == "baseline" || s == "none") return ControllerVariant::Baseline;
  if (s == "accel") return ControllerVariant::Accel;
  if (s == "accel_nolc") return ControllerVariant::AccelNoLc;
  if (s == "acc") return ControllerVariant::Acc;
  if (s == "mpc") return ControllerVariant::Mpc;
  throw std::invalid_argument("unknown controller variant: " + s);
}

Simulator::Simulator(Scenario scenario, RunOptions options)
    : scenario_(std::move(scenario)), options_(std::move(options)) {
  scenario_.validate();
  options_.controllers.idm.validate();
  options_.controllers.base.validate();
  options_.controllers.lc.validate();
  options_.controllers.acc_plant.validate();
  leader_ = scenario_.make_leader(options_.seed);

  std::vector<VehicleKind> kinds = scenario_.layout();
  if (options_.controllers.variant == ControllerVariant::Baseline) {
    std::fill(kinds.begin(), kinds.end(), VehicleKind::Human);
  }
  const double v0 = leader_.trajectory.speed_at(0.0);
  double gap;
  if (scenario_.initial_gap) {
    gap = *scenario_.initial_gap;
  } else {
    if (v0 >= options_.controllers.idm.v0) {
      throw std::invalid_argument("scenario: leader starts at or above the IDM desired speed; set initial_gap");
    }
    gap = cfm::idm_equilibrium_gap(v0, options_.controllers.idm);
  }
  const double spacing = gap + scenario_.vehicle_length;
  const double x_lead = spacing * static_cast<double>(kinds.size());
  art_.leader_start_x = x_lead;

  auto add = [&](VehicleKind kind, double x) {
    VehicleState s;
    s.id = next_id_++;
    s.kind = kind;
    s.x = x;
    s.v = v0;
    if (kind == VehicleKind::Av) {
      s.engaged = true;
      const ControllerSet& c = options_.controllers;
      switch (c.variant) {
        case ControllerVariant::Accel:
        case ControllerVariant::AccelNoLc:
          s.accel = std::make_unique<accel::AccelController>(c.base, c.lc, c.variant == ControllerVariant::Accel);
          break;
        case ControllerVariant::Acc:
          s.acc = std::make_unique<acc::AccController>(c.acc_plant, c.acc_initial, acc::heuristic_policy,
                                                       c.base.sensor_range);
          break;
        case ControllerVariant::Mpc:
          s.mpc = std::make_unique<mpc::MpcController>(c.mpc, c.base);
          break;
        case ControllerVariant::Baseline:
          break;
      }
    }
    vehicles_.push_back(std::move(s));
  };
  add(VehicleKind::Leader, x_lead);
  for (std::size_t i = 0; i < kinds.size(); ++i) add(kinds[i], x_lead - spacing * static_cast<double>(i + 1));

  for (const VehicleState& v : vehicles_) {
    record_index_.push_back(art_.vehicles.size());
    VehicleRecord r;
    r.id = v.id;
    r.kind = v.kind;
    r.energy_class = scenario_.energy_class;
    art_.vehicles.push_back(std::move(r));
  }
  cuts_ = scenario_.cuts;
  std::stable_sort(cuts_.begin(), cuts_.end(), [](const CutEvent& a, const CutEvent& b) { return a.t < b.t; });
  art_.scenario = scenario_;
  art_.options = options_;
}

double Simulator::observe_gap(std::size_t i) const {
  return vehicles_[i - 1].x - vehicles_[i].x - scenario_.vehicle_length;
}

double Simulator::speed_cap(double x) const {
  const BottleneckSpec& b = scenario_.bottleneck;
  if (!b.enabled || x < b.x_begin || x >= b.x_end) return std::numeric_limits<double>::infinity();
  return bottleneck_speed_limit(bottleneck_density_, b);
}

void Simulator::apply_cut_event(const CutEvent& ev) {
  // Targets refer to ids of the initial layout.
  std::size_t slot = 0;
  for (std::size_t i = 1; i < vehicles_.size(); ++i) {
    if (vehicles_[i].id == ev.target) slot = i;
  }
  if (slot == 0) throw std::invalid_argument(fmt::format("cut event: vehicle {} not in the lane", ev.target));
  const double t = time();
  if (ev.type == CutEvent::Type::In) {
    const double s0 = options_.controllers.base.s0;
    if (ev.gap <= s0) {
      throw std::invalid_argument(fmt::format("cut-in gap {} m is not above the safety distance {} m", ev.gap, s0));
    }
    const VehicleState& target = vehicles_[slot];
    const double x = target.x + ev.gap + scenario_.vehicle_length;
    const double room = vehicles_[slot - 1].x - x - scenario_.vehicle_length;
    if (room <= 0.0) throw std::invalid_argument("cut-in: no room between the target and its leader");
    VehicleState s;
    s.id = next_id_++;
    s.kind = VehicleKind::Human;
    s.x = x;
    s.v = ev.speed;
    vehicles_.insert(vehicles_.begin() + static_cast<std::ptrdiff_t>(slot), std::move(s));
    VehicleRecord r;
    r.id = vehicles_[slot].id;
    r.kind = VehicleKind::Human;
    r.energy_class = scenario_.energy_class;
    record_index_.insert(record_index_.begin() + static_cast<std::ptrdiff_t>(slot), art_.vehicles.size());
    art_.vehicles.push_back(std::move(r));
    art_.events.push_back({t, "cut_in", ev.target, ev.gap, ev.speed, fmt::format("inserted vehicle {}", vehicles_[slot].id)});
  } else {
    if (slot == 1) throw std::invalid_argument("cut-out: the replayed leader cannot leave the lane");
    const int removed = vehicles_[slot - 1].id;
    vehicles_.erase(vehicles_.begin() + static_cast<std::ptrdiff_t>(slot - 1));
    record_index_.erase(record_index_.begin() + static_cast<std::ptrdiff_t>(slot - 1));
    art_.events.push_back({t, "cut_out", ev.target, observe_gap(slot - 1), 0.0, fmt::format("removed vehicle {}", removed)});
  }
}

void Simulator::record() {
  const double t = time();
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    VehicleRecord& r = art_.vehicles[record_index_[i]];
    r.t.push_back(t);
    r.x.push_back(vehicles_[i].x);
    r.v.push_back(vehicles_[i].v);
    r.a.push_back(vehicles_[i].a);
    r.engaged.push_back(vehicles_[i].engaged ? 1 : 0);
  }
}

void Simulator::finish() {
  for (VehicleState& v : vehicles_) v.a = 0.0;
  record();
}

void Simulator::step(const planner::SpeedPlan* plan) {
  const double dt = scenario_.dt;
  const double t = time();
  while (next_cut_ < cuts_.size() && cuts_[next_cut_].t <= t + 1e-9) apply_cut_event(cuts_[next_cut_++]);

  const BottleneckSpec& b = scenario_.bottleneck;
  if (b.enabled) {
    int n = 0;
    for (const VehicleState& v : vehicles_) n += (v.x >= b.x_begin && v.x < b.x_end) ? 1 : 0;
    bottleneck_density_ = n / (b.x_end - b.x_begin);
  }

  const std::size_t n = vehicles_.size();
  std::vector<double> accel(n, 0.0);
  {
    VehicleState& lead = vehicles_[0];
    double v_next = leader_.trajectory.speed_at(t + dt);
    const double replay_now = leader_.trajectory.speed_at(t);
    if (lead.v < replay_now - 1e-9) v_next = std::min(v_next, lead.v + kLeaderRecoveryAccel * dt);
    v_next = std::min(v_next, speed_cap(lead.x));
    accel[0] = (v_next - lead.v) / dt;
  }

  const ControllerSet& c = options_.controllers;
  std::function<double(double)> target_fn;
  if (plan) target_fn = [plan](double x) { return plan->query(x, 0); };

  for (std::size_t i = 1; i < n; ++i) {
    VehicleState& me = vehicles_[i];
    const VehicleState& ahead = vehicles_[i - 1];
    const double gap = observe_gap(i);
    double a = 0.0;
    if (me.kind != VehicleKind::Av || c.variant == ControllerVariant::Baseline) {
      a = cfm::idm_accel(gap, me.v, me.v - ahead.v, c.idm);
    } else {
      ControlTraceRow row;
      row.t = t;
      row.vehicle = me.id;
      row.v = me.v;
      row.gap = gap;
      row.plan_t = plan ? plan->t : -1.0;
      row.a_safe = row.a_target = row.a_mpc = row.alpha = kNaN;
      std::optional<double> target;
      if (plan) target = plan->query(me.x, 0);
      if (me.accel) {
        accel::LocalObservation obs;
        obs.v = me.v;
        obs.minicar = gap <= c.base.sensor_range;
        if (obs.minicar) {
          obs.h = gap;
          obs.v_lead = ahead.v;
          obs.a_lead = ahead.a;
        }
        const accel::AccelTrace tr = me.accel->step(obs, target, dt);
        a = tr.u;
        row.v_target = tr.v_target;
        row.a_raw = tr.parts.a_cmd;
        row.a_safe = tr.parts.a_safe;
        row.a_target = tr.parts.a_target;
        row.a_mpc = tr.parts.a_mpc;
        row.lc_active = tr.lc_active ? 1 : 0;
        row.alpha = tr.alpha;
      } else if (me.acc) {
        const acc::AccTraceRow tr = me.acc->step(t, me.v, ahead.v, gap, target);
        a = tr.accel;
        row.v_target = target.value_or(kNaN);
        row.a_raw = tr.accel;
        row.speed_setting = tr.active.speed_setting;
        row.gap_setting = tr.active.gap_setting;
      } else if (me.mpc) {
        const mpc::MpcTrace tr = me.mpc->step(me.x, me.v, gap, ahead.v, ahead.a, target_fn, dt);
        a = tr.u;
        row.v_target = target.value_or(kNaN);
        row.a_raw = tr.u;
        row.fallback = tr.fallback ? 1 : 0;
      }
      row.a_cmd = a;
      if (options_.traces) art_.traces.push_back(row);
    }
    const double cap = speed_cap(me.x);
    if (std::isfinite(cap)) a = std::min(a, (cap - me.v) / dt);
    accel[i] = a;
  }

  for (std::size_t i = 0; i < n; ++i) vehicles_[i].a = accel[i];
  record();

  for (std::size_t i = 0; i < n; ++i) {
    VehicleState& s = vehicles_[i];
    const double a = accel[i];
    const double v_next = s.v + a * dt;
    if (v_next < 0.0) {
      // Stops within the tick: no reversing.
      s.x += s.v * s.v / (-2.0 * a);
      s.a = -s.v / dt;
      s.v = 0.0;
    } else {
      s.x += s.v * dt + 0.5 * a * dt * dt;
      s.v = v_next;
    }
  }
  ++tick_;
  for (std::size_t i = 1; i < n; ++i) {
    const double gap = observe_gap(i);
    if (gap <= 0.0) {
      throw cfm::CollisionError(fmt::format("collision at t={:.1f} s: vehicle {} ran into vehicle {} (gap {:.3f} m)",
                                            time(), vehicles_[i].id, vehicles_[i - 1].id, gap));
    }
  }
}

RunArtifact closed_loop_run(const Scenario& scenario, const RunOptions& options_in) {
  RunOptions options = options_in;
  Simulator sim(scenario, options);
  const double dt = scenario.dt;
  const std::int64_t total = steps_for(scenario.duration, dt);

  // The planner corridor spans the platoon's reachable extent.
  planner::PlannerConfig pc = options.planner_cfg;
  const double lead0 = sim.artifact().leader_start_x;
  pc.corridor_begin = -1000.0;
  pc.corridor_end = lead0 + sim.leader().trajectory.distance_to(scenario.duration) + 2000.0;
  pc.free_speed = scenario.free_speed;
  pc.validate();
  planner::DataStore store(pc.latency, pc.out_of_order_tolerance);
  planner::SpeedPlanner planner(pc);
  options.planner_cfg = pc;
  sim.artifact().options.planner_cfg = pc;

  const std::int64_t ping_every = steps_for(1.0, dt);
  const std::int64_t estimate_every = steps_for(60.0, dt);
  const std::int64_t plan_every = steps_for(pc.period, dt);
  const bool field = scenario.leader.kind == LeaderSource::Kind::StopAndGo;
  RunArtifact& art = sim.artifact();

  std::vector<double> coarse_edges;
  for (double x = pc.corridor_begin; x < pc.corridor_end; x += pc.coarse_length) coarse_edges.push_back(x);
  coarse_edges.push_back(pc.corridor_end);

  for (std::int64_t k = 0; k < total; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (options.planner) {
      if (k % ping_every == 0) {
        for (const VehicleState& v : sim.vehicles()) {
          if (v.kind != VehicleKind::Av) continue;
          planner::VehiclePing p{v.id, t, v.x, v.v, 0};
          if (store.ingest_ping(p) == planner::IngestResult::Accepted) art.pings.push_back(p);
        }
      }
      if (k % estimate_every == 0) {
        for (std::size_t j = 0; j + 1 < coarse_edges.size(); ++j) {
          const double a = coarse_edges[j], b = coarse_edges[j + 1];
          double speed = scenario.free_speed;
          if (field) {
            speed = sim.leader().field.segment_mean(a - lead0, b - lead0, t);
          } else {
            double sum = 0.0;
            int cnt = 0;
            for (const VehicleState& v : sim.vehicles()) {
              if (v.x >= a && v.x < b) {
                sum += v.v;
                ++cnt;
              }
            }
            if (cnt > 0) speed = sum / cnt;
          }
          planner::SegmentEstimate e;
          e.segment = static_cast<int>(j);
          e.x_center = 0.5 * (a + b);
          e.speed = speed;
          e.measured_t = t;
          if (store.ingest_segment_estimate(e) == planner::IngestResult::Accepted) {
            e.arrival_t = t + pc.latency;
            art.estimates.push_back(e);
          }
        }
        art.events.push_back({t, "estimate", -1, static_cast<double>(coarse_edges.size() - 1), t + pc.latency,
                              "coarse snapshot measured"});
      }
      if (k % plan_every == 0) {
        const planner::PlanDiagnostics d = planner.publish(store, t);
        art.plan_diagnostics.push_back(d);
        int slow = 0;
        for (const auto& r : d.bottlenecks) slow += r ? 1 : 0;
        art.events.push_back({t, "plan", -1, d.max_input_arrival, d.max_ping_t,
                              fmt::format("pings={} snapshots={} bottlenecks={}", d.pings_used, d.snapshots_used, slow)});
      }
    }
    const planner::SpeedPlan* plan = options.planner ? store.latest_plan(t) : nullptr;
    try {
      sim.step(plan);
    } catch (const cfm::CollisionError& e) {
      art.collision = true;
      art.failure = e.what();
      art.events.push_back({sim.time(), "collision", -1, 0.0, 0.0, e.what()});
      break;
    }
  }
  if (!art.collision) {
    sim.finish();
  }
  art.steps = static_cast<std::size_t>(sim.tick());
  art.plans = store.plans();
  art.leader_end_x = sim.vehicles().front().x;
  return std::move(art);
}

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "";
  return fmt::format("{}", v);
}

}  // namespace

void write_artifact(const std::filesystem::path& dir, const RunArtifact& art) {
  std::filesystem::create_directories(dir);
  {
    auto out = csv::open_out(dir / "trajectories.csv");
    out << "# t [s], x [m], v [m/s], a [m/s^2] applied until the next row\n";
    out << "vehicle_id,t,x,v,a\n";
    for (const VehicleRecord& r : art.vehicles) {
      for (std::size_t k = 0; k < r.t.size(); ++k) {
        out << fmt::format("{},{},{},{},{}\n", r.id, r.t[k], r.x[k], r.v[k], r.a[k]);
      }
    }
  }
  {
    auto out = csv::open_out(dir / "vehicles.csv");
    out << "vehicle_id,kind,energy_class\n";
    for (const VehicleRecord& r : art.vehicles) {
      out << fmt::format("{},{},{}\n", r.id, vehicle_kind_name(r.kind), r.energy_class);
    }
  }
  {
    auto out = csv::open_out(dir / "events.csv");
    out << "t,type,vehicle,value,value2,detail\n";
    for (const EventRow& e : art.events) {
      std::string detail = e.detail;
      std::replace(detail.begin(), detail.end(), ',', ';');
      out << fmt::format("{},{},{},{},{},{}\n", e.t, e.type, e.vehicle, num(e.value), num(e.value2), detail);
    }
  }
  {
    auto out = csv::open_out(dir / "trace.csv");
    out << "t,vehicle_id,v,gap,v_target,plan_t,a_cmd,a_raw,a_safe,a_target,a_mpc,lc_active,alpha,"
           "speed_setting,gap_setting,fallback,engaged\n";
    for (const ControlTraceRow& r : art.traces) {
      out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},1\n", r.t, r.vehicle, r.v, num(r.gap),
                         num(r.v_target), r.plan_t, r.a_cmd, num(r.a_raw), num(r.a_safe), num(r.a_target),
                         num(r.a_mpc), r.lc_active, num(r.alpha), r.speed_setting, r.gap_setting, r.fallback);
    }
  }
  planner::write_plans_csv(dir / "plans.csv", art.plans);
  planner::write_pings_csv(dir / "pings.csv", art.pings);
  planner::write_estimates_csv(dir / "estimates.csv", art.estimates);
}

RunArtifact read_artifact(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "trajectories.csv")) {
    throw std::runtime_error("no run artifact in " + dir.string());
  }
  RunArtifact art;
  std::map<int, std::size_t> slot;
  if (std::filesystem::exists(dir / "vehicles.csv")) {
    const csv::Table vt = csv::read(dir / "vehicles.csv");
    const auto ci = vt.column("vehicle_id"), ck = vt.column("kind"), ce = vt.column("energy_class");
    for (const auto& row : vt.rows) {
      VehicleRecord r;
      r.id = csv::to_int(row[ci]);
      r.kind = row[ck] == "av" ? VehicleKind::Av : row[ck] == "leader" ? VehicleKind::Leader : VehicleKind::Human;
      r.energy_class = row[ce];
      slot[r.id] = art.vehicles.size();
      art.vehicles.push_back(std::move(r));
    }
  }
  const csv::Table tt = csv::read(dir / "trajectories.csv");
  const auto ci = tt.column("vehicle_id"), ct = tt.column("t"), cx = tt.column("x"), cv = tt.column("v"),
             ca = tt.column("a");
  for (const auto& row : tt.rows) {
    const int id = csv::to_int(row[ci]);
    auto it = slot.find(id);
    if (it == slot.end()) {
      VehicleRecord r;
      r.id = id;
      r.energy_class = "midsize_sedan";
      it = slot.emplace(id, art.vehicles.size()).first;
      art.vehicles.push_back(std::move(r));
    }
    VehicleRecord& r = art.vehicles[it->second];
    r.t.push_back(csv::to_double(row[ct]));
    r.x.push_back(csv::to_double(row[cx]));
    r.v.push_back(csv::to_double(row[cv]));
    r.a.push_back(csv::to_double(row[ca]));
    r.engaged.push_back(0);
  }
  if (std::filesystem::exists(dir / "trace.csv")) {
    const csv::Table tr = csv::read(dir / "trace.csv");
    const auto cvid = tr.column("vehicle_id"), ctt = tr.column("t"), ce = tr.column("engaged");
    for (const auto& row : tr.rows) {
      auto it = slot.find(csv::to_int(row[cvid]));
      if (it == slot.end()) continue;
      VehicleRecord& r = art.vehicles[it->second];
      const double t = csv::to_double(row[ctt]);
      const auto pos = std::lower_bound(r.t.begin(), r.t.end(), t - 1e-9);
      if (pos != r.t.end() && std::abs(*pos - t) < 1e-9) {
        r.engaged[static_cast<std::size_t>(pos - r.t.begin())] = row[ce] == "1" ? 1 : 0;
      }
    }
  }
  return art;
}

}  // namespace wavectl::sim
