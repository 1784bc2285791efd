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

#include "wavectl/planner.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/os.h>

#include "wavectl/csv.hpp"

namespace wavectl::planner {

double SpeedField::at(double pos) const {
  if (x.empty()) throw std::logic_error("SpeedField::at on empty field");
  if (pos <= x.front()) return v.front();
  if (pos >= x.back()) return v.back();
  const auto it = std::upper_bound(x.begin(), x.end(), pos);
  const std::size_t i = static_cast<std::size_t>(it - x.begin());
  const double w = (pos - x[i - 1]) / (x[i] - x[i - 1]);
  return v[i - 1] + w * (v[i] - v[i - 1]);
}

double SpeedPlan::query(double pos, int lane) const {
  if (lanes.empty()) throw std::logic_error("SpeedPlan::query on empty plan");
  auto lane_value = [&](const LanePlan& lp) { return SpeedField{lp.x, lp.target}.at(pos); };
  for (const auto& lp : lanes) {
    if (lp.lane == lane) return lane_value(lp);
  }
  double sum = 0.0;
  for (const auto& lp : lanes) sum += lane_value(lp);
  return sum / static_cast<double>(lanes.size());
}

KernelKind parse_kernel(const std::string& name) {
  if (name == "uniform") return KernelKind::Uniform;
  if (name == "triangular") return KernelKind::Triangular;
  if (name == "quartic") return KernelKind::Quartic;
  if (name == "gaussian") return KernelKind::Gaussian;
  throw std::invalid_argument("unknown kernel: " + name);
}

std::string kernel_name(KernelKind k) {
  switch (k) {
    case KernelKind::Uniform: return "uniform";
    case KernelKind::Triangular: return "triangular";
    case KernelKind::Quartic: return "quartic";
    case KernelKind::Gaussian: return "gaussian";
  }
  return "uniform";
}

void PlannerConfig::validate() const {
  if (!(window > 0)) throw std::invalid_argument("planner: window must be > 0");
  if (!(period > 0)) throw std::invalid_argument("planner: period must be > 0");
  if (!(corridor_end > corridor_begin)) throw std::invalid_argument("planner: empty corridor");
  if (!(fine_length > 0 && coarse_length > 0)) throw std::invalid_argument("planner: segment lengths must be > 0");
  if (lanes < 1) throw std::invalid_argument("planner: need at least one lane");
  if (latency < 0 || ping_window <= 0 || buffer_length <= 0 || bottleneck_persistence < 1) {
    throw std::invalid_argument("planner: invalid timing or buffer parameters");
  }
}

std::vector<double> PlannerConfig::fine_edges() const {
  std::vector<double> edges;
  const auto n = static_cast<std::size_t>(std::ceil((corridor_end - corridor_begin) / fine_length - 1e-9));
  for (std::size_t i = 0; i < n; ++i) edges.push_back(corridor_begin + fine_length * static_cast<double>(i));
  edges.push_back(corridor_end);
  return edges;
}

std::vector<double> PlannerConfig::fine_centers() const {
  const auto edges = fine_edges();
  std::vector<double> c;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) c.push_back(0.5 * (edges[i] + edges[i + 1]));
  return c;
}

DataStore::DataStore(double latency, double tolerance) : latency_(latency), tolerance_(tolerance) {}

IngestResult DataStore::ingest_ping(const VehiclePing& ping) {
  if (ping_keys_.count({ping.vehicle_id, ping.t})) return IngestResult::Duplicate;
  auto last = last_ping_t_.find(ping.vehicle_id);
  if (last != last_ping_t_.end() && ping.t < last->second - tolerance_) {
    warnings_.push_back(fmt::format("ping from vehicle {} at t={} is older than {} s; rejected",
                                    ping.vehicle_id, ping.t, tolerance_));
    return IngestResult::OutOfOrder;
  }
  ping_keys_.insert({ping.vehicle_id, ping.t});
  last_ping_t_[ping.vehicle_id] = last == last_ping_t_.end() ? ping.t : std::max(last->second, ping.t);
  pings_.push_back(ping);
  return IngestResult::Accepted;
}

IngestResult DataStore::ingest_segment_estimate(SegmentEstimate est) {
  auto last = last_estimate_t_.find(est.segment);
  if (last != last_estimate_t_.end()) {
    if (est.measured_t == last->second) return IngestResult::Duplicate;
    if (est.measured_t < last->second - tolerance_) {
      warnings_.push_back(fmt::format("estimate for segment {} at t={} out of order; rejected",
                                      est.segment, est.measured_t));
      return IngestResult::OutOfOrder;
    }
  }
  est.arrival_t = est.measured_t + latency_;
  last_estimate_t_[est.segment] =
      last == last_estimate_t_.end() ? est.measured_t : std::max(last->second, est.measured_t);
  estimates_.push_back(est);
  return IngestResult::Accepted;
}

std::vector<VehiclePing> DataStore::pings_in_window(double t_begin, double t_end) const {
  std::vector<VehiclePing> out;
  for (const auto& p : pings_) {
    if (p.t >= t_begin && p.t <= t_end) out.push_back(p);
  }
  return out;
}

std::vector<TseSnapshot> DataStore::history_arrived_by(double t) const {
  std::map<double, std::vector<const SegmentEstimate*>> by_time;
  for (const auto& e : estimates_) {
    if (e.arrival_t <= t) by_time[e.measured_t].push_back(&e);
  }
  std::vector<TseSnapshot> out;
  for (auto& [mt, list] : by_time) {
    std::sort(list.begin(), list.end(),
              [](const SegmentEstimate* a, const SegmentEstimate* b) { return a->x_center < b->x_center; });
    TseSnapshot snap;
    snap.measured_t = mt;
    for (const auto* e : list) {
      snap.arrival_t = std::max(snap.arrival_t, e->arrival_t);
      snap.field.x.push_back(e->x_center);
      snap.field.v.push_back(e->speed);
    }
    out.push_back(std::move(snap));
  }
  return out;
}

void DataStore::publish_plan(SpeedPlan plan) { plans_.push_back(std::move(plan)); }

const SpeedPlan* DataStore::latest_plan(double t) const {
  const SpeedPlan* best = nullptr;
  for (const auto& p : plans_) {
    if (p.t <= t && (!best || p.t >= best->t)) best = &p;
  }
  return best;
}

std::vector<double> persistence_tse(const std::vector<TseSnapshot>& history,
                                    const std::vector<double>& positions) {
  if (history.empty()) throw std::invalid_argument("persistence_tse: empty history");
  std::vector<double> out;
  out.reserve(positions.size());
  for (double x : positions) out.push_back(history.back().field.at(x));
  return out;
}

std::vector<double> predict_tse(const std::vector<TseSnapshot>& history, double now,
                                const std::vector<double>& positions, const PlannerConfig& cfg) {
  if (history.empty()) throw std::invalid_argument("predict_tse: empty history");
  const auto& latest = history.back();
  const double age = std::max(0.0, now - latest.measured_t);
  const double shift = cfg.wave_speed * age;
  const double free_threshold = cfg.free_fraction * cfg.free_speed;
  const auto& f = latest.field;
  // A sample belongs to a congested structure when it or a neighbour is
  // slow; the widening keeps the shoulders of a wave moving with its core.
  const std::size_t n = f.x.size();
  std::vector<char> congested(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    if (f.v[j] >= free_threshold) continue;
    for (std::size_t k = j == 0 ? 0 : j - 1; k <= std::min(n - 1, j + 1); ++k) congested[k] = 1;
  }
  auto near_congestion = [&](double pos) {
    const auto it = std::upper_bound(f.x.begin(), f.x.end(), pos);
    const auto i = static_cast<std::size_t>(it - f.x.begin());
    const bool right = i < n && congested[i];
    const bool left = i > 0 && congested[i - 1];
    return left || right;
  };
  std::vector<double> out;
  out.reserve(positions.size());
  for (double x : positions) {
    const bool advect = near_congestion(x) || near_congestion(x - shift);
    out.push_back(advect ? f.at(x - shift) : f.at(x));
  }
  return out;
}

std::vector<SpeedField> fuse(const std::vector<double>& prediction, const std::vector<VehiclePing>& pings,
                             const std::vector<double>& fine_edges, int lanes) {
  const std::size_t n = fine_edges.size() - 1;
  if (prediction.size() != n) throw std::invalid_argument("fuse: prediction does not match fine segments");
  std::vector<double> centers(n);
  for (std::size_t i = 0; i < n; ++i) centers[i] = 0.5 * (fine_edges[i] + fine_edges[i + 1]);

  std::vector<SpeedField> out;
  for (int lane = 0; lane < lanes; ++lane) {
    std::vector<double> sum(n, 0.0);
    std::vector<int> count(n, 0);
    for (const auto& p : pings) {
      if (p.lane != lane || p.x < fine_edges.front() || p.x >= fine_edges.back()) continue;
      const auto it = std::upper_bound(fine_edges.begin(), fine_edges.end(), p.x);
      const auto i = static_cast<std::size_t>(it - fine_edges.begin()) - 1;
      sum[i] += p.speed;
      ++count[i];
    }
    SpeedField f{centers, prediction};
    for (std::size_t i = 0; i < n; ++i) {
      if (count[i] > 0) f.v[i] = sum[i] / count[i];
    }
    out.push_back(std::move(f));
  }
  return out;
}

double kernel_weight(KernelKind kind, double u) {
  switch (kind) {
    case KernelKind::Uniform: return 1.0;
    case KernelKind::Triangular: return 1.0 - u;
    case KernelKind::Quartic: return (1.0 - u * u) * (1.0 - u * u);
    case KernelKind::Gaussian: return std::exp(-2.0 * u * u);  // sigma = w / 2
  }
  return 1.0;
}

double kernel_smooth(const SpeedField& field, double x_alpha, double w, KernelKind kind) {
  if (!(w > 0.0)) throw std::invalid_argument("kernel_smooth: window must be > 0");
  // 4-point Gauss-Legendre per linear piece: exact for the polynomial kernels.
  static constexpr std::array<double, 4> kNodes = {-0.8611363115940526, -0.3399810435848563,
                                                   0.3399810435848563, 0.8611363115940526};
  static constexpr std::array<double, 4> kWeights = {0.3478548451374538, 0.6521451548625461,
                                                     0.6521451548625461, 0.3478548451374538};
  std::vector<double> cuts{x_alpha};
  for (double xb : field.x) {
    if (xb > x_alpha && xb < x_alpha + w) cuts.push_back(xb);
  }
  cuts.push_back(x_alpha + w);

  double num = 0.0;
  double den = 0.0;
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const double a = cuts[s];
    const double b = cuts[s + 1];
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    const double va = field.at(a);
    const double vb = field.at(b);
    for (std::size_t q = 0; q < kNodes.size(); ++q) {
      const double x = mid + half * kNodes[q];
      const double k = kernel_weight(kind, (x - x_alpha) / w) * kWeights[q] * half;
      // Linear inside the piece; avoids re-searching the breakpoints.
      const double v = va + (vb - va) * (x - a) / (b - a);
      num += k * v;
      den += k;
    }
  }
  return num / den;
}

BottleneckTracker::BottleneckTracker(double threshold, int persistence)
    : threshold_(threshold), persistence_(persistence) {}

std::optional<BottleneckRegion> BottleneckTracker::update(const SpeedField& smoothed,
                                                          const std::vector<double>& fine_edges) {
  const std::size_t n = smoothed.v.size();
  if (counts_.size() != n) counts_.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) counts_[i] = smoothed.v[i] < threshold_ ? counts_[i] + 1 : 0;

  std::optional<BottleneckRegion> best;
  std::size_t i = 0;
  while (i < n) {
    if (counts_[i] < persistence_) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < n && counts_[j + 1] >= persistence_) ++j;
    BottleneckRegion r;
    r.first = i;
    r.last = j;
    r.x_begin = fine_edges[i];
    r.x_end = fine_edges[j + 1];
    double sum = 0.0;
    for (std::size_t k = i; k <= j; ++k) sum += smoothed.v[k];
    r.speed = sum / static_cast<double>(j - i + 1);
    best = r;  // later runs are further downstream
    i = j + 1;
  }
  return best;
}

std::vector<double> design_buffer(const SpeedField& smoothed, const std::optional<BottleneckRegion>& region,
                                  double buffer_length) {
  std::vector<double> plan = smoothed.v;
  if (!region) return plan;
  const double start = region->x_begin - buffer_length;
  const double v_up = smoothed.at(start);
  const double v_bn = region->speed;
  const double lo = std::min(v_up, v_bn);
  const double hi = std::max(v_up, v_bn);
  for (std::size_t i = 0; i < smoothed.x.size(); ++i) {
    const double x = smoothed.x[i];
    if (x < start || x >= region->x_begin) continue;
    const double frac = (x - start) / buffer_length;
    plan[i] = std::clamp(v_up + (v_bn - v_up) * frac, lo, hi);
  }
  return plan;
}

SpeedPlanner::SpeedPlanner(PlannerConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  edges_ = cfg_.fine_edges();
  centers_ = cfg_.fine_centers();
  for (int l = 0; l < cfg_.lanes; ++l) {
    trackers_.emplace_back(cfg_.bottleneck_fraction * cfg_.free_speed, cfg_.bottleneck_persistence);
  }
}

PlanDiagnostics SpeedPlanner::publish(DataStore& store, double now) {
  PlanDiagnostics diag;
  diag.t = now;

  // Steps 1-2: latency-compensated coarse field, fused with recent pings.
  const auto history = store.history_arrived_by(now);
  std::vector<double> prediction;
  if (history.empty()) {
    prediction.assign(centers_.size(), cfg_.free_speed);
  } else {
    prediction = predict_tse(history, now, centers_, cfg_);
    diag.predicted = true;
    diag.snapshots_used = history.size();
    for (const auto& s : history) diag.max_input_arrival = std::max(diag.max_input_arrival, s.arrival_t);
  }
  const auto pings = store.pings_in_window(now - cfg_.ping_window, now);
  diag.pings_used = pings.size();
  for (const auto& p : pings) diag.max_ping_t = std::max(diag.max_ping_t, p.t);
  const auto lane_tse = fuse(prediction, pings, edges_, cfg_.lanes);

  SpeedPlan plan;
  plan.t = now;
  for (int lane = 0; lane < cfg_.lanes; ++lane) {
    // Step 3: forward kernel average.
    SpeedField smoothed{centers_, {}};
    smoothed.v.reserve(centers_.size());
    for (double x : centers_) {
      smoothed.v.push_back(kernel_smooth(lane_tse[static_cast<std::size_t>(lane)], x, cfg_.window, cfg_.kernel));
    }
    // Steps 4-5: bottleneck and buffer.
    std::optional<BottleneckRegion> region;
    if (cfg_.buffer) region = trackers_[static_cast<std::size_t>(lane)].update(smoothed, edges_);
    diag.bottlenecks.push_back(region);
    LanePlan lp;
    lp.lane = lane;
    lp.x = centers_;
    lp.target = design_buffer(smoothed, region, cfg_.buffer_length);
    for (double& v : lp.target) v = std::clamp(v, 0.0, cfg_.road_max);
    plan.lanes.push_back(std::move(lp));
  }
  // Step 6.
  store.publish_plan(std::move(plan));
  return diag;
}

std::vector<VehiclePing> read_pings_csv(const std::filesystem::path& path) {
  const auto t = csv::read(path);
  const auto ci = t.column("vehicle_id"), ct = t.column("timestamp_s"), cx = t.column("position_m"),
             cv = t.column("speed_mps"), cl = t.column("lane");
  std::vector<VehiclePing> out;
  for (const auto& r : t.rows) {
    out.push_back({csv::to_int(r.at(ci)), csv::to_double(r.at(ct)), csv::to_double(r.at(cx)),
                   csv::to_double(r.at(cv)), csv::to_int(r.at(cl))});
  }
  return out;
}

void write_pings_csv(const std::filesystem::path& path, const std::vector<VehiclePing>& pings) {
  auto out = csv::open_out(path);
  out << "vehicle_id,timestamp_s,position_m,speed_mps,lane\n";
  for (const auto& p : pings) out << fmt::format("{},{},{},{},{}\n", p.vehicle_id, p.t, p.x, p.speed, p.lane);
}

std::vector<SegmentEstimate> read_estimates_csv(const std::filesystem::path& path) {
  const auto t = csv::read(path);
  const auto ci = t.column("segment_id"), cx = t.column("x_center_m"), cv = t.column("speed_mps"),
             ct = t.column("measured_t_s");
  std::vector<SegmentEstimate> out;
  for (const auto& r : t.rows) {
    SegmentEstimate e;
    e.segment = csv::to_int(r.at(ci));
    e.x_center = csv::to_double(r.at(cx));
    e.speed = csv::to_double(r.at(cv));
    e.measured_t = csv::to_double(r.at(ct));
    out.push_back(e);
  }
  return out;
}

void write_estimates_csv(const std::filesystem::path& path, const std::vector<SegmentEstimate>& est) {
  auto out = csv::open_out(path);
  out << "segment_id,x_center_m,speed_mps,measured_t_s\n";
  for (const auto& e : est) out << fmt::format("{},{},{},{}\n", e.segment, e.x_center, e.speed, e.measured_t);
}

void write_plans_csv(const std::filesystem::path& path, const std::vector<SpeedPlan>& plans) {
  auto out = csv::open_out(path);
  out << "t_s,lane,x_center_m,target_mps\n";
  for (const auto& p : plans) {
    for (const auto& lp : p.lanes) {
      for (std::size_t i = 0; i < lp.x.size(); ++i) {
        out << fmt::format("{},{},{},{}\n", p.t, lp.lane, lp.x[i], lp.target[i]);
      }
    }
  }
}

std::vector<SpeedPlan> read_plans_csv(const std::filesystem::path& path) {
  const auto t = csv::read(path);
  const auto ct = t.column("t_s"), cl = t.column("lane"), cx = t.column("x_center_m"), cv = t.column("target_mps");
  std::vector<SpeedPlan> plans;
  for (const auto& r : t.rows) {
    const double pt = csv::to_double(r.at(ct));
    const int lane = csv::to_int(r.at(cl));
    if (plans.empty() || plans.back().t != pt) plans.push_back(SpeedPlan{pt, {}});
    auto& lanes = plans.back().lanes;
    if (lanes.empty() || lanes.back().lane != lane) lanes.push_back(LanePlan{lane, {}, {}});
    lanes.back().x.push_back(csv::to_double(r.at(cx)));
    lanes.back().target.push_back(csv::to_double(r.at(cv)));
  }
  return plans;
}

}  // namespace wavectl::planner
