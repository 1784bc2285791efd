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
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace wavectl::planner {

/// Coarse, lane-averaged, delayed speed record of one road segment.
struct SegmentEstimate {
  int segment = 0;
  double x_center = 0.0;   // [m]
  double speed = 0.0;      // [m/s]
  double measured_t = 0.0;
  double arrival_t = 0.0;  // stamped by the store
};

/// 1 Hz position/speed report of a controlled vehicle.
struct VehiclePing {
  int vehicle_id = 0;
  double t = 0.0;
  double x = 0.0;
  double speed = 0.0;
  int lane = 0;
};

/// Piecewise-linear speed profile through (x[i], v[i]) with constant
/// extrapolation beyond the ends. x must be strictly increasing.
struct SpeedField {
  std::vector<double> x;
  std::vector<double> v;

  double at(double pos) const;
  bool empty() const { return x.empty(); }
};

struct LanePlan {
  int lane = 0;
  std::vector<double> x;       // fine segment centers
  std::vector<double> target;  // [m/s]
};

struct SpeedPlan {
  double t = 0.0;
  std::vector<LanePlan> lanes;

  /// Target speed at `x` in `lane`; unknown lanes use the lane average.
  double query(double x, int lane) const;
};

enum class KernelKind { Uniform, Triangular, Quartic, Gaussian };
KernelKind parse_kernel(const std::string& name);
std::string kernel_name(KernelKind k);

struct PlannerConfig {
  double corridor_begin = 0.0;
  double corridor_end = 20000.0;
  double coarse_length = 804.672;  // ~0.5 mi
  double fine_length = 200.0;
  int lanes = 1;
  double window = 1000.0;          // kernel width w [m]
  KernelKind kernel = KernelKind::Uniform;
  double period = 60.0;            // publication cadence [s]
  double latency = 180.0;          // coarse feed arrival delay [s]
  double ping_window = 60.0;       // [s]
  double wave_speed = -5.0;        // congested characteristic speed [m/s]
  double free_speed = 30.0;        // [m/s]
  double free_fraction = 0.6;      // >= this fraction of free speed counts as free flow
  double bottleneck_fraction = 0.6;
  int bottleneck_persistence = 3;  // consecutive publications
  double buffer_length = 1000.0;   // [m]
  bool buffer = true;
  double road_max = 35.0;          // plan targets are clamped to [0, road_max]
  double out_of_order_tolerance = 5.0;

  void validate() const;
  std::vector<double> fine_edges() const;
  std::vector<double> fine_centers() const;
};

enum class IngestResult { Accepted, Duplicate, OutOfOrder };

/// Coarse feed snapshot: every segment measured at one instant.
struct TseSnapshot {
  double measured_t = 0.0;
  double arrival_t = 0.0;
  SpeedField field;  // through segment centers
};

/// In-process store standing in for the ping/estimate/plan tables.
/// Single writer; readers take copies.
class DataStore {
 public:
  explicit DataStore(double latency = 180.0, double tolerance = 5.0);

  IngestResult ingest_ping(const VehiclePing& ping);
  IngestResult ingest_segment_estimate(SegmentEstimate est);

  std::vector<VehiclePing> pings_in_window(double t_begin, double t_end) const;
  /// Snapshots whose arrival time is <= t, oldest first.
  std::vector<TseSnapshot> history_arrived_by(double t) const;

  void publish_plan(SpeedPlan plan);
  /// Latest plan with publication time <= t.
  const SpeedPlan* latest_plan(double t) const;
  const std::vector<SpeedPlan>& plans() const { return plans_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  std::size_t ping_count() const { return pings_.size(); }
  std::size_t estimate_count() const { return estimates_.size(); }

 private:
  double latency_;
  double tolerance_;
  std::vector<VehiclePing> pings_;
  std::set<std::pair<int, double>> ping_keys_;
  std::map<int, double> last_ping_t_;
  std::vector<SegmentEstimate> estimates_;
  std::map<int, double> last_estimate_t_;
  std::vector<SpeedPlan> plans_;
  std::vector<std::string> warnings_;
};

/// Latency-compensated speed at each of `positions` for time `now`.
/// Congested structure (slow samples and their immediate neighbours) is
/// advected at the characteristic wave speed over the data age; free flow
/// away from it is carried forward unchanged.
std::vector<double> predict_tse(const std::vector<TseSnapshot>& history, double now,
                                const std::vector<double>& positions, const PlannerConfig& cfg);

/// The unshifted last snapshot, the reference predict_tse must beat.
std::vector<double> persistence_tse(const std::vector<TseSnapshot>& history,
                                    const std::vector<double>& positions);

/// Lane-level TSE on fine segments: the mean ping speed in a segment if that
/// lane reported there within the window, otherwise the prediction.
std::vector<SpeedField> fuse(const std::vector<double>& prediction, const std::vector<VehiclePing>& pings,
                             const std::vector<double>& fine_edges, int lanes);

double kernel_weight(KernelKind kind, double u);

/// Kernel-weighted mean of `field` over the forward window [x_alpha, x_alpha + w].
double kernel_smooth(const SpeedField& field, double x_alpha, double w, KernelKind kind);

struct BottleneckRegion {
  std::size_t first = 0;  // fine segment index, inclusive
  std::size_t last = 0;   // inclusive
  double x_begin = 0.0;   // upstream edge [m]
  double x_end = 0.0;
  double speed = 0.0;     // mean smoothed speed inside
};

/// Tracks how many consecutive publications each fine segment was slow.
class BottleneckTracker {
 public:
  BottleneckTracker(double threshold, int persistence);
  std::optional<BottleneckRegion> update(const SpeedField& smoothed, const std::vector<double>& fine_edges);

 private:
  double threshold_;
  int persistence_;
  std::vector<int> counts_;
};

/// Plan for one lane: the smoothed TSE, with a linear deceleration ramp over
/// `buffer_length` upstream of the bottleneck when one is present.
std::vector<double> design_buffer(const SpeedField& smoothed, const std::optional<BottleneckRegion>& region,
                                  double buffer_length);

struct PlanDiagnostics {
  double t = 0.0;
  double max_input_arrival = -1.0;  // latest arrival time among consumed feed data
  double max_ping_t = -1.0;
  std::size_t pings_used = 0;
  std::size_t snapshots_used = 0;
  bool predicted = false;
  std::vector<std::optional<BottleneckRegion>> bottlenecks;  // per lane
};

/// The publication pipeline: predict, fuse, smooth, identify bottlenecks,
/// design buffers, publish.
class SpeedPlanner {
 public:
  explicit SpeedPlanner(PlannerConfig cfg);

  /// Runs one publication at `now` from data visible in `store` and appends
  /// the plan to the store.
  PlanDiagnostics publish(DataStore& store, double now);

  const PlannerConfig& config() const { return cfg_; }

 private:
  PlannerConfig cfg_;
  std::vector<double> edges_;
  std::vector<double> centers_;
  std::vector<BottleneckTracker> trackers_;
};

// CSV interfaces.
std::vector<VehiclePing> read_pings_csv(const std::filesystem::path& path);
void write_pings_csv(const std::filesystem::path& path, const std::vector<VehiclePing>& pings);
std::vector<SegmentEstimate> read_estimates_csv(const std::filesystem::path& path);
void write_estimates_csv(const std::filesystem::path& path, const std::vector<SegmentEstimate>& est);
void write_plans_csv(const std::filesystem::path& path, const std::vector<SpeedPlan>& plans);
std::vector<SpeedPlan> read_plans_csv(const std::filesystem::path& path);

}  // namespace wavectl::planner
