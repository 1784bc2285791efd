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

#include "wavectl/leader.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

#include "wavectl/csv.hpp"

namespace wavectl::sim {

void LeaderTrajectory::validate() const {
  if (t.size() < 2) throw std::invalid_argument("leader trajectory needs at least two samples");
  if (v.size() != t.size()) throw std::invalid_argument("leader trajectory: t and v differ in length");
  if (!grade.empty() && grade.size() != t.size()) {
    throw std::invalid_argument("leader trajectory: grade column length mismatch");
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i]) || !std::isfinite(v[i])) {
      throw std::invalid_argument(fmt::format("leader trajectory: non-finite value at row {}", i));
    }
    if (v[i] < 0.0) {
      throw std::invalid_argument(fmt::format("leader trajectory: negative speed {} at t={}", v[i], t[i]));
    }
    if (i > 0) {
      const double step = t[i] - t[i - 1];
      if (step > 2.0 * kLeaderCadence) {
        throw std::invalid_argument(fmt::format("leader trajectory: {} s gap after t={}", step, t[i - 1]));
      }
      if (std::abs(step - kLeaderCadence) > 1e-6) {
        throw std::invalid_argument(fmt::format("leader trajectory: sample spacing {} at t={} is not 0.1 s", step, t[i - 1]));
      }
    }
  }
}

namespace {

double interpolate(const std::vector<double>& t, const std::vector<double>& y, double time) {
  if (time <= t.front()) return y.front();
  if (time >= t.back()) return y.back();
  // Uniform cadence makes the index a direct computation; guard rounding.
  auto i = static_cast<std::size_t>((time - t.front()) / kLeaderCadence);
  i = std::min(i, t.size() - 2);
  while (i > 0 && t[i] > time) --i;
  while (i + 2 < t.size() && t[i + 1] <= time) ++i;
  const double w = (time - t[i]) / (t[i + 1] - t[i]);
  return y[i] + w * (y[i + 1] - y[i]);
}

}  // namespace

double LeaderTrajectory::speed_at(double time) const { return interpolate(t, v, time); }

double LeaderTrajectory::grade_at(double time) const {
  if (grade.empty()) return 0.0;
  return interpolate(t, grade, time);
}

double LeaderTrajectory::distance_to(double time) const {
  double d = 0.0;
  for (std::size_t i = 1; i < t.size() && t[i - 1] < time; ++i) {
    const double hi = std::min(time, t[i]);
    d += 0.5 * (v[i - 1] + speed_at(hi)) * (hi - t[i - 1]);
  }
  if (time > t.back()) d += v.back() * (time - t.back());
  return d;
}

LeaderTrajectory load_leader_trajectory(const std::filesystem::path& path) {
  const csv::Table tab = csv::read(path);
  const std::size_t ct = tab.column("t");
  const std::size_t cv = tab.column("v");
  std::optional<std::size_t> cg;
  for (std::size_t i = 0; i < tab.header.size(); ++i) {
    if (tab.header[i] == "grade") cg = i;
  }
  LeaderTrajectory traj;
  for (const auto& row : tab.rows) {
    if (row.size() != tab.header.size()) throw std::invalid_argument("leader trajectory: ragged row in " + path.string());
    traj.t.push_back(csv::to_double(row[ct]));
    traj.v.push_back(csv::to_double(row[cv]));
    if (cg) traj.grade.push_back(csv::to_double(row[*cg]));
  }
  traj.validate();
  return traj;
}

void save_leader_trajectory(const std::filesystem::path& path, const LeaderTrajectory& traj) {
  traj.validate();
  auto out = csv::open_out(path);
  out << "# leader speed profile, t [s], v [m/s]" << (traj.grade.empty() ? "" : ", grade [rad]") << "\n";
  out << (traj.grade.empty() ? "t,v\n" : "t,v,grade\n");
  for (std::size_t i = 0; i < traj.t.size(); ++i) {
    if (traj.grade.empty()) {
      out << fmt::format("{},{}\n", traj.t[i], traj.v[i]);
    } else {
      out << fmt::format("{},{},{}\n", traj.t[i], traj.v[i], traj.grade[i]);
    }
  }
}

LeaderTrajectory constant_leader(double speed, double duration) {
  if (speed < 0.0 || !(duration > 0.0)) throw std::invalid_argument("constant leader: bad speed or duration");
  LeaderTrajectory traj;
  const auto n = static_cast<std::size_t>(std::llround(duration / kLeaderCadence)) + 1;
  for (std::size_t i = 0; i < n; ++i) {
    traj.t.push_back(static_cast<double>(i) * kLeaderCadence);
    traj.v.push_back(speed);
  }
  return traj;
}

double WaveField::speed(double x, double t) const {
  double v = v_free;
  for (const Wave& w : waves) {
    const double s = (x - (w.x0 + wave_speed * t)) / w.width;
    if (std::abs(s) < 0.5) v -= w.depth * 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * s));
  }
  return std::max(v, v_floor);
}

double WaveField::segment_mean(double a, double b, double t) const {
  if (!(b > a)) return speed(a, t);
  constexpr int kSamples = 32;
  double sum = 0.0;
  for (int i = 0; i < kSamples; ++i) sum += speed(a + (b - a) * (i + 0.5) / kSamples, t);
  return sum / kSamples;
}

void StopAndGoParams::validate() const {
  if (!(duration > 0.0)) throw std::invalid_argument("stop-and-go: duration must be positive");
  if (!(v_free > 0.0 && v_floor >= 0.0 && v_floor < v_free)) {
    throw std::invalid_argument("stop-and-go: need 0 <= v_floor < v_free");
  }
  if (!(depth_min > 0.0 && depth_min <= depth_max)) throw std::invalid_argument("stop-and-go: bad depth range");
  if (!(width_min > 0.0 && width_min <= width_max)) throw std::invalid_argument("stop-and-go: bad width range");
  if (!(spacing_min > 0.0 && spacing_min <= spacing_max)) throw std::invalid_argument("stop-and-go: bad spacing range");
  if (!(wave_speed < 0.0)) throw std::invalid_argument("stop-and-go: waves travel upstream");
}

SyntheticLeader generate_stop_and_go(std::uint64_t seed, const StopAndGoParams& p) {
  p.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  SyntheticLeader out;
  WaveField& f = out.field;
  f.v_free = p.v_free;
  f.v_floor = p.v_floor;
  f.wave_speed = p.wave_speed;
  // Enough dips to cover everything the leader can reach in the run.
  const double reach = (p.v_free - p.wave_speed) * p.duration + p.width_max;
  double x = p.first_wave;
  while (x < reach) {
    f.waves.push_back({x, draw(p.width_min, p.width_max), draw(p.depth_min, p.depth_max)});
    x += draw(p.spacing_min, p.spacing_max);
  }

  LeaderTrajectory& traj = out.trajectory;
  const auto n = static_cast<std::size_t>(std::llround(p.duration / kLeaderCadence)) + 1;
  traj.t.reserve(n);
  traj.v.reserve(n);
  double pos = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * kLeaderCadence;
    const double v = f.speed(pos, t);
    traj.t.push_back(t);
    traj.v.push_back(v);
    // Midpoint step through the field.
    const double vm = f.speed(pos + 0.5 * kLeaderCadence * v, t + 0.5 * kLeaderCadence);
    pos += kLeaderCadence * vm;
  }
  traj.validate();
  return out;
}

}  // namespace wavectl::sim
