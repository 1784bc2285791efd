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

#include "wavectl/energy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace wavectl::energy {

namespace {

constexpr double kOperatingSpeedMax = 40.0;

EnergyModel scaled(const EnergyModel& base, const std::string& name, double s) {
  EnergyModel m = base;
  m.class_name = name;
  m.beta *= s;
  for (auto& x : m.c) x *= s;
  for (auto& x : m.p) x *= s;
  for (auto& x : m.q) x *= s;
  for (auto& x : m.z) x *= s;
  return m;
}

}  // namespace

void EnergyModel::validate() const {
  if (beta < 0.0) throw std::invalid_argument(class_name + ": beta must be >= 0");
  if (!(c[0] > 0.0)) throw std::invalid_argument(class_name + ": c0 must be > 0");
  // Q and Z are affine/quadratic; checking a fine grid covers the vertex of Z.
  for (int i = 0; i <= 400; ++i) {
    const double v = kOperatingSpeedMax * i / 400.0;
    if (!(Q(v) > 0.0)) throw std::invalid_argument(class_name + ": Q(v) must be > 0 on [0, 40]");
    if (!(Z(v) > 0.0)) throw std::invalid_argument(class_name + ": Z(v) must be > 0 on [0, 40]");
  }
}

double fuel_rate(double v, double a, double theta, const EnergyModel& m) {
  if (v < 0.0) throw std::domain_error("fuel_rate: negative speed");
  const double P = m.P(v);
  const double Q = m.Q(v);
  const double a_plus = std::max(-P / (2.0 * Q), a);
  const double a_lin = m.clamp_linear_term ? a_plus : a;
  return std::max(m.beta, m.C(v) + P * a_lin + Q * a_plus * a_plus + m.Z(v) * theta);
}

FuelRateGradient fuel_rate_gradient(double v, double a, double theta, const EnergyModel& m) {
  const double P = m.P(v);
  const double Q = m.Q(v);
  const double a_star = -P / (2.0 * Q);
  const bool clamped = a < a_star;
  const double a_plus = clamped ? a_star : a;
  const double a_lin = m.clamp_linear_term ? a_plus : a;
  const double raw = m.C(v) + P * a_lin + Q * a_plus * a_plus + m.Z(v) * theta;
  if (raw <= m.beta) return {};

  const double dC = m.c[1] + v * (2.0 * m.c[2] + 3.0 * v * m.c[3]);
  const double dP = m.p[1] + 2.0 * v * m.p[2];
  const double dQ = m.q[1];
  const double dZ = m.z[1] + 2.0 * v * m.z[2];
  FuelRateGradient g;
  if (clamped) {
    // a+ = -P/(2Q) depends on v; the a+ terms are stationary in a+ only when
    // the linear term is clamped too.
    const double da_star_dv = -(dP * Q - P * dQ) / (2.0 * Q * Q);
    g.d_v = dC + dP * a_lin + dQ * a_plus * a_plus + dZ * theta +
            (2.0 * Q * a_plus + (m.clamp_linear_term ? P : 0.0)) * da_star_dv;
    g.d_a = m.clamp_linear_term ? 0.0 : P;
  } else {
    g.d_v = dC + dP * a + dQ * a * a + dZ * theta;
    g.d_a = P + 2.0 * Q * a;
  }
  return g;
}

std::vector<double> finite_difference_accel(std::span<const double> speeds, double dt) {
  const std::size_t n = speeds.size();
  std::vector<double> acc(n, 0.0);
  if (n < 2) return acc;
  acc[0] = (speeds[1] - speeds[0]) / dt;
  acc[n - 1] = (speeds[n - 1] - speeds[n - 2]) / dt;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    acc[i] = (speeds[i + 1] - speeds[i - 1]) / (2.0 * dt);
  }
  return acc;
}

double trajectory_fuel(std::span<const double> speeds, std::span<const double> grades,
                       double dt, const EnergyModel& m) {
  if (!(dt > 0.0)) throw std::invalid_argument("trajectory_fuel: dt must be > 0");
  if (!grades.empty() && grades.size() != speeds.size()) {
    throw std::invalid_argument("trajectory_fuel: speeds and grades differ in length");
  }
  const auto acc = finite_difference_accel(speeds, dt);
  double total = 0.0;
  for (std::size_t i = 0; i < speeds.size(); ++i) {
    const double theta = grades.empty() ? 0.0 : grades[i];
    total += fuel_rate(speeds[i], acc[i], theta, m) * dt;
  }
  return total;
}

double fuel_economy(double total_fuel, double total_distance, double grams_per_gallon) {
  if (!(total_fuel > 0.0)) throw std::domain_error("fuel_economy: fuel must be > 0");
  return (total_distance / kMetersPerMile) / (total_fuel / grams_per_gallon);
}

std::vector<EnergyModel> default_models() {
  // Illustrative coefficients: plausible magnitudes, not fitted to any
  // reference powertrain. Other classes scale the midsize sedan.
  EnergyModel sedan;
  sedan.class_name = "midsize_sedan";
  sedan.beta = 0.0;
  sedan.c = {0.25, 0.015, 0.0, 3.2e-5};
  sedan.p = {0.06, 0.105, 4.0e-4};
  sedan.q = {0.09, 0.004};
  sedan.z = {0.01, 1.1, 0.0};
  return {
      scaled(sedan, "compact_sedan", 0.85),
      sedan,
      scaled(sedan, "midsize_suv", 1.25),
      scaled(sedan, "pickup", 1.45),
      scaled(sedan, "class4_pnd", 2.6),
      scaled(sedan, "class8_tractor", 5.5),
  };
}

const EnergyModel& find_model(const std::vector<EnergyModel>& models, const std::string& name) {
  auto it = std::find_if(models.begin(), models.end(),
                         [&](const EnergyModel& m) { return m.class_name == name; });
  if (it == models.end()) throw std::out_of_range("unknown vehicle class: " + name);
  return *it;
}

std::vector<EnergyModel> load_models(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open energy model file " + path.string());
  const auto doc = nlohmann::json::parse(in);
  const auto& records = doc.contains("models") ? doc.at("models") : doc;
  std::vector<EnergyModel> out;
  for (const auto& r : records) {
    EnergyModel m;
    m.class_name = r.at("class_name").get<std::string>();
    m.beta = r.at("beta").get<double>();
    for (int i = 0; i < 4; ++i) m.c[i] = r.at("c" + std::to_string(i)).get<double>();
    for (int i = 0; i < 3; ++i) m.p[i] = r.at("p" + std::to_string(i)).get<double>();
    for (int i = 0; i < 2; ++i) m.q[i] = r.at("q" + std::to_string(i)).get<double>();
    for (int i = 0; i < 3; ++i) m.z[i] = r.at("z" + std::to_string(i)).get<double>();
    m.clamp_linear_term = r.value("clamp_linear_term", false);
    m.validate();
    out.push_back(std::move(m));
  }
  if (out.empty()) throw std::invalid_argument("energy model file has no records");
  return out;
}

void save_models(const std::filesystem::path& path, const std::vector<EnergyModel>& models) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : models) {
    nlohmann::json r;
    r["class_name"] = m.class_name;
    r["beta"] = m.beta;
    for (int i = 0; i < 4; ++i) r["c" + std::to_string(i)] = m.c[i];
    for (int i = 0; i < 3; ++i) r["p" + std::to_string(i)] = m.p[i];
    for (int i = 0; i < 2; ++i) r["q" + std::to_string(i)] = m.q[i];
    for (int i = 0; i < 3; ++i) r["z" + std::to_string(i)] = m.z[i];
    if (m.clamp_linear_term) r["clamp_linear_term"] = true;
    arr.push_back(std::move(r));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << nlohmann::json{{"illustrative", true}, {"models", arr}}.dump(2) << "\n";
}

}  // namespace wavectl::energy
