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

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace wavectl::energy {

inline constexpr double kGramsPerGallon = 2839.0;
inline constexpr double kMetersPerMile = 1609.344;

/// Polynomial fuel-rate model of one vehicle class:
///
///   f(v, a, theta) = max{beta, C(v) + P(v) a + Q(v) a+^2 + Z(v) theta}
///   a+ = max(-P(v) / (2 Q(v)), a)
///
/// With `clamp_linear_term` set, the linear term uses a+ as well.
struct EnergyModel {
  std::string class_name;
  double beta = 0.0;
  std::array<double, 4> c{};  // C(v) = c0 + c1 v + c2 v^2 + c3 v^3
  std::array<double, 3> p{};  // P(v)
  std::array<double, 2> q{};  // Q(v)
  std::array<double, 3> z{};  // Z(v)
  bool clamp_linear_term = false;

  double C(double v) const { return c[0] + v * (c[1] + v * (c[2] + v * c[3])); }
  double P(double v) const { return p[0] + v * (p[1] + v * p[2]); }
  double Q(double v) const { return q[0] + v * q[1]; }
  double Z(double v) const { return z[0] + v * (z[1] + v * z[2]); }

  /// Checks beta >= 0, c0 > 0 and Q, Z > 0 on the operating range [0, 40] m/s.
  void validate() const;
};

/// Instantaneous fuel rate [g/s]. Throws std::domain_error for v < 0.
double fuel_rate(double v, double a, double theta, const EnergyModel& m);

/// Partial derivatives of the fuel rate, used by gradient-based optimizers.
/// Zero where the beta floor is active.
struct FuelRateGradient {
  double d_v = 0.0;
  double d_a = 0.0;
};
FuelRateGradient fuel_rate_gradient(double v, double a, double theta, const EnergyModel& m);

/// Accelerations from uniformly sampled speeds: central differences inside,
/// one-sided at the endpoints.
std::vector<double> finite_difference_accel(std::span<const double> speeds, double dt);

/// Total fuel [g] of a speed trace sampled every dt. `grades` may be empty
/// (flat road) or must match `speeds` in length.
double trajectory_fuel(std::span<const double> speeds, std::span<const double> grades,
                       double dt, const EnergyModel& m);

/// Miles per gallon for `total_fuel` grams over `total_distance` meters.
double fuel_economy(double total_fuel, double total_distance,
                    double grams_per_gallon = kGramsPerGallon);

/// Shipped illustrative coefficient sets, one per vehicle class.
std::vector<EnergyModel> default_models();

/// Looks a class up by name in `models`; throws std::out_of_range.
const EnergyModel& find_model(const std::vector<EnergyModel>& models, const std::string& name);

/// Coefficient file: JSON array of records whose keys match the field
/// names (class_name, beta, c0..c3, p0..p2, q0..q1, z0..z2). Every record
/// is validated.
std::vector<EnergyModel> load_models(const std::filesystem::path& path);
void save_models(const std::filesystem::path& path, const std::vector<EnergyModel>& models);

}  // namespace wavectl::energy
