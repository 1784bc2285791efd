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

#include "wavectl/config.hpp"

#include <fstream>

#include <fmt/format.h>

namespace wavectl {

namespace cfm {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(IdmParams, v0, T, s0, delta, a, b)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(OvmParams, alpha, beta, nu, v_max, k, d, l)
}  // namespace cfm

namespace accel {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BaseControllerConfig, k, k2, s0, a_min, a_max, a_l_min, a_lead_tau,
                                                target_ema_tau, sensor_range)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LcConfig, c, t_star, dv_star, h_safe, C_safe, eps, jerk_threshold,
                                                gap_jump, alpha_cap)
}  // namespace accel

namespace acc {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AccPlantParams, k_p, k_g, k_v, d_off, switch_range, a_min, a_max,
                                                press_latency)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AccSetpoints, speed_setting, gap_setting)
}  // namespace acc

namespace mpc {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(MpcConfig, N, dt, v_limit, a_min, a_max, s_min, h_min, d_max, h_max,
                                                slack_weight, length, sensor_range)
}  // namespace mpc

namespace planner {
NLOHMANN_JSON_SERIALIZE_ENUM(KernelKind, {{KernelKind::Uniform, "uniform"},
                                          {KernelKind::Triangular, "triangular"},
                                          {KernelKind::Quartic, "quartic"},
                                          {KernelKind::Gaussian, "gaussian"}})
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PlannerConfig, corridor_begin, corridor_end, coarse_length,
                                                fine_length, lanes, window, kernel, period, latency, ping_window,
                                                wave_speed, free_speed, free_fraction, bottleneck_fraction,
                                                bottleneck_persistence, buffer_length, buffer, road_max,
                                                out_of_order_tolerance)
}  // namespace planner

namespace sim {
NLOHMANN_JSON_SERIALIZE_ENUM(ScenarioKind, {{ScenarioKind::Shockwave, "shockwave"},
                                            {ScenarioKind::Freeflow, "freeflow"},
                                            {ScenarioKind::Bottleneck, "bottleneck"}})
NLOHMANN_JSON_SERIALIZE_ENUM(CutEvent::Type, {{CutEvent::Type::In, "in"}, {CutEvent::Type::Out, "out"}})
NLOHMANN_JSON_SERIALIZE_ENUM(LeaderSource::Kind, {{LeaderSource::Kind::StopAndGo, "stop_and_go"},
                                                  {LeaderSource::Kind::Constant, "constant"},
                                                  {LeaderSource::Kind::Pulse, "pulse"},
                                                  {LeaderSource::Kind::File, "file"}})
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(StopAndGoParams, duration, v_free, v_floor, depth_min, depth_max,
                                                width_min, width_max, spacing_min, spacing_max, first_wave,
                                                wave_speed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CutEvent, t, target, type, gap, speed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BottleneckSpec, enabled, x_begin, x_end, kappa, v_free)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LeaderSource, kind, stop_and_go, speed, pulse_depth, pulse_start,
                                                pulse_duration, path)
}  // namespace sim

namespace config {

namespace {

// Enum values that nlohmann cannot map fall back to the first entry, so
// string enums are checked by hand before conversion.
void check_enum(const Json& in, const char* key, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!in.is_object() || !in.contains(key)) return;
  const Json& v = in.at(key);
  if (v.is_string()) {
    for (const char* a : allowed) {
      if (v.get<std::string>() == a) return;
    }
  }
  throw ConfigError(fmt::format("{}.{}: unsupported value {}", where, key, v.dump()));
}

/// Every key of `in` must exist in `ref`, recursively through objects.
void check_keys(const Json& in, const Json& ref, const std::string& where) {
  if (!in.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = in.begin(); it != in.end(); ++it) {
    if (!ref.contains(it.key())) throw ConfigError(fmt::format("{}: unknown key '{}'", where, it.key()));
    const Json& r = ref.at(it.key());
    if (r.is_object() && !it.value().is_null()) check_keys(it.value(), r, where + "." + it.key());
  }
}

template <typename T>
T overlay(const T& base, const Json& in, const std::string& where) {
  Json ref = base;
  check_keys(in, ref, where);
  ref.merge_patch(in);
  try {
    return ref.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", where, e.what()));
  }
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", key, e.what()));
  }
}

void require_keys(const Json& in, std::initializer_list<const char*> keys, const std::string& where) {
  if (!in.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = in.begin(); it != in.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw ConfigError(fmt::format("{}: unknown key '{}'", where, it.key()));
  }
}

template <typename F>
auto validated(F&& f, const std::string& where) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(fmt::format("{}: {}", where, e.what()));
  }
}

sim::ControllerVariant variant_from(const Json& j, const std::string& where) {
  try {
    return sim::parse_variant(j.get<std::string>());
  } catch (const std::exception& e) {
    throw ConfigError(fmt::format("{}: {}", where, e.what()));
  }
}

const char* kScenarioKeys[] = {"base", "name", "kind", "avs", "humans", "interleaved", "leader", "bottleneck",
                               "cuts", "duration", "dt", "vehicle_length", "initial_gap", "free_speed",
                               "energy_class"};

}  // namespace

Json scenario_to_json(const sim::Scenario& s) {
  Json j;
  j["name"] = s.name;
  j["kind"] = s.kind;
  j["avs"] = s.avs;
  j["humans"] = s.humans;
  j["interleaved"] = s.interleaved;
  j["leader"] = s.leader;
  j["bottleneck"] = s.bottleneck;
  j["cuts"] = s.cuts;
  j["duration"] = s.duration;
  j["dt"] = s.dt;
  j["vehicle_length"] = s.vehicle_length;
  j["initial_gap"] = s.initial_gap ? Json(*s.initial_gap) : Json(nullptr);
  j["free_speed"] = s.free_speed;
  j["energy_class"] = s.energy_class;
  return j;
}

sim::Scenario scenario_from_json(const Json& in) {
  if (!in.is_object()) throw ConfigError("scenario: expected an object");
  for (auto it = in.begin(); it != in.end(); ++it) {
    if (std::find(std::begin(kScenarioKeys), std::end(kScenarioKeys), it.key()) == std::end(kScenarioKeys)) {
      throw ConfigError(fmt::format("scenario: unknown key '{}'", it.key()));
    }
  }
  check_enum(in, "kind", {"shockwave", "freeflow", "bottleneck"}, "scenario");
  if (in.contains("leader")) check_enum(in.at("leader"), "kind", {"stop_and_go", "constant", "pulse", "file"}, "scenario.leader");
  sim::Scenario s;
  if (in.contains("base")) {
    s = validated([&] { return sim::builtin_scenario(in.at("base").get<std::string>()); }, "scenario.base");
  }
  s.name = get_or(in, "name", s.name);
  if (in.contains("kind")) s.kind = in.at("kind").get<sim::ScenarioKind>();
  s.avs = get_or(in, "avs", s.avs);
  s.humans = get_or(in, "humans", s.humans);
  s.interleaved = get_or(in, "interleaved", s.interleaved);
  if (in.contains("leader")) s.leader = overlay(s.leader, in.at("leader"), "scenario.leader");
  if (in.contains("bottleneck")) s.bottleneck = overlay(s.bottleneck, in.at("bottleneck"), "scenario.bottleneck");
  if (in.contains("cuts")) {
    if (!in.at("cuts").is_array()) throw ConfigError("scenario.cuts: expected an array");
    s.cuts.clear();
    for (const auto& c : in.at("cuts")) {
      check_enum(c, "type", {"in", "out"}, "scenario.cuts");
      s.cuts.push_back(overlay(sim::CutEvent{}, c, "scenario.cuts"));
    }
  }
  s.duration = get_or(in, "duration", s.duration);
  s.dt = get_or(in, "dt", s.dt);
  s.vehicle_length = get_or(in, "vehicle_length", s.vehicle_length);
  if (in.contains("initial_gap")) {
    s.initial_gap = in.at("initial_gap").is_null() ? std::nullopt : std::optional<double>(get_or(in, "initial_gap", 0.0));
  }
  s.free_speed = get_or(in, "free_speed", s.free_speed);
  s.energy_class = get_or(in, "energy_class", s.energy_class);
  validated([&] { s.validate(); return 0; }, "scenario '" + s.name + "'");
  return s;
}

sim::Scenario resolve_scenario(const Json& j, const std::filesystem::path& base_dir) {
  if (j.is_object()) return scenario_from_json(j);
  if (!j.is_string()) throw ConfigError("scenario: expected a name, a path or an object");
  const auto ref = j.get<std::string>();
  const auto names = sim::builtin_scenario_names();
  if (std::find(names.begin(), names.end(), ref) != names.end()) return sim::builtin_scenario(ref);
  std::filesystem::path p(ref);
  if (p.is_relative() && !base_dir.empty() && !std::filesystem::exists(p)) p = base_dir / p;
  if (!std::filesystem::exists(p)) throw ConfigError("scenario: '" + ref + "' is neither a built-in name nor a file");
  sim::Scenario s = scenario_from_json(read_json(p));
  if (s.leader.kind == sim::LeaderSource::Kind::File && std::filesystem::path(s.leader.path).is_relative()) {
    s.leader.path = (p.parent_path() / s.leader.path).string();
  }
  return s;
}

Json controllers_to_json(const sim::ControllerSet& c) {
  Json j;
  j["idm"] = c.idm;
  j["base"] = c.base;
  j["lc"] = c.lc;
  j["acc_plant"] = c.acc_plant;
  j["acc_initial"] = c.acc_initial;
  j["mpc"] = c.mpc;
  return j;
}

sim::ControllerSet controllers_from_json(const Json& in) {
  require_keys(in, {"idm", "base", "lc", "acc_plant", "acc_initial", "mpc"}, "controllers");
  sim::ControllerSet c;
  if (in.contains("idm")) c.idm = overlay(c.idm, in.at("idm"), "controllers.idm");
  if (in.contains("base")) c.base = overlay(c.base, in.at("base"), "controllers.base");
  if (in.contains("lc")) c.lc = overlay(c.lc, in.at("lc"), "controllers.lc");
  if (in.contains("acc_plant")) c.acc_plant = overlay(c.acc_plant, in.at("acc_plant"), "controllers.acc_plant");
  if (in.contains("acc_initial")) c.acc_initial = overlay(c.acc_initial, in.at("acc_initial"), "controllers.acc_initial");
  if (in.contains("mpc")) c.mpc = overlay(c.mpc, in.at("mpc"), "controllers.mpc");
  validated([&] {
    c.idm.validate();
    c.base.validate();
    c.lc.validate();
    c.acc_plant.validate();
    acc::validate_setpoints(c.acc_initial);
    return 0;
  }, "controllers");
  return c;
}

Json planner_to_json(const planner::PlannerConfig& c) { return Json(c); }

planner::PlannerConfig planner_from_json(const Json& in) {
  check_enum(in, "kernel", {"uniform", "triangular", "quartic", "gaussian"}, "planner_config");
  auto c = overlay(planner::PlannerConfig{}, in, "planner_config");
  validated([&] { c.validate(); return 0; }, "planner_config");
  return c;
}

RunConfig run_config_from_json(const Json& in, const std::filesystem::path& base_dir) {
  require_keys(in, {"scenario", "controller", "planner", "seed", "traces", "energy_models", "controllers",
                    "planner_config"},
               "run config");
  RunConfig c;
  if (in.contains("scenario")) c.scenario = resolve_scenario(in.at("scenario"), base_dir);
  if (in.contains("controllers")) c.options.controllers = controllers_from_json(in.at("controllers"));
  if (in.contains("controller")) c.options.controllers.variant = variant_from(in.at("controller"), "controller");
  c.options.planner = get_or(in, "planner", c.options.planner);
  c.options.seed = get_or<std::uint64_t>(in, "seed", c.options.seed);
  c.options.traces = get_or(in, "traces", c.options.traces);
  if (in.contains("planner_config")) c.options.planner_cfg = planner_from_json(in.at("planner_config"));
  c.energy_models = get_or<std::string>(in, "energy_models", "");
  if (!c.energy_models.empty() && std::filesystem::path(c.energy_models).is_relative() && !base_dir.empty() &&
      !std::filesystem::exists(c.energy_models)) {
    c.energy_models = (base_dir / c.energy_models).string();
  }
  return c;
}

Json run_config_to_json(const RunConfig& c) {
  Json j;
  j["scenario"] = scenario_to_json(c.scenario);
  j["controller"] = sim::variant_name(c.options.controllers.variant);
  j["planner"] = c.options.planner;
  j["seed"] = c.options.seed;
  j["traces"] = c.options.traces;
  j["energy_models"] = c.energy_models;
  j["controllers"] = controllers_to_json(c.options.controllers);
  j["planner_config"] = planner_to_json(c.options.planner_cfg);
  return j;
}

kpi::SweepSpec sweep_from_json(const Json& in, const std::filesystem::path& base_dir) {
  require_keys(in, {"scenarios", "variants", "seeds", "controllers", "planner_config", "traces"}, "sweep");
  kpi::SweepSpec s;
  s.base.traces = false;
  if (!in.contains("scenarios") || !in.at("scenarios").is_array() || in.at("scenarios").empty()) {
    throw ConfigError("sweep: 'scenarios' must be a non-empty array");
  }
  for (const auto& sc : in.at("scenarios")) s.scenarios.push_back(resolve_scenario(sc, base_dir));
  if (!in.contains("variants") || !in.at("variants").is_array()) throw ConfigError("sweep: 'variants' must be an array");
  for (const auto& v : in.at("variants")) {
    kpi::VariantSpec vs;
    if (v.is_string()) {
      vs.name = v.get<std::string>();
      vs.controller = variant_from(v, "sweep.variants");
    } else {
      require_keys(v, {"name", "controller", "planner"}, "sweep.variants");
      vs.controller = variant_from(v.at("controller"), "sweep.variants.controller");
      vs.name = get_or<std::string>(v, "name", sim::variant_name(vs.controller));
      vs.planner = get_or(v, "planner", true);
    }
    for (const auto& other : s.variants) {
      if (other.name == vs.name) throw ConfigError("sweep: duplicate variant name '" + vs.name + "'");
    }
    s.variants.push_back(vs);
  }
  if (in.contains("seeds")) s.seeds = get_or<std::vector<std::uint64_t>>(in, "seeds", {});
  if (s.seeds.empty()) throw ConfigError("sweep: 'seeds' must not be empty");
  if (in.contains("controllers")) s.base.controllers = controllers_from_json(in.at("controllers"));
  if (in.contains("planner_config")) s.base.planner_cfg = planner_from_json(in.at("planner_config"));
  s.base.traces = get_or(in, "traces", false);
  return s;
}

Json sweep_to_json(const kpi::SweepSpec& s) {
  Json j;
  j["scenarios"] = Json::array();
  for (const auto& sc : s.scenarios) j["scenarios"].push_back(scenario_to_json(sc));
  j["variants"] = Json::array();
  for (const auto& v : s.variants) {
    j["variants"].push_back({{"name", v.name}, {"controller", sim::variant_name(v.controller)}, {"planner", v.planner}});
  }
  j["seeds"] = s.seeds;
  j["controllers"] = controllers_to_json(s.base.controllers);
  j["planner_config"] = planner_to_json(s.base.planner_cfg);
  j["traces"] = s.base.traces;
  return j;
}

Json optimize_to_json(const OptimizeConfig& c) {
  Json j;
  j["mode"] = c.mode == OptimizeConfig::Mode::Ocp ? "ocp" : "mpc";
  j["seed"] = c.setup.seed;
  j["followers"] = c.setup.followers;
  j["avs"] = c.setup.avs;
  j["horizon"] = c.setup.horizon;
  j["pieces"] = c.setup.pieces;
  j["objective"] = c.setup.objective == ocp::ObjectiveKind::AccelProxy ? "accel" : "fuel";
  j["ovm"] = c.setup.ovm;
  j["leader"] = c.setup.leader;
  j["iterations"] = c.iterations;
  j["joint_iterations"] = c.joint_iterations;
  j["sequential"] = c.sequential;
  j["gradient"] = c.gradient == ocp::GradientKind::Adjoint ? "adjoint" : "fd";
  j["u_min"] = c.u_min;
  j["u_max"] = c.u_max;
  j["h_min"] = c.h_min;
  j["h_max"] = c.h_max;
  j["d_min"] = c.d_min;
  j["d_max"] = c.d_max;
  j["penalty"] = c.penalty;
  j["audit_tolerance"] = c.audit_tolerance;
  j["mpc"] = c.mpc;
  j["mpc_leader_speed"] = c.mpc_leader_speed;
  j["mpc_initial_gap"] = c.mpc_initial_gap;
  j["mpc_initial_speed"] = c.mpc_initial_speed;
  j["mpc_duration"] = c.mpc_duration;
  return j;
}

OptimizeConfig optimize_from_json(const Json& in) {
  OptimizeConfig c;
  Json ref = optimize_to_json(c);
  check_keys(in, ref, "optimize");
  check_enum(in, "mode", {"ocp", "mpc"}, "optimize");
  check_enum(in, "objective", {"accel", "fuel"}, "optimize");
  check_enum(in, "gradient", {"adjoint", "fd"}, "optimize");
  if (in.contains("mode")) c.mode = in.at("mode") == "ocp" ? OptimizeConfig::Mode::Ocp : OptimizeConfig::Mode::Mpc;
  c.setup.seed = get_or<std::uint64_t>(in, "seed", c.setup.seed);
  c.setup.followers = get_or(in, "followers", c.setup.followers);
  c.setup.avs = get_or(in, "avs", c.setup.avs);
  c.setup.horizon = get_or(in, "horizon", c.setup.horizon);
  c.setup.pieces = get_or(in, "pieces", c.setup.pieces);
  if (in.contains("objective")) {
    c.setup.objective = in.at("objective") == "accel" ? ocp::ObjectiveKind::AccelProxy : ocp::ObjectiveKind::Fuel;
  }
  if (in.contains("ovm")) c.setup.ovm = overlay(c.setup.ovm, in.at("ovm"), "optimize.ovm");
  if (in.contains("leader")) c.setup.leader = overlay(c.setup.leader, in.at("leader"), "optimize.leader");
  c.iterations = get_or(in, "iterations", c.iterations);
  c.joint_iterations = get_or(in, "joint_iterations", c.joint_iterations);
  c.sequential = get_or(in, "sequential", c.sequential);
  if (in.contains("gradient")) {
    c.gradient = in.at("gradient") == "adjoint" ? ocp::GradientKind::Adjoint : ocp::GradientKind::FiniteDifference;
  }
  c.u_min = get_or(in, "u_min", c.u_min);
  c.u_max = get_or(in, "u_max", c.u_max);
  c.h_min = get_or(in, "h_min", c.h_min);
  c.h_max = get_or(in, "h_max", c.h_max);
  c.d_min = get_or(in, "d_min", c.d_min);
  c.d_max = get_or(in, "d_max", c.d_max);
  c.penalty = get_or(in, "penalty", c.penalty);
  c.audit_tolerance = get_or(in, "audit_tolerance", c.audit_tolerance);
  if (in.contains("mpc")) c.mpc = overlay(c.mpc, in.at("mpc"), "optimize.mpc");
  c.mpc_leader_speed = get_or(in, "mpc_leader_speed", c.mpc_leader_speed);
  c.mpc_initial_gap = get_or(in, "mpc_initial_gap", c.mpc_initial_gap);
  c.mpc_initial_speed = get_or(in, "mpc_initial_speed", c.mpc_initial_speed);
  c.mpc_duration = get_or(in, "mpc_duration", c.mpc_duration);
  if (c.iterations < 0 || c.joint_iterations < 0) throw ConfigError("optimize: iterations must be >= 0");
  if (!(c.audit_tolerance >= 0.0)) throw ConfigError("optimize: audit_tolerance must be >= 0");
  if (!(c.mpc_duration > 0.0) || !(c.mpc_initial_gap > 0.0) || c.mpc_initial_speed < 0.0 || c.mpc_leader_speed < 0.0) {
    throw ConfigError("optimize: MPC rollout needs a positive duration and gap and non-negative speeds");
  }
  validated([&] { make_problem(c); return 0; }, "optimize");
  return c;
}

ocp::OcpProblem make_problem(const OptimizeConfig& c) {
  ocp::OcpProblem p = ocp::make_problem(c.setup);
  p.u_min = c.u_min;
  p.u_max = c.u_max;
  p.h_min = c.h_min;
  p.h_max = c.h_max;
  p.d_min = c.d_min;
  p.d_max = c.d_max;
  p.penalty = c.penalty;
  p.validate();
  return p;
}

sim::StopAndGoParams stop_and_go_from_json(const Json& j) {
  auto p = overlay(sim::StopAndGoParams{}, j, "stop_and_go");
  validated([&] { p.validate(); return 0; }, "stop_and_go");
  return p;
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return Json::parse(in, nullptr, true, true);  // comments allowed
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace config
}  // namespace wavectl
