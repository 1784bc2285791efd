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

#include "wavectl/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

#include "wavectl/csv.hpp"

namespace wavectl::ocp {

int OcpProblem::av_count() const {
  return static_cast<int>(std::count(is_av.begin(), is_av.end(), char{1}));
}

void OcpProblem::validate() const {
  ovm.validate();
  if (leader_x.size() != leader_v.size() || leader_v.size() < 2) {
    throw std::invalid_argument("ocp: leader trajectory needs matching x and v with at least two samples");
  }
  if (!(dt > 0.0)) throw std::invalid_argument("ocp: dt must be positive");
  if (is_av.empty()) throw std::invalid_argument("ocp: empty platoon");
  if (x0.size() != is_av.size() || v0.size() != is_av.size()) throw std::invalid_argument("ocp: initial state size mismatch");
  if (pieces < 1 || steps() % pieces != 0) {
    throw std::invalid_argument(fmt::format("ocp: {} pieces do not divide {} steps", pieces, steps()));
  }
  if (!(h_min < h_max)) throw std::invalid_argument("ocp: need h_min < h_max");
  if (!(d_min < d_max)) throw std::invalid_argument("ocp: need d_min < d_max");
  if (!(u_min < u_max)) throw std::invalid_argument("ocp: need u_min < u_max");
  if (!(penalty >= 0.0)) throw std::invalid_argument("ocp: penalty must be >= 0");
}

sim::StopAndGoParams OcpSetup::default_leader() {
  sim::StopAndGoParams p;
  p.v_free = 20.0;
  p.depth_min = 10.0;
  p.depth_max = 14.0;
  p.width_min = 600.0;
  p.width_max = 1000.0;
  p.spacing_min = 1000.0;
  p.spacing_max = 2000.0;
  p.first_wave = 600.0;
  return p;
}

double bando_equilibrium_gap(double v, const cfm::OvmParams& p) {
  const double tld = std::tanh(p.l + p.d);
  const double arg = v * (1.0 + tld) / p.v_max - tld;
  if (!(arg > -1.0 && arg < 1.0)) throw std::domain_error("bando_equilibrium_gap: speed outside the model range");
  return (std::atanh(arg) + p.d) / p.k;
}

OcpProblem make_problem(const OcpSetup& s) {
  if (s.followers < 1 || s.avs < 0 || s.avs > s.followers) throw std::invalid_argument("ocp setup: bad platoon size");
  sim::StopAndGoParams lp = s.leader;
  lp.duration = s.horizon;
  const sim::SyntheticLeader lead = sim::generate_stop_and_go(s.seed, lp);
  OcpProblem p;
  p.pieces = s.pieces;
  p.objective = s.objective;
  p.ovm = s.ovm;
  p.energy_model = energy::default_models().front();
  const auto& v = lead.trajectory.v;
  p.leader_v = v;
  p.leader_x.resize(v.size());
  // Euler positions so the leader obeys the same scheme as the followers.
  const double gap0 = bando_equilibrium_gap(v.front(), p.ovm);
  p.leader_x[0] = (gap0 + p.ovm.l) * s.followers;
  for (std::size_t k = 1; k < v.size(); ++k) p.leader_x[k] = p.leader_x[k - 1] + p.dt * v[k - 1];
  p.is_av.assign(static_cast<std::size_t>(s.followers), 0);
  for (int j = 0; j < s.avs; ++j) p.is_av[static_cast<std::size_t>(j * s.followers / s.avs)] = 1;
  for (int i = 0; i < s.followers; ++i) {
    p.x0.push_back(p.leader_x[0] - (gap0 + p.ovm.l) * (i + 1));
    p.v0.push_back(v.front());
  }
  p.validate();
  return p;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Trajectory {
  std::vector<double> x, v, a;  // (K+1) * n, row-major by step
  int n = 0;
  double& X(int k, int i) { return x[static_cast<std::size_t>(k) * n + i]; }
  double& V(int k, int i) { return v[static_cast<std::size_t>(k) * n + i]; }
  double& A(int k, int i) { return a[static_cast<std::size_t>(k) * n + i]; }
};

std::vector<int> av_slots(const OcpProblem& p) {
  std::vector<int> slot(p.is_av.size(), -1);
  int j = 0;
  for (std::size_t i = 0; i < p.is_av.size(); ++i) {
    if (p.is_av[i]) slot[i] = j++;
  }
  return slot;
}

/// Piece-start command of the guess generator: track the human equilibrium
/// gap for the leader's speed, kept inside the envelope, with strong damping
/// of the relative speed.
double tracking_command(double gap, double v, double vl, const OcpProblem& p) {
  double target;
  try {
    target = bando_equilibrium_gap(std::clamp(vl, 0.0, 0.999 * p.ovm.v_max), p.ovm);
  } catch (const std::domain_error&) {
    target = p.h_min * v + p.d_min;
  }
  const double lo = p.h_min * v + p.d_min, hi = p.h_max * v + p.d_max;
  target = std::clamp(target, lo, hi);
  const double a = 0.1 * (gap - target) + 0.4 * (vl - v);
  return std::clamp(a, p.u_min, p.u_max);
}

/// Forward Euler run; fills `tr` and returns the evaluation. With `gen`,
/// the controls of the flagged AVs are written into `*fill` piece by piece
/// from the tracking command instead of being read.
OcpEval forward(const std::vector<double>& u, const OcpProblem& p, Trajectory& tr,
                const std::vector<char>* gen = nullptr, std::vector<double>* fill = nullptr) {
  const int K = p.steps(), n = p.followers(), spp = p.steps_per_piece();
  const auto slot = av_slots(p);
  if (!gen && u.size() != p.control_size()) throw std::invalid_argument("ocp: control vector has the wrong size");
  tr.n = n;
  tr.x.assign(static_cast<std::size_t>(K + 1) * n, 0.0);
  tr.v.assign(tr.x.size(), 0.0);
  tr.a.assign(tr.x.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    tr.X(0, i) = p.x0[static_cast<std::size_t>(i)];
    tr.V(0, i) = p.v0[static_cast<std::size_t>(i)];
  }
  OcpEval ev;
  const double l = p.ovm.l;
  for (int k = 0; k < K; ++k) {
    const int piece = k / spp;
    for (int i = 0; i < n; ++i) {
      const double xl = i == 0 ? p.leader_x[static_cast<std::size_t>(k)] : tr.X(k, i - 1);
      const double vl = i == 0 ? p.leader_v[static_cast<std::size_t>(k)] : tr.V(k, i - 1);
      const double x = tr.X(k, i), v = tr.V(k, i);
      const double gap = xl - x - l;
      if (!(gap > 0.0)) {
        ev.collision = true;
        ev.diagnostic = fmt::format("collision of follower {} at t={:.1f} s", i, k * p.dt);
        ev.objective = ev.total = kInf;
        return ev;
      }
      double a;
      if (slot[static_cast<std::size_t>(i)] >= 0) {
        const std::size_t c = static_cast<std::size_t>(slot[static_cast<std::size_t>(i)]) * p.pieces + piece;
        if (gen && (*gen)[static_cast<std::size_t>(i)] && k % spp == 0) (*fill)[c] = tracking_command(gap, v, vl, p);
        a = gen ? (*fill)[c] : u[c];
        if (p.objective == ObjectiveKind::AccelProxy) ev.objective += p.dt * a * a;
        const double e1 = std::max(0.0, p.h_min * v + p.d_min - gap);
        const double e2 = std::max(0.0, gap - p.h_max * v - p.d_max);
        const double e3 = std::max(0.0, -v);
        ev.violation += p.dt * (e1 * e1 + e2 * e2 + e3 * e3);
        ev.max_gap_violation = std::max({ev.max_gap_violation, e1, e2});
        ev.max_speed_violation = std::max(ev.max_speed_violation, e3);
      } else {
        a = cfm::ovm_ftl_accel(gap, v, vl, p.ovm);
        if (p.objective == ObjectiveKind::AccelProxy) ev.objective += p.dt * a * a;
      }
      if (p.objective == ObjectiveKind::Fuel) ev.objective += p.dt * energy::fuel_rate(std::max(v, 0.0), a, 0.0, p.energy_model);
      tr.A(k, i) = a;
      tr.X(k + 1, i) = x + p.dt * v;
      tr.V(k + 1, i) = v + p.dt * a;
    }
  }
  ev.total = ev.objective + p.penalty * ev.violation;
  return ev;
}

}  // namespace

OcpEval ocp_objective(const std::vector<double>& u, const OcpProblem& p) {
  Trajectory tr;
  return forward(u, p, tr);
}

double baseline_objective(const OcpProblem& p) {
  OcpProblem h = p;
  std::fill(h.is_av.begin(), h.is_av.end(), char{0});
  const OcpEval ev = ocp_objective({}, h);
  if (ev.collision) throw std::runtime_error("ocp baseline collides: " + ev.diagnostic);
  return ev.objective;
}

States rollout(const std::vector<double>& u, const OcpProblem& p) {
  Trajectory tr;
  const OcpEval ev = forward(u, p, tr);
  if (ev.collision) throw cfm::CollisionError(ev.diagnostic);
  States s;
  const int K = p.steps(), n = p.followers();
  for (int k = 0; k <= K; ++k) {
    s.x.emplace_back(tr.x.begin() + static_cast<std::ptrdiff_t>(k) * n, tr.x.begin() + static_cast<std::ptrdiff_t>(k + 1) * n);
    s.v.emplace_back(tr.v.begin() + static_cast<std::ptrdiff_t>(k) * n, tr.v.begin() + static_cast<std::ptrdiff_t>(k + 1) * n);
    s.a.emplace_back(tr.a.begin() + static_cast<std::ptrdiff_t>(k) * n, tr.a.begin() + static_cast<std::ptrdiff_t>(k + 1) * n);
  }
  return s;
}

std::vector<double> gradient_adjoint(const std::vector<double>& u, const OcpProblem& p) {
  if (p.objective != ObjectiveKind::AccelProxy) {
    throw std::invalid_argument("ocp: the adjoint gradient covers the acceleration objective only");
  }
  Trajectory tr;
  const OcpEval ev = forward(u, p, tr);
  if (ev.collision) throw cfm::CollisionError(ev.diagnostic);
  const int K = p.steps(), n = p.followers(), spp = p.steps_per_piece();
  const auto slot = av_slots(p);
  const double dt = p.dt, mu = p.penalty, l = p.ovm.l;
  const cfm::OvmParams& o = p.ovm;
  std::vector<double> grad(u.size(), 0.0);
  // Costates of x and v at step k + 1 (zero at the final step).
  std::vector<double> lx(static_cast<std::size_t>(n), 0.0), lv(lx), nx(lx), nv(lx);
  for (int k = K - 1; k >= 0; --k) {
    for (int i = 0; i < n; ++i) {
      nx[static_cast<std::size_t>(i)] = lx[static_cast<std::size_t>(i)];
      nv[static_cast<std::size_t>(i)] = lv[static_cast<std::size_t>(i)] + dt * lx[static_cast<std::size_t>(i)];
    }
    const int piece = k / spp;
    for (int i = 0; i < n; ++i) {
      const auto si = static_cast<std::size_t>(i);
      const double xl = i == 0 ? p.leader_x[static_cast<std::size_t>(k)] : tr.X(k, i - 1);
      const double vl = i == 0 ? p.leader_v[static_cast<std::size_t>(k)] : tr.V(k, i - 1);
      const double v = tr.V(k, i);
      const double gap = xl - tr.X(k, i) - l;
      const double a = tr.A(k, i);
      if (slot[si] >= 0) {
        grad[static_cast<std::size_t>(slot[si]) * p.pieces + piece] += lv[si] * dt + 2.0 * dt * a;
        const double e1 = std::max(0.0, p.h_min * v + p.d_min - gap);
        const double e2 = std::max(0.0, gap - p.h_max * v - p.d_max);
        const double e3 = std::max(0.0, -v);
        const double d_gap = 2.0 * mu * dt * (e2 - e1);
        const double d_v = 2.0 * mu * dt * (e1 * p.h_min - e2 * p.h_max - e3);
        nv[si] += d_v;
        nx[si] -= d_gap;
        if (i > 0) nx[si - 1] += d_gap;
      } else {
        // A = alpha (V(gap) - v) + beta (vl - v) / gap^nu
        const double w = lv[si] * dt + 2.0 * dt * a;
        const double gnu = std::pow(gap, o.nu);
        const double a_gap = o.alpha * cfm::bando_optimal_velocity_slope(gap, o) - o.nu * o.beta * (vl - v) / (gnu * gap);
        const double a_v = -o.alpha - o.beta / gnu;
        const double a_vl = o.beta / gnu;
        nx[si] -= w * a_gap;
        nv[si] += w * a_v;
        if (i > 0) {
          nx[si - 1] += w * a_gap;
          nv[si - 1] += w * a_vl;
        }
      }
    }
    std::swap(lx, nx);
    std::swap(lv, nv);
  }
  return grad;
}

std::vector<double> gradient_fd(const std::vector<double>& u, const OcpProblem& p, double h) {
  std::vector<double> grad(u.size(), 0.0);
  const auto n = static_cast<std::ptrdiff_t>(u.size());
  // Columns are independent: each perturbs its own copy of the controls.
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t j = 0; j < n; ++j) {
    std::vector<double> w = u;
    const auto sj = static_cast<std::size_t>(j);
    w[sj] = u[sj] + h;
    const double fp = ocp_objective(w, p).total;
    w[sj] = u[sj] - h;
    const double fm = ocp_objective(w, p).total;
    grad[sj] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

std::vector<double> human_mimic_guess(const OcpProblem& p) {
  // Every AV still a human: read its speed at piece boundaries.
  OcpProblem h = p;
  std::fill(h.is_av.begin(), h.is_av.end(), char{0});
  Trajectory tr;
  const OcpEval ev = forward({}, h, tr);
  if (ev.collision) throw std::runtime_error("ocp: human platoon collides: " + ev.diagnostic);
  std::vector<double> u;
  const int spp = p.steps_per_piece();
  for (int i = 0; i < p.followers(); ++i) {
    if (!p.is_av[static_cast<std::size_t>(i)]) continue;
    for (int q = 0; q < p.pieces; ++q) {
      const double dv = tr.V((q + 1) * spp, i) - tr.V(q * spp, i);
      u.push_back(std::clamp(dv / (spp * p.dt), p.u_min, p.u_max));
    }
  }
  return u;
}

std::vector<double> tracking_guess(const OcpProblem& p, std::vector<double> u, const std::vector<char>& generate) {
  p.validate();
  if (generate.size() != p.is_av.size()) throw std::invalid_argument("tracking_guess: mask size mismatch");
  u.resize(p.control_size(), 0.0);
  Trajectory tr;
  const OcpEval ev = forward(u, p, tr, &generate, &u);
  if (ev.collision) throw std::runtime_error("ocp: tracking guess collides, " + ev.diagnostic);
  return u;
}

std::vector<double> initial_guess(const OcpProblem& p) {
  // The open-loop replay of human speeds drifts when the platoon is string
  // unstable, so fall back to the sampled tracking law when it collides.
  std::vector<double> u = human_mimic_guess(p);
  if (!ocp_objective(u, p).collision) return u;
  return tracking_guess(p, {}, p.is_av);
}

GradCheck gradient_check(const OcpProblem& p, std::uint64_t seed) {
  const std::vector<double> guess = initial_guess(p);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double guess_violation = ocp_objective(guess, p).max_gap_violation;
  std::vector<double> u;
  // Independent per-piece noise integrates into a speed random walk, so the
  // amplitude shrinks until the platoon is collision-free and close to the
  // gap envelope. Near-collision points are too stiff for central differences.
  for (double amp = 0.2;; amp *= 0.5) {
    u = guess;
    for (double& x : u) x = std::clamp(x + amp * unit(rng), p.u_min, p.u_max);
    const OcpEval e = ocp_objective(u, p);
    if (!e.collision && e.max_gap_violation <= guess_violation + 1.0) break;
    if (amp < 1e-6) throw std::runtime_error("gradient_check: no collision-free point near the guess");
  }
  const auto ga = gradient_adjoint(u, p);
  const auto gf = gradient_fd(u, p, 1e-5);
  GradCheck out;
  out.pieces = p.pieces;
  for (double g : gf) out.max_abs_gradient = std::max(out.max_abs_gradient, std::abs(g));
  // Entries many orders below the largest one only carry difference noise.
  const double floor = std::max(1e-6 * out.max_abs_gradient, 1e-12);
  for (std::size_t j = 0; j < ga.size(); ++j) {
    const double denom = std::max({std::abs(ga[j]), std::abs(gf[j]), floor});
    out.max_rel_error = std::max(out.max_rel_error, std::abs(ga[j] - gf[j]) / denom);
  }
  return out;
}

OcpResult ocp_optimize(const OcpProblem& p, std::vector<double> u, int iterations, GradientKind kind,
                       const std::vector<char>& active) {
  p.validate();
  if (u.size() != p.control_size()) throw std::invalid_argument("ocp_optimize: initial guess has the wrong size");
  for (double& x : u) x = std::clamp(x, p.u_min, p.u_max);
  OcpResult res;
  OcpEval cur = ocp_objective(u, p);
  if (cur.collision) throw std::runtime_error("ocp_optimize: infeasible start, " + cur.diagnostic);
  res.trace.push_back(cur.total);
  double step = -1.0;
  for (int it = 0; it < iterations; ++it) {
    std::vector<double> g = kind == GradientKind::Adjoint ? gradient_adjoint(u, p) : gradient_fd(u, p);
    if (!active.empty()) {
      for (std::size_t a = 0; a < active.size(); ++a) {
        if (active[a]) continue;
        std::fill_n(g.begin() + static_cast<std::ptrdiff_t>(a) * p.pieces, p.pieces, 0.0);
      }
    }
    double gmax = 0.0;
    for (double x : g) gmax = std::max(gmax, std::abs(x));
    if (gmax == 0.0) break;
    if (step < 0.0) step = 0.5 / gmax;
    bool accepted = false;
    for (int bt = 0; bt < 40; ++bt) {
      std::vector<double> trial(u.size());
      double decrease = 0.0;
      for (std::size_t j = 0; j < u.size(); ++j) {
        trial[j] = std::clamp(u[j] - step * g[j], p.u_min, p.u_max);
        decrease += g[j] * (u[j] - trial[j]);
      }
      if (decrease <= 0.0) break;
      const OcpEval ev = ocp_objective(trial, p);
      if (!ev.collision && ev.total <= cur.total - 1e-4 * decrease) {
        u = std::move(trial);
        cur = ev;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    res.trace.push_back(cur.total);
    res.iterations = it + 1;
    step *= 2.0;
  }
  res.u = std::move(u);
  res.final_eval = cur;
  return res;
}

SequentialResult ocp_optimize_sequential(const OcpProblem& p, int iterations_per_av, int joint_iterations,
                                         GradientKind grad) {
  p.validate();
  std::vector<int> avs;
  for (int i = 0; i < p.followers(); ++i) {
    if (p.is_av[static_cast<std::size_t>(i)]) avs.push_back(i);
  }
  SequentialResult out;
  std::vector<double> u;
  OcpProblem stage = p;
  for (std::size_t j = 0; j < avs.size(); ++j) {
    // Stage j: AVs 0..j are automated, the rest still drive as humans. The
    // newcomer starts from its human behaviour given the upstream controls.
    std::fill(stage.is_av.begin(), stage.is_av.end(), char{0});
    for (std::size_t m = 0; m < j; ++m) stage.is_av[static_cast<std::size_t>(avs[m])] = 1;
    const std::size_t before = u.size();
    Trajectory tr;
    const OcpEval ev = forward(u, stage, tr);
    if (ev.collision) throw std::runtime_error("ocp: stage start collides, " + ev.diagnostic);
    const int spp = stage.steps_per_piece();
    for (int q = 0; q < stage.pieces; ++q) {
      const double dv = tr.V((q + 1) * spp, avs[j]) - tr.V(q * spp, avs[j]);
      u.push_back(std::clamp(dv / (spp * stage.dt), stage.u_min, stage.u_max));
    }
    stage.is_av[static_cast<std::size_t>(avs[j])] = 1;
    if (ocp_objective(u, stage).collision) {
      u.resize(before);
      std::vector<char> gen(stage.is_av.size(), 0);
      gen[static_cast<std::size_t>(avs[j])] = 1;
      u = tracking_guess(stage, u, gen);
    }
    std::vector<char> active(j + 1, 0);
    active[j] = 1;
    OcpResult r = ocp_optimize(stage, u, iterations_per_av, grad, active);
    u = r.u;
    out.trace.insert(out.trace.end(), r.trace.begin(), r.trace.end());
    out.after_each_av.push_back(r.final_eval.objective);
  }
  OcpResult joint = ocp_optimize(p, u, joint_iterations, grad);
  out.trace.insert(out.trace.end(), joint.trace.begin(), joint.trace.end());
  out.result = std::move(joint);
  return out;
}

void write_schedule_csv(const std::filesystem::path& path, const OcpProblem& p, const std::vector<double>& u) {
  auto out = csv::open_out(path);
  out << "# piecewise-constant AV accelerations [m/s^2]\n";
  out << "piece,t_start";
  for (int i = 0; i < p.followers(); ++i) {
    if (p.is_av[static_cast<std::size_t>(i)]) out << fmt::format(",u_follower_{}", i);
  }
  out << "\n";
  const int m = p.av_count();
  for (int q = 0; q < p.pieces; ++q) {
    out << fmt::format("{},{}", q, q * p.steps_per_piece() * p.dt);
    for (int a = 0; a < m; ++a) out << fmt::format(",{}", u[static_cast<std::size_t>(a) * p.pieces + q]);
    out << "\n";
  }
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<double>& trace) {
  auto out = csv::open_out(path);
  out << "iteration,objective\n";
  for (std::size_t i = 0; i < trace.size(); ++i) out << fmt::format("{},{}\n", i, trace[i]);
}

}  // namespace wavectl::ocp
