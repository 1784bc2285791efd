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

#include "wavectl/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace wavectl::mpc {

NnlsResult nnls(const Eigen::MatrixXd& E, const Eigen::VectorXd& f, int max_iterations) {
  const Eigen::Index n = E.cols();
  if (f.size() != E.rows()) throw std::invalid_argument("nnls: dimension mismatch");
  if (max_iterations <= 0) max_iterations = static_cast<int>(3 * n + 30);
  const double tol = 1e-12 * std::max(1.0, E.cwiseAbs().maxCoeff()) * std::max<Eigen::Index>(1, E.rows());

  NnlsResult res;
  res.w = Eigen::VectorXd::Zero(n);
  std::vector<char> passive(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd grad = E.transpose() * (f - E * res.w);

  auto solve_passive = [&](Eigen::VectorXd& z) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    }
    Eigen::MatrixXd Ep(E.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) Ep.col(static_cast<Eigen::Index>(k)) = E.col(idx[k]);
    const Eigen::VectorXd zp = Ep.colPivHouseholderQr().solve(f);
    z.setZero(n);
    for (std::size_t k = 0; k < idx.size(); ++k) z(idx[k]) = zp(static_cast<Eigen::Index>(k));
  };

  int iter = 0;
  while (iter < max_iterations) {
    Eigen::Index t = -1;
    double best = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && grad(j) > best) {
        best = grad(j);
        t = j;
      }
    }
    if (t < 0) {
      res.converged = true;
      break;
    }
    passive[static_cast<std::size_t>(t)] = 1;
    Eigen::VectorXd z;
    while (true) {
      ++iter;
      solve_passive(z);
      bool all_positive = true;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) all_positive = false;
      }
      if (all_positive) {
        res.w = z;
        break;
      }
      double alpha = 1.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) {
          alpha = std::min(alpha, res.w(j) / (res.w(j) - z(j)));
        }
      }
      res.w += alpha * (z - res.w);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && res.w(j) <= tol) {
          passive[static_cast<std::size_t>(j)] = 0;
          res.w(j) = 0.0;
        }
      }
      if (iter >= max_iterations) break;
    }
    grad = E.transpose() * (f - E * res.w);
  }
  res.iterations = iter;
  res.residual = E * res.w - f;
  return res;
}

std::optional<Eigen::VectorXd> least_distance(const Eigen::MatrixXd& G, const Eigen::VectorXd& h) {
  const Eigen::Index m = G.rows();
  const Eigen::Index n = G.cols();
  if (h.size() != m) throw std::invalid_argument("least_distance: dimension mismatch");
  if (m == 0) return Eigen::VectorXd::Zero(n);
  // Row scaling leaves the feasible set unchanged and evens out conditioning.
  Eigen::MatrixXd Gs = G;
  Eigen::VectorXd hs = h;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double s = std::max(Gs.row(i).norm(), std::abs(hs(i)));
    if (s > 0.0) {
      Gs.row(i) /= s;
      hs(i) /= s;
    }
  }
  Eigen::MatrixXd E(n + 1, m);
  E.topRows(n) = Gs.transpose();
  E.row(n) = hs.transpose();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n + 1);
  f(n) = 1.0;
  const NnlsResult r = nnls(E, f);
  const double denom = r.residual(n);
  if (r.residual.norm() < 1e-10 || std::abs(denom) < 1e-14) return std::nullopt;
  Eigen::VectorXd z = -r.residual.head(n) / denom;
  return z;
}

void QpProblem::validate() const {
  if (N < 1) throw std::invalid_argument("QpProblem: N must be >= 1");
  if (!(dt > 0.0)) throw std::invalid_argument("QpProblem: dt must be positive");
  if (!(a_min < a_max)) throw std::invalid_argument("QpProblem: a_min must be below a_max");
  if (!(v_limit > 0.0)) throw std::invalid_argument("QpProblem: v_limit must be positive");
  if (!leader_x.empty() && leader_x.size() != static_cast<std::size_t>(N)) {
    throw std::invalid_argument("QpProblem: leader_x must have N entries");
  }
  if (max_gap && !(slack_weight > 0.0)) throw std::invalid_argument("QpProblem: slack_weight must be positive");
}

ConstraintSet build_constraints(const QpProblem& p) {
  const int N = p.N;
  const bool leader = !p.leader_x.empty();
  const bool soft = leader && p.max_gap;
  const int nv = N + 1;  // last column is the slack, zero when unused
  int rows = 2 * N + 2 * N + (leader ? N : 0) + (soft ? N + 1 : 0);
  ConstraintSet cs;
  cs.G = Eigen::MatrixXd::Zero(rows, nv);
  cs.h = Eigen::VectorXd::Zero(rows);
  const double dt = p.dt;
  int r = 0;
  auto add = [&](int kind) {
    cs.kind.push_back(kind);
    return r++;
  };
  for (int i = 1; i <= N; ++i) {
    // v_i = v0 + dt sum_{j<i} u_j;  x_i = x0 + i dt v0 + sum_{j<i} dt^2 (i - j - 1/2) u_j
    int row = add(kSpeedMin);
    for (int j = 0; j < i; ++j) cs.G(row, j) = dt;
    cs.h(row) = -p.v0;
    row = add(kSpeedMax);
    for (int j = 0; j < i; ++j) cs.G(row, j) = -dt;
    cs.h(row) = p.v0 - p.v_limit;
    if (leader) {
      const double free_x = p.x0 + i * dt * p.v0;
      row = add(kMinGap);
      for (int j = 0; j < i; ++j) cs.G(row, j) = -(dt * dt * (i - j - 0.5)) - p.h_min * dt;
      cs.h(row) = p.s_min + p.length + free_x + p.h_min * p.v0 - p.leader_x[static_cast<std::size_t>(i - 1)];
      if (soft) {
        row = add(kMaxGap);
        for (int j = 0; j < i; ++j) cs.G(row, j) = dt * dt * (i - j - 0.5) + p.h_max * dt;
        cs.G(row, N) = 1.0;
        cs.h(row) = p.leader_x[static_cast<std::size_t>(i - 1)] - p.length - free_x - p.d_max - p.h_max * p.v0;
      }
    }
  }
  for (int j = 0; j < N; ++j) {
    int row = add(kAccelMin);
    cs.G(row, j) = 1.0;
    cs.h(row) = p.a_min;
    row = add(kAccelMax);
    cs.G(row, j) = -1.0;
    cs.h(row) = -p.a_max;
  }
  if (soft) {
    const int row = add(kSlack);
    cs.G(row, N) = 1.0;
    cs.h(row) = 0.0;
  }
  cs.G.conservativeResize(r, nv);
  cs.h.conservativeResize(r);
  return cs;
}

std::vector<double> rollout_speeds(const QpProblem& p, const std::vector<double>& u) {
  std::vector<double> v(u.size());
  double cur = p.v0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cur += u[i] * p.dt;
    v[i] = cur;
  }
  return v;
}

std::vector<double> rollout_positions(const QpProblem& p, const std::vector<double>& u) {
  std::vector<double> x(u.size());
  double cx = p.x0, cv = p.v0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cx += cv * p.dt + 0.5 * u[i] * p.dt * p.dt;
    cv += u[i] * p.dt;
    x[i] = cx;
  }
  return x;
}

QpSolution mpc_solve(const QpProblem& p) {
  p.validate();
  const ConstraintSet cs = build_constraints(p);
  const int N = p.N;
  const bool soft = !p.leader_x.empty() && p.max_gap;
  // Substitute z_j = sqrt(dt) u_j and z_N = sqrt(rho) s so the objective is ||z||^2.
  Eigen::VectorXd scale = Eigen::VectorXd::Constant(N + 1, 1.0 / std::sqrt(p.dt));
  scale(N) = soft ? 1.0 / std::sqrt(p.slack_weight) : 0.0;
  Eigen::MatrixXd G = cs.G * scale.asDiagonal();
  Eigen::VectorXd h = cs.h;
  if (!soft) G.conservativeResize(G.rows(), N);

  QpSolution sol;
  const auto z = least_distance(G, h);
  if (!z) return sol;
  sol.u.resize(static_cast<std::size_t>(N));
  for (int j = 0; j < N; ++j) sol.u[static_cast<std::size_t>(j)] = (*z)(j) * scale(j);
  sol.slack = soft ? std::max(0.0, (*z)(N) * scale(N)) : 0.0;

  Eigen::VectorXd full(N + 1);
  for (int j = 0; j < N; ++j) full(j) = sol.u[static_cast<std::size_t>(j)];
  full(N) = sol.slack;
  const Eigen::VectorXd lhs = cs.G * full - cs.h;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < lhs.size(); ++i) {
    if (cs.kind[static_cast<std::size_t>(i)] == kMaxGap || cs.kind[static_cast<std::size_t>(i)] == kSlack) continue;
    worst = std::max(worst, -lhs(i));
  }
  sol.max_violation = worst;
  sol.feasible = worst <= 1e-6;
  double obj = 0.0;
  for (double u : sol.u) obj += u * u * p.dt;
  sol.objective = obj + (soft ? p.slack_weight * sol.slack * sol.slack : 0.0);
  return sol;
}

std::vector<double> leader_predict(double x_l, double v_l, double a_l,
                                   const std::function<double(double)>& target_speed, int N, double dt,
                                   double short_horizon, double long_horizon) {
  if (N < 1 || !(dt > 0.0)) throw std::invalid_argument("leader_predict: bad horizon");
  if (!(long_horizon >= short_horizon)) throw std::invalid_argument("leader_predict: long < short horizon");
  std::vector<double> out(static_cast<std::size_t>(N));
  // Long-term path: integrate dx/dt = target(x) with midpoint substeps.
  const int sub = 10;
  const double h = dt / sub;
  double xl = x_l;
  for (int i = 1; i <= N; ++i) {
    if (target_speed) {
      for (int s = 0; s < sub; ++s) {
        const double k1 = std::max(0.0, target_speed(xl));
        const double k2 = std::max(0.0, target_speed(xl + 0.5 * h * k1));
        xl += h * k2;
      }
    } else {
      xl = x_l + v_l * i * dt;
    }
    const double t = i * dt;
    double xs;
    if (a_l < 0.0 && v_l + a_l * t < 0.0) {
      xs = x_l + v_l * v_l / (-2.0 * a_l);
    } else {
      xs = x_l + v_l * t + 0.5 * a_l * t * t;
    }
    double w = 0.0;
    if (t >= long_horizon) {
      w = 1.0;
    } else if (t > short_horizon) {
      w = (t - short_horizon) / (long_horizon - short_horizon);
    }
    out[static_cast<std::size_t>(i - 1)] = (1.0 - w) * xs + w * xl;
  }
  return out;
}

MpcController::MpcController(MpcConfig cfg, accel::BaseControllerConfig fallback)
    : cfg_(cfg), fallback_(fallback, accel::LcConfig{}, false) {}

MpcTrace MpcController::step(double x, double v, std::optional<double> gap, double v_lead, double a_lead,
                             const std::function<double(double)>& target_speed, double dt) {
  MpcTrace tr;
  const bool leader = gap && *gap <= cfg_.sensor_range;
  tr.leader = leader;
  accel::LocalObservation obs;
  obs.v = v;
  obs.minicar = leader;
  if (leader) {
    obs.h = *gap;
    obs.v_lead = v_lead;
    obs.a_lead = a_lead;
  }
  std::optional<double> plan;
  if (target_speed) plan = target_speed(x);
  // Keeps the fallback's internal filters warm on every tick.
  const accel::AccelTrace fb = fallback_.step(obs, plan, dt);
  if (!leader) {
    // Nothing to constrain against; the speed-tracking law stands in.
    tr.u = fb.u;
    tr.fallback = true;
    return tr;
  }
  QpProblem p;
  p.N = cfg_.N;
  p.dt = cfg_.dt;
  p.x0 = x;
  p.v0 = v;
  p.v_limit = cfg_.v_limit;
  p.a_min = cfg_.a_min;
  p.a_max = cfg_.a_max;
  p.s_min = cfg_.s_min;
  p.h_min = cfg_.h_min;
  p.d_max = cfg_.d_max;
  p.h_max = cfg_.h_max;
  p.slack_weight = cfg_.slack_weight;
  p.length = cfg_.length;
  const double x_lead = x + *gap + cfg_.length;
  p.leader_x = leader_predict(x_lead, v_lead, a_lead, target_speed, p.N, p.dt);
  const QpSolution sol = mpc_solve(p);
  if (!sol.feasible) {
    tr.feasible = false;
    tr.fallback = true;
    tr.u = fb.u;
    return tr;
  }
  tr.u = std::clamp(sol.u.front(), cfg_.a_min, cfg_.a_max);
  tr.slack = sol.slack;
  return tr;
}

}  // namespace wavectl::mpc
