// Copyright 2026 The Pivot Authors
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

// Randomized property suites shared by the unit tests and the acceptance
// binary. Each suite returns a summary instead of asserting so the caller can
// decide how to report it.

#ifndef PIVOT_TESTS_CHECKS_HPP_
#define PIVOT_TESTS_CHECKS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "pivot/dynamics.hpp"
#include "pivot/policy.hpp"
#include "test_util.hpp"

namespace pivot::testing {

struct CheckSummary {
  int cases = 0;
  int failures = 0;
  double worst = 0.0;  // worst observed error measure, suite specific
  std::string first_failure;

  bool passed() const { return cases > 0 && failures == 0; }

  void fail(const std::string& what) {
    if (failures++ == 0) first_failure = what;
  }
  void record(bool ok, const std::string& what) {
    ++cases;
    if (!ok) fail(what);
  }
  void merge(const CheckSummary& o) {
    if (failures == 0 && o.failures > 0) first_failure = o.first_failure;
    cases += o.cases;
    failures += o.failures;
    worst = std::max(worst, o.worst);
  }
};

// ---------------------------------------------------------------------------
// Dynamics properties.

namespace detail {

inline double Uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline PhysicsParams RandomPhysics(std::mt19937_64& rng) {
  PhysicsParams p;
  p.tool.inertia = Uniform(rng, 2e-5, 2e-4);
  p.tool.mass = Uniform(rng, 0.01, 0.1);
  p.tool.com_distance = Uniform(rng, 0.03, 0.15);
  p.tool.rest_finger_distance = Uniform(rng, 0.012, 0.025);
  p.friction.viscous = Uniform(rng, 0.0, 0.1);
  p.friction.coulomb_stiffness = Uniform(rng, 0.0, 20.0);
  p.friction.static_stiffness = p.friction.coulomb_stiffness * Uniform(rng, 1.0, 1.5);
  p.friction.stiction_eps = Uniform(rng, 1e-4, 1e-2);
  p.arm.finger_min = p.tool.rest_finger_distance * Uniform(rng, 0.2, 0.6);
  return p;
}

inline SimState RandomState(std::mt19937_64& rng, const PhysicsParams& p) {
  SimState s;
  s.grp_angle = Uniform(rng, -2.5, 2.5);
  s.grp_vel = Uniform(rng, -3.0, 3.0);
  s.tool_angle = Uniform(rng, -3.0, 3.0);
  s.tool_vel = Uniform(rng, -2.0, 2.0);
  s.finger_dist = Uniform(rng, p.arm.finger_min, p.tool.rest_finger_distance);
  return s;
}

inline double MirrorError(double a, double b) {
  // a should equal -b.
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a + b) / scale;
}

}  // namespace detail

/// Karnopp exactness: inside the stick neighbourhood with |tau_net| within the
/// static limit, friction is exactly -tau_net, acceleration is exactly zero
/// and an integrator step leaves the tool angle untouched.
inline CheckSummary CheckStictionExactness(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  CheckSummary out;
  while (out.cases < n) {
    const PhysicsParams p = detail::RandomPhysics(rng);
    SimState s = detail::RandomState(rng, p);
    s.tool_vel = detail::Uniform(rng, -p.friction.stiction_eps, p.friction.stiction_eps);
    const double limit = p.friction.static_stiffness * deformation(p.tool, s.finger_dist);
    const double accel = detail::Uniform(rng, -p.arm.accel_limit, p.arm.accel_limit);
    const double tau = net_tool_torque(s, accel, p.tool, p.arm);
    if (std::abs(tau) > limit) continue;
    const FrictionResult f = friction_torque(s, tau, p.tool, p.friction);
    const ToolAccelResult a = tool_accel(s, accel, p.tool, p.arm, p.friction);
    const StepOutcome step = integrate_step(s, {accel, s.finger_dist, FingerMode::kTargetDistance}, 0.01, p);
    const bool ok = f.stick && f.torque == -tau && f.torque + tau == 0.0 && a.stick && a.accel == 0.0 &&
                    step.stick && step.state.tool_angle == s.tool_angle && step.state.tool_vel == 0.0;
    out.record(ok, "stick case " + std::to_string(out.cases) + " tau=" + std::to_string(tau));
  }
  return out;
}

/// Breakaway threshold: from rest, the tool moves after one step iff
/// |tau_net| exceeds static_stiffness * deformation.
inline CheckSummary CheckBreakawayThreshold(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  CheckSummary out;
  // Torque factors relative to the threshold, concentrated around 1.
  const std::vector<double> fixed = {0.0, 0.5, 0.9, 0.999, 0.999999, 1.000001, 1.001, 1.1, 2.0};
  while (out.cases < n) {
    const PhysicsParams p = detail::RandomPhysics(rng);
    SimState s = detail::RandomState(rng, p);
    s.tool_vel = 0.0;
    s.finger_dist = detail::Uniform(rng, p.tool.rest_finger_distance - 1e-3, p.tool.rest_finger_distance - 1e-5);
    const double limit = p.friction.static_stiffness * deformation(p.tool, s.finger_dist);
    const double mlr = p.tool.mass * p.arm.link_length * p.tool.com_distance;
    const double coupled = p.tool.pivot_inertia() + mlr * std::cos(s.tool_angle);
    const double centripetal = mlr * std::sin(s.tool_angle) * s.grp_vel * s.grp_vel;
    const std::size_t k = static_cast<std::size_t>(out.cases) % (fixed.size() + 1);
    const double factor = k < fixed.size() ? fixed[k] : detail::Uniform(rng, 0.0, 2.0);
    const double sign = detail::Uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
    const double accel = -(sign * factor * limit + centripetal) / coupled;
    if (std::abs(accel) > p.arm.accel_limit) continue;
    const double tau = net_tool_torque(s, accel, p.tool, p.arm);
    const StepOutcome step = integrate_step(s, {accel, s.finger_dist, FingerMode::kTargetDistance}, 0.01, p);
    const bool should_move = std::abs(tau) > limit;
    const bool moved = step.state.tool_vel != 0.0;
    const bool direction_ok = !moved || step.state.tool_vel * tau > 0.0;
    out.record(moved == should_move && step.stick == !should_move && direction_ok,
               "breakaway factor " + std::to_string(factor) + " tau/limit=" + std::to_string(tau / limit));
  }
  return out;
}

/// Kinetic friction never injects energy: tau_f * tool_vel <= 0 outside the
/// stick neighbourhood, and Coulomb friction alone never reverses the tool.
inline CheckSummary CheckDissipation(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  CheckSummary out;
  while (out.cases < n) {
    const PhysicsParams p = detail::RandomPhysics(rng);
    SimState s = detail::RandomState(rng, p);
    if (std::abs(s.tool_vel) <= p.friction.stiction_eps) continue;
    const double tau = detail::Uniform(rng, -0.5, 0.5);
    const FrictionResult f = friction_torque(s, tau, p.tool, p.friction);
    bool ok = !f.stick && f.torque * s.tool_vel <= 0.0;
    // Pure friction deceleration: no drive torque, arm at rest.
    SimState coast = s;
    coast.grp_vel = 0.0;
    const SimState next = integrate_step(coast, {0.0, s.finger_dist, FingerMode::kTargetDistance}, 0.05, p).state;
    ok = ok && next.tool_vel * s.tool_vel >= 0.0 && std::abs(next.tool_vel) <= std::abs(s.tool_vel);
    out.record(ok, "dissipation v=" + std::to_string(s.tool_vel));
  }
  return out;
}

/// With g = 0, negating the odd coordinates and the arm command mirrors the
/// whole trajectory.
inline CheckSummary CheckMirrorSymmetry(int n, std::uint64_t seed, int steps = 25) {
  std::mt19937_64 rng(seed);
  CheckSummary out;
  for (int c = 0; c < n; ++c) {
    PhysicsParams p = detail::RandomPhysics(rng);
    p.arm.gravity = 0.0;
    SimState a = detail::RandomState(rng, p);
    if (c % 3 == 0) a.tool_vel = 0.0;  // exercise the stick branch too
    SimState b{-a.grp_angle, -a.grp_vel, -a.tool_angle, -a.tool_vel, a.finger_dist};
    double worst = 0.0;
    bool ok = true;
    for (int k = 0; k < steps && ok; ++k) {
      const double accel = detail::Uniform(rng, -1.2, 1.2) * p.arm.accel_limit;
      const double finger = detail::Uniform(rng, p.arm.finger_min, p.tool.rest_finger_distance);
      const StepOutcome sa = integrate_step(a, {accel, finger, FingerMode::kTargetDistance}, 0.01, p);
      const StepOutcome sb = integrate_step(b, {-accel, finger, FingerMode::kTargetDistance}, 0.01, p);
      a = sa.state;
      b = sb.state;
      for (double e : {detail::MirrorError(a.grp_angle, b.grp_angle), detail::MirrorError(a.grp_vel, b.grp_vel),
                       detail::MirrorError(a.tool_angle, b.tool_angle),
                       detail::MirrorError(a.tool_vel, b.tool_vel)}) {
        worst = std::max(worst, e);
      }
      ok = worst <= 1e-12 && a.finger_dist == b.finger_dist && sa.stick == sb.stick;
    }
    out.worst = std::max(out.worst, worst);
    out.record(ok, "mirror case " + std::to_string(c) + " worst rel err " + std::to_string(worst));
  }
  return out;
}

/// With the fingers at the rest distance the normal force is zero: no
/// Coulomb or static term, only viscous drag.
inline CheckSummary CheckZeroNormalForce(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  CheckSummary out;
  for (int c = 0; c < n; ++c) {
    const PhysicsParams p = detail::RandomPhysics(rng);
    SimState s = detail::RandomState(rng, p);
    s.finger_dist = p.tool.rest_finger_distance;
    if (c % 2 == 0) s.tool_vel = detail::Uniform(rng, -p.friction.stiction_eps, p.friction.stiction_eps);
    double tau = detail::Uniform(rng, -0.1, 0.1);
    if (tau == 0.0) tau = 1e-3;
    const FrictionResult f = friction_torque(s, tau, p.tool, p.friction);
    out.record(!f.stick && f.torque == -p.friction.viscous * s.tool_vel,
               "zero-normal case " + std::to_string(c));
  }
  return out;
}

/// For a fixed kinetic state, closing the fingers never reduces |tau_f|.
inline CheckSummary CheckMonotoneGrip(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  CheckSummary out;
  for (int c = 0; c < n; ++c) {
    const PhysicsParams p = detail::RandomPhysics(rng);
    SimState s = detail::RandomState(rng, p);
    if (std::abs(s.tool_vel) <= p.friction.stiction_eps) s.tool_vel = 2.0 * p.friction.stiction_eps;
    const double tau = detail::Uniform(rng, -0.5, 0.5);
    double prev = -1.0;
    bool ok = true;
    for (int k = 0; k <= 20; ++k) {
      s.finger_dist = p.tool.rest_finger_distance -
                      (p.tool.rest_finger_distance - p.arm.finger_min) * static_cast<double>(k) / 20.0;
      const double mag = std::abs(friction_torque(s, tau, p.tool, p.friction).torque);
      ok = ok && mag >= prev;
      prev = mag;
    }
    out.record(ok, "monotone grip case " + std::to_string(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Integrator order.

struct OrderReport {
  std::vector<double> dts;
  std::vector<double> grp_errors;
  std::vector<double> tool_errors;
  double min_grp_order = 0.0;
  double min_tool_order = 0.0;
  double max_grp_constant = 0.0;  // max err / dt
};

namespace detail {

/// Frictionless tool angle and velocity under constant arm acceleration,
/// integrated with classical RK4 from rest. Used as the reference solution.
inline std::pair<double, double> Rk4ToolReference(const PhysicsParams& p, double a, double horizon,
                                                  int steps) {
  const double mlr = p.tool.mass * p.arm.link_length * p.tool.com_distance;
  const double j = p.tool.pivot_inertia();
  // State y = (grp_vel, tool_angle, tool_vel); grp_vel = a t exactly.
  const auto f = [&](double t, double phi, double w) {
    const double omega = a * t;
    const double acc = (-(j + mlr * std::cos(phi)) * a - mlr * std::sin(phi) * omega * omega) / j;
    return std::pair<double, double>{w, acc};
  };
  const double h = horizon / steps;
  double phi = 0.0;
  double w = 0.0;
  for (int i = 0; i < steps; ++i) {
    const double t = i * h;
    const auto [k1p, k1w] = f(t, phi, w);
    const auto [k2p, k2w] = f(t + h / 2, phi + h / 2 * k1p, w + h / 2 * k1w);
    const auto [k3p, k3w] = f(t + h / 2, phi + h / 2 * k2p, w + h / 2 * k2w);
    const auto [k4p, k4w] = f(t + h, phi + h * k3p, w + h * k3w);
    phi += h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p);
    w += h / 6 * (k1w + 2 * k2w + 2 * k3w + k4w);
  }
  return {phi, w};
}

}  // namespace detail

/// Frictionless constant-acceleration run over a 1 s horizon at dt, dt/2,
/// dt/4, ... Arm angle is compared with 0.5 a T^2; tool angle with an RK4
/// reference at a much finer step.
inline OrderReport MeasureIntegratorOrder(double a = 2.0, double dt0 = 0.02, int levels = 5) {
  PhysicsParams p;
  p.friction = {0.0, 0.0, 0.0, 1e-3};
  const double horizon = 1.0;
  const double grp_exact = 0.5 * a * horizon * horizon;
  const double tool_exact = detail::Rk4ToolReference(p, a, horizon, 20000).first;
  OrderReport r;
  double dt = dt0;
  for (int level = 0; level < levels; ++level, dt *= 0.5) {
    const int n = static_cast<int>(std::lround(horizon / dt));
    SimState s{0.0, 0.0, 0.0, 0.0, p.tool.rest_finger_distance};
    for (int i = 0; i < n; ++i) {
      s = integrate_step(s, {a, p.tool.rest_finger_distance, FingerMode::kTargetDistance}, dt, p).state;
    }
    r.dts.push_back(dt);
    r.grp_errors.push_back(std::abs(s.grp_angle - grp_exact));
    r.tool_errors.push_back(std::abs(s.tool_angle - tool_exact));
    r.max_grp_constant = std::max(r.max_grp_constant, r.grp_errors.back() / dt);
  }
  r.min_grp_order = r.min_tool_order = 1e300;
  for (std::size_t i = 1; i < r.dts.size(); ++i) {
    r.min_grp_order = std::min(r.min_grp_order, std::log2(r.grp_errors[i - 1] / r.grp_errors[i]));
    r.min_tool_order = std::min(r.min_tool_order, std::log2(r.tool_errors[i - 1] / r.tool_errors[i]));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Gradient checks.

struct GradientReport {
  int networks = 0;
  double worst_surrogate = 0.0;
  double worst_kl = 0.0;
  double worst_mse = 0.0;
  double worst_fvp = 0.0;
};

namespace detail {

inline MlpSpec RandomSpec(std::mt19937_64& rng, int in, int out) {
  std::uniform_int_distribution<int> width(2, 5);
  std::uniform_int_distribution<int> depth(1, 2);
  MlpSpec spec{{in}};
  const int hidden = depth(rng);
  for (int k = 0; k < hidden; ++k) spec.layer_sizes.push_back(width(rng));
  spec.layer_sizes.push_back(out);
  return spec;
}

inline GaussianPolicy RandomPolicy(const MlpSpec& spec, std::mt19937_64& rng) {
  GaussianPolicy pol(Mlp(spec), Vector::Zero(spec.output_dim()));
  Vector theta = RandomVector(pol.num_params(), rng, 0.5);
  theta.tail(spec.output_dim()) = RandomVector(spec.output_dim(), rng, 0.3);
  pol.unflatten(theta);
  return pol;
}

}  // namespace detail

/// Central differences (h = 1e-6) against the analytic gradients of the
/// surrogate, mean KL and baseline MSE, plus the FVP against directional
/// differences of the KL gradient at theta = theta_old.
inline GradientReport CheckGradients(int networks, std::uint64_t seed, double h = 1e-6) {
  std::mt19937_64 rng(seed);
  GradientReport rep;
  std::uniform_int_distribution<int> in_dim(2, 5);
  std::uniform_int_distribution<int> act_dim(1, 3);
  for (int k = 0; k < networks; ++k) {
    const int in = in_dim(rng);
    const int out = act_dim(rng);
    const int batch = 7;
    const MlpSpec spec = detail::RandomSpec(rng, in, out);
    const GaussianPolicy pol = detail::RandomPolicy(spec, rng);
    const GaussianPolicy old = detail::RandomPolicy(spec, rng);
    const Matrix x = RandomMatrix(in, batch, rng);
    const Matrix acts = RandomMatrix(out, batch, rng);
    const Vector lp_old = log_prob_batch(old, x, acts);
    const Vector adv = RandomVector(batch, rng);
    const Vector theta = pol.flatten();

    const SurrogateLoss sl{x, acts, lp_old, adv};
    const Vector g_sur = grad(pol, sl);
    const Vector fd_sur = FdGradient(
        [&](const Vector& t) { return value_and_grad(pol.with_params(t), sl).value; }, theta, h);
    rep.worst_surrogate = std::max(rep.worst_surrogate, RelErr(g_sur, fd_sur));

    const KlLoss kl{old, x};
    const Vector g_kl = grad(pol, kl);
    const Vector fd_kl =
        FdGradient([&](const Vector& t) { return kl_mean(old, pol.with_params(t), x); }, theta, h);
    rep.worst_kl = std::max(rep.worst_kl, RelErr(g_kl, fd_kl));

    MlpSpec vspec = spec;
    vspec.layer_sizes.back() = 1;
    const Mlp base = Mlp(vspec).with_params(RandomVector(vspec.num_params(), rng, 0.5));
    const Vector targets = RandomVector(batch, rng);
    const MseLoss mse{x, targets};
    const Vector g_mse = grad(base, mse);
    const Vector fd_mse = FdGradient(
        [&](const Vector& t) { return value_and_grad(base.with_params(t), mse).value; }, base.flatten(), h);
    rep.worst_mse = std::max(rep.worst_mse, RelErr(g_mse, fd_mse));

    // FVP at theta_old: directional difference of grad KL(old || .) along v.
    const Vector v = RandomVector(old.num_params(), rng);
    const Vector theta_old = old.flatten();
    const double eps = 1e-5;
    const KlLoss at_old{old, x};
    const Vector gp = grad(old.with_params(theta_old + eps * v), at_old);
    const Vector gm = grad(old.with_params(theta_old - eps * v), at_old);
    const Vector fd_fvp = (gp - gm) / (2.0 * eps);
    rep.worst_fvp = std::max(rep.worst_fvp, RelErr(fisher_vector_product(old, x, v, 0.0), fd_fvp));
    ++rep.networks;
  }
  return rep;
}

}  // namespace pivot::testing

#endif  // PIVOT_TESTS_CHECKS_HPP_
