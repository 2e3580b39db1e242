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

// Gripper-tool pivoting dynamics: an under-actuated two-link planar arm where
// the first link (gripper) is acceleration-controlled and the second link
// (tool) rotates about the pivot between the fingers, resisted by viscous,
// Coulomb and static friction with a Karnopp stick neighbourhood.

#ifndef PIVOT_DYNAMICS_HPP_
#define PIVOT_DYNAMICS_HPP_

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace pivot {

/// Thrown when a parameter set or state violates its invariants.
class InvariantError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw InvariantError(what);
}

inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

/// Closed interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const { return x >= lo && x <= hi; }
  double clamp(double x) const { return std::clamp(x, lo, hi); }
  double width() const { return hi - lo; }
};

/// Rigid tool held between the fingers.
struct ToolParams {
  double inertia = 6.943e-5;               // kg m^2, about the centre of mass
  double mass = 0.026;                     // kg
  double com_distance = 0.089;             // m, pivot to centre of mass
  double rest_finger_distance = 0.0188;    // m, finger gap with zero deformation

  /// Rotational inertia of the tool about the pivot, I + m r^2.
  double pivot_inertia() const { return inertia + mass * com_distance * com_distance; }

  void validate() const {
    detail::require(std::isfinite(inertia) && inertia > 0.0, "tool.inertia must be finite and > 0");
    detail::require(std::isfinite(mass) && mass > 0.0, "tool.mass must be finite and > 0");
    detail::require(std::isfinite(com_distance) && com_distance > 0.0,
                    "tool.com_distance must be finite and > 0");
    detail::require(std::isfinite(rest_finger_distance) && rest_finger_distance > 0.0,
                    "tool.rest_finger_distance must be finite and > 0");
  }
};

/// Friction at the pivot. Normal force only enters through the stiffness
/// composites, so the fingertip stiffness k never appears on its own.
struct FrictionParams {
  double viscous = 0.066;             // N m s/rad
  double coulomb_stiffness = 9.906;   // N, k * mu_c
  double static_stiffness = 9.906;    // N, k * gamma
  double stiction_eps = 1e-3;         // rad/s, Karnopp neighbourhood half-width

  /// Scales both stiffness composites; viscous drag is untouched.
  FrictionParams with_stiffness_multiplier(double factor) const {
    FrictionParams out = *this;
    out.coulomb_stiffness *= factor;
    out.static_stiffness *= factor;
    return out;
  }

  void validate() const {
    detail::require(std::isfinite(viscous) && viscous >= 0.0, "friction.viscous must be >= 0");
    detail::require(std::isfinite(coulomb_stiffness) && coulomb_stiffness >= 0.0,
                    "friction.coulomb_stiffness must be >= 0");
    detail::require(std::isfinite(static_stiffness) && static_stiffness >= coulomb_stiffness,
                    "friction.static_stiffness must be >= friction.coulomb_stiffness");
    detail::require(std::isfinite(stiction_eps) && stiction_eps > 0.0,
                    "friction.stiction_eps must be > 0");
  }
};

/// Actuated link and actuator limits.
struct ArmParams {
  double link_length = 0.35;   // m, joint to pivot
  double gravity = 0.0;        // m/s^2, in-plane component
  double accel_limit = 20.0;   // rad/s^2
  Interval grp_angle_range{-std::numbers::pi, std::numbers::pi};
  double finger_min = 0.0088;  // m
  double finger_slew = 0.04;   // m/s

  void validate(const ToolParams& tool) const {
    detail::require(std::isfinite(link_length) && link_length > 0.0, "arm.link_length must be > 0");
    detail::require(gravity >= 0.0 && gravity <= 9.81, "arm.gravity must lie in [0, 9.81]");
    detail::require(std::isfinite(accel_limit) && accel_limit > 0.0, "arm.accel_limit must be > 0");
    detail::require(grp_angle_range.lo < grp_angle_range.hi, "arm.grp_angle_range must be non-empty");
    detail::require(finger_min >= 0.0 && finger_min < tool.rest_finger_distance,
                    "arm.finger_min must lie in [0, tool.rest_finger_distance)");
    detail::require(std::isfinite(finger_slew) && finger_slew > 0.0, "arm.finger_slew must be > 0");
  }
};

/// Continuous physical state of the gripper-tool system.
struct SimState {
  double grp_angle = 0.0;    // rad
  double grp_vel = 0.0;      // rad/s
  double tool_angle = 0.0;   // rad, relative to the gripper
  double tool_vel = 0.0;     // rad/s, relative to the gripper
  double finger_dist = 0.0;  // m

  bool finite() const {
    return std::isfinite(grp_angle) && std::isfinite(grp_vel) && std::isfinite(tool_angle) &&
           std::isfinite(tool_vel) && std::isfinite(finger_dist);
  }

  bool operator==(const SimState&) const = default;
};

enum class FingerMode { kTargetDistance, kRate };

/// Physical command for one control interval.
struct ControlInput {
  double grp_accel = 0.0;   // rad/s^2
  double finger_cmd = 0.0;  // m in kTargetDistance mode, [-1, 1] in kRate mode
  FingerMode mode = FingerMode::kTargetDistance;
};

/// Bundle of everything the integrator needs besides the state.
struct PhysicsParams {
  ToolParams tool;
  FrictionParams friction;
  ArmParams arm;

  void validate() const {
    tool.validate();
    friction.validate();
    arm.validate(tool);
  }
};

/// Friction evaluation result.
struct FrictionResult {
  double torque = 0.0;
  bool stick = false;
};

/// Tool-acceleration evaluation result.
struct ToolAccelResult {
  double accel = 0.0;
  bool stick = false;
};

/// Fingertip deformation d0 - d_fing. The normal force is proportional to it.
inline double deformation(const ToolParams& tool, double finger_dist) {
  constexpr double kTolerance = 1e-12;
  if (finger_dist > tool.rest_finger_distance + kTolerance) {
    throw InvariantError("finger_dist " + std::to_string(finger_dist) +
                         " exceeds tool rest distance " +
                         std::to_string(tool.rest_finger_distance));
  }
  return std::max(0.0, tool.rest_finger_distance - finger_dist);
}

/// Every torque on the tool except friction, moved to the right-hand side:
///   -(I + m r^2 + m l r cos(tl)) a_grp - m l r sin(tl) w_grp^2 - m g r cos(grp + tl).
/// Friction has to supply exactly -net for the tool to stay at rest.
inline double net_tool_torque(const SimState& s, double grp_accel, const ToolParams& tool,
                              const ArmParams& arm) {
  const double mlr = tool.mass * arm.link_length * tool.com_distance;
  const double coupled_inertia = tool.pivot_inertia() + mlr * std::cos(s.tool_angle);
  double tau = -coupled_inertia * grp_accel - mlr * std::sin(s.tool_angle) * s.grp_vel * s.grp_vel;
  if (arm.gravity != 0.0) {
    tau -= tool.mass * arm.gravity * tool.com_distance * std::cos(s.grp_angle + s.tool_angle);
  }
  if (!std::isfinite(tau)) throw InvariantError("net tool torque is not finite");
  return tau;
}

/// Pivot friction torque with the Karnopp stick neighbourhood.
///
/// Inside |tool_vel| <= eps, if the net torque is within the static limit the
/// friction cancels it exactly (torque == -tau_net) and the tool sticks.
/// Otherwise viscous + Coulomb friction opposes the motion; at breakaway the
/// Coulomb term opposes the impending motion, whose sign is sgn(tau_net).
inline FrictionResult friction_torque(const SimState& s, double tau_net, const ToolParams& tool,
                                      const FrictionParams& fric) {
  const double def = deformation(tool, s.finger_dist);
  const bool near_rest = std::abs(s.tool_vel) <= fric.stiction_eps;
  if (near_rest && std::abs(tau_net) <= fric.static_stiffness * def) {
    return {-tau_net, true};
  }
  const double direction = near_rest ? detail::sign(tau_net) : detail::sign(s.tool_vel);
  const double torque = -fric.viscous * s.tool_vel - fric.coulomb_stiffness * def * direction;
  return {torque, false};
}

/// Tool angular acceleration relative to the gripper; exactly zero when stuck.
inline ToolAccelResult tool_accel(const SimState& s, double grp_accel, const ToolParams& tool,
                                  const ArmParams& arm, const FrictionParams& fric) {
  const double tau_net = net_tool_torque(s, grp_accel, tool, arm);
  const FrictionResult f = friction_torque(s, tau_net, tool, fric);
  if (f.stick) return {0.0, true};
  return {(f.torque + tau_net) / tool.pivot_inertia(), false};
}

/// Finger target implied by a command, clamped to the reachable gap.
inline double finger_target(const ControlInput& u, double current, double dt,
                            const ToolParams& tool, const ArmParams& arm) {
  const Interval gap{arm.finger_min, tool.rest_finger_distance};
  if (u.mode == FingerMode::kRate) {
    return gap.clamp(current + std::clamp(u.finger_cmd, -1.0, 1.0) * arm.finger_slew * dt);
  }
  return gap.clamp(u.finger_cmd);
}

/// Result of one integrator step.
struct StepOutcome {
  SimState state;
  bool stick = false;
};

/// Advances the system by dt with a semi-implicit Euler step.
///
/// Gripper velocity is updated from the clamped acceleration and the angle from
/// the new velocity. The tool uses the same ordering, but the viscous term is
/// taken at the end-of-step velocity so that drag time constants shorter than
/// dt stay stable. Kinetic Coulomb friction cannot reverse the tool on its own:
/// a velocity that would change sign within the step is set to zero and the
/// stick test is applied at the next step.
inline StepOutcome integrate_step(const SimState& s, const ControlInput& u, double dt,
                                  const PhysicsParams& p) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw InvariantError("integration step dt must be > 0, got " + std::to_string(dt));
  }
  double accel = std::clamp(u.grp_accel, -p.arm.accel_limit, p.arm.accel_limit);
  // An arm resting against a joint limit cannot accelerate further into it.
  if ((s.grp_angle <= p.arm.grp_angle_range.lo && s.grp_vel <= 0.0 && accel < 0.0) ||
      (s.grp_angle >= p.arm.grp_angle_range.hi && s.grp_vel >= 0.0 && accel > 0.0)) {
    accel = 0.0;
  }
  const double tau_net = net_tool_torque(s, accel, p.tool, p.arm);
  const FrictionResult f = friction_torque(s, tau_net, p.tool, p.friction);

  SimState next = s;

  next.grp_vel = s.grp_vel + accel * dt;
  next.grp_angle = s.grp_angle + next.grp_vel * dt;
  if (next.grp_angle <= p.arm.grp_angle_range.lo || next.grp_angle >= p.arm.grp_angle_range.hi) {
    next.grp_angle = p.arm.grp_angle_range.clamp(next.grp_angle);
    next.grp_vel = 0.0;
  }

  if (f.stick) {
    next.tool_vel = 0.0;
  } else {
    const double inertia = p.tool.pivot_inertia();
    const double direction =
        std::abs(s.tool_vel) <= p.friction.stiction_eps ? detail::sign(tau_net)
                                                        : detail::sign(s.tool_vel);
    const double coulomb =
        -p.friction.coulomb_stiffness * deformation(p.tool, s.finger_dist) * direction;
    const double v = (s.tool_vel + dt * (tau_net + coulomb) / inertia) /
                     (1.0 + dt * p.friction.viscous / inertia);
    // Coulomb friction stops the tool but does not drive it backwards.
    next.tool_vel = (direction != 0.0 && v * direction < 0.0) ? 0.0 : v;
    next.tool_angle = s.tool_angle + next.tool_vel * dt;
  }

  const double target = finger_target(u, s.finger_dist, dt, p.tool, p.arm);
  const double max_move = p.arm.finger_slew * dt;
  next.finger_dist = s.finger_dist + std::clamp(target - s.finger_dist, -max_move, max_move);
  next.finger_dist = std::clamp(next.finger_dist, p.arm.finger_min, p.tool.rest_finger_distance);

  if (!next.finite()) throw InvariantError("integration produced a non-finite state");
  return {next, f.stick};
}

}  // namespace pivot

#endif  // PIVOT_DYNAMICS_HPP_
