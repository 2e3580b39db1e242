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

// Episodic pivoting task on top of the dynamics: reset / step, reward, goal
// detection, per-episode friction noise and per-step actuation delays.

#ifndef PIVOT_ENVIRONMENT_HPP_
#define PIVOT_ENVIRONMENT_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "pivot/dynamics.hpp"
#include "pivot/rng.hpp"

namespace pivot {

inline constexpr int kObservationDim = 5;
inline constexpr int kActionDim = 2;

constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

struct MdpConfig {
  int horizon = 100;
  double dt = 0.1;
  double discount = 0.99;
  double goal_tol = deg_to_rad(3.0);
  double goal_vel_tol = 1e-3;
  double angle_range = std::numbers::pi;  // reward normaliser
  Interval init_target_range{-std::numbers::pi / 2.0, std::numbers::pi / 2.0};
  double goal_bonus = 1.0;
  FingerMode action_mode = FingerMode::kTargetDistance;
  bool terminate_on_goal = true;
  double initial_grip_depth = 0.005;  // m below the tool rest distance at reset
  // Policy input scaling, in Observation order. The finger channel is encoded
  // as fingertip deformation d0 - finger_dist before scaling.
  std::array<double, kObservationDim> feature_scale{1.0, 1.0, 1.0 / std::numbers::pi, 0.1, 200.0};

  void validate() const {
    detail::require(horizon >= 1, "mdp.horizon must be >= 1");
    detail::require(std::isfinite(dt) && dt > 0.0, "mdp.dt must be > 0");
    detail::require(discount > 0.0 && discount < 1.0, "mdp.discount must lie in (0, 1)");
    detail::require(goal_tol > 0.0, "mdp.goal_tol must be > 0");
    detail::require(goal_vel_tol >= 0.0, "mdp.goal_vel_tol must be >= 0");
    detail::require(angle_range > 0.0, "mdp.angle_range must be > 0");
    detail::require(init_target_range.lo <= init_target_range.hi,
                    "mdp.init_target_range must be non-empty");
    detail::require(initial_grip_depth >= 0.0, "mdp.initial_grip_depth must be >= 0");
    for (double s : feature_scale) {
      detail::require(std::isfinite(s) && s != 0.0, "mdp.feature_scale entries must be finite and nonzero");
    }
  }
};

struct RandomizationConfig {
  double friction_noise_frac = 0.10;
  double delay_frac_max = 0.10;
  bool friction = true;
  bool arm_delay = true;
  bool finger_delay = true;

  static RandomizationConfig disabled() {
    RandomizationConfig r;
    r.friction = r.arm_delay = r.finger_delay = false;
    return r;
  }

  void validate() const {
    detail::require(friction_noise_frac >= 0.0 && friction_noise_frac < 1.0,
                    "randomization.friction_noise_frac must lie in [0, 1)");
    detail::require(delay_frac_max >= 0.0 && delay_frac_max < 1.0,
                    "randomization.delay_frac_max must lie in [0, 1)");
  }
};

/// Everything needed to build an environment instance.
struct EnvConfig {
  PhysicsParams physics;
  MdpConfig mdp;
  RandomizationConfig randomization;

  void validate() const {
    physics.validate();
    mdp.validate();
    randomization.validate();
  }
};

struct Observation {
  double angle_error = 0.0;  // tool_angle - target
  double tool_vel = 0.0;
  double grp_angle = 0.0;
  double grp_vel = 0.0;
  double finger_dist = 0.0;

  std::array<double, kObservationDim> as_array() const {
    return {angle_error, tool_vel, grp_angle, grp_vel, finger_dist};
  }
  bool operator==(const Observation&) const = default;
};

struct StepInfo {
  bool goal_reached = false;
  bool stick = false;
  double applied_delay = 0.0;  // s
};

struct StepResult {
  Observation obs;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

/// Goal region: close to the target, not moving relative to the gripper, and
/// held with a nonzero normal force.
inline bool goal_predicate(const SimState& s, double target, const MdpConfig& cfg,
                           const ToolParams& tool) {
  return std::abs(s.tool_angle - target) <= cfg.goal_tol &&
         std::abs(s.tool_vel) <= cfg.goal_vel_tol && deformation(tool, s.finger_dist) > 0.0;
}

inline Observation observe(const SimState& s, double target) {
  return {s.tool_angle - target, s.tool_vel, s.grp_angle, s.grp_vel, s.finger_dist};
}

/// Scaled policy input for an observation.
inline Eigen::VectorXd policy_features(const Observation& o, const MdpConfig& cfg,
                                       const ToolParams& tool) {
  Eigen::VectorXd f(kObservationDim);
  f << o.angle_error, o.tool_vel, o.grp_angle, o.grp_vel, tool.rest_finger_distance - o.finger_dist;
  for (int i = 0; i < kObservationDim; ++i) f[i] *= cfg.feature_scale[static_cast<std::size_t>(i)];
  return f;
}

/// Maps a normalised action in [-1, 1]^2 to a physical command. Entries are
/// clipped first.
inline ControlInput action_to_control(std::span<const double> action, const MdpConfig& cfg,
                                      const PhysicsParams& p) {
  if (action.size() != kActionDim) throw InvariantError("action must have 2 entries");
  const double a0 = std::clamp(std::isfinite(action[0]) ? action[0] : 0.0, -1.0, 1.0);
  const double a1 = std::clamp(std::isfinite(action[1]) ? action[1] : 0.0, -1.0, 1.0);
  ControlInput u;
  u.mode = cfg.action_mode;
  u.grp_accel = a0 * p.arm.accel_limit;
  if (cfg.action_mode == FingerMode::kRate) {
    u.finger_cmd = a1;
  } else {
    const double lo = p.arm.finger_min;
    const double hi = p.tool.rest_finger_distance;
    u.finger_cmd = lo + 0.5 * (a1 + 1.0) * (hi - lo);
  }
  return u;
}

/// Single-threaded episodic environment. Instances are independent; run one
/// per worker for parallel rollouts.
class PivotEnv {
 public:
  explicit PivotEnv(EnvConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    episode_physics_ = cfg_.physics;
  }

  const EnvConfig& config() const { return cfg_; }
  const PhysicsParams& episode_physics() const { return episode_physics_; }
  const SimState& state() const { return state_; }
  double target() const { return target_; }
  int steps() const { return steps_; }
  bool done() const { return done_; }
  double friction_multiplier() const { return friction_multiplier_; }

  /// Starts a new episode. Angles not supplied are drawn uniformly from
  /// init_target_range; the draws happen regardless so the stream layout does
  /// not depend on which angles were supplied.
  Observation reset(std::uint64_t seed, std::optional<double> init_angle = std::nullopt,
                    std::optional<double> target_angle = std::nullopt) {
    const Interval& range = cfg_.mdp.init_target_range;
    constexpr double kSlack = 1e-12;
    const Interval accept{range.lo - kSlack, range.hi + kSlack};
    if (init_angle && !accept.contains(*init_angle)) {
      throw InvariantError("reset: init angle " + std::to_string(*init_angle) +
                           " outside init_target_range");
    }
    if (target_angle && !accept.contains(*target_angle)) {
      throw InvariantError("reset: target angle " + std::to_string(*target_angle) +
                           " outside init_target_range");
    }
    rng_.seed(seed);
    std::uniform_real_distribution<double> angle(range.lo, range.hi);
    const double drawn_init = angle(rng_);
    const double drawn_target = angle(rng_);
    SimState s;
    s.tool_angle = init_angle.value_or(drawn_init);
    s.finger_dist = default_grip();
    start_episode(s, target_angle.value_or(drawn_target));
    return observe(state_, target_);
  }

  /// Starts an episode from an explicit state, bypassing the range check.
  /// Friction noise is still drawn from the seeded stream.
  Observation reset_to(std::uint64_t seed, const SimState& initial, double target) {
    if (!initial.finite() || !std::isfinite(target)) {
      throw InvariantError("reset_to: non-finite initial state or target");
    }
    rng_.seed(seed);
    rng_.discard(2);
    start_episode(initial, target);
    return observe(state_, target_);
  }

  /// Finger gap the environment grips the tool with at reset.
  double default_grip() const {
    return std::clamp(cfg_.physics.tool.rest_finger_distance - cfg_.mdp.initial_grip_depth,
                      cfg_.physics.arm.finger_min, cfg_.physics.tool.rest_finger_distance);
  }

  /// Advances one control interval with a physical command.
  StepResult step(const ControlInput& command) {
    if (!started_) throw std::logic_error("step() called before reset()");
    if (done_) throw std::logic_error("step() called after episode end; call reset()");

    const double dt = cfg_.mdp.dt;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double arm_frac =
        cfg_.randomization.arm_delay ? unit(rng_) * cfg_.randomization.delay_frac_max : 0.0;
    const double finger_frac =
        cfg_.randomization.finger_delay ? unit(rng_) * cfg_.randomization.delay_frac_max : 0.0;

    // Piecewise-constant input: each channel holds the previous command for its
    // delay fraction of the interval.
    std::array<double, 3> cuts{std::min(arm_frac, finger_frac), std::max(arm_frac, finger_frac), 1.0};
    double begin = 0.0;
    bool stick = false;
    for (double end : cuts) {
      if (end > begin) {
        const double mid = 0.5 * (begin + end);
        ControlInput u = command;
        if (mid < arm_frac) u.grp_accel = previous_.grp_accel;
        if (mid < finger_frac) {
          u.finger_cmd = previous_.finger_cmd;
          u.mode = previous_.mode;
        }
        const StepOutcome out = integrate_step(state_, u, (end - begin) * dt, episode_physics_);
        state_ = out.state;
        stick = out.stick;
      }
      begin = std::max(begin, end);
    }
    previous_ = command;
    ++steps_;

    StepResult r;
    r.obs = observe(state_, target_);
    r.info.stick = stick;
    r.info.applied_delay = std::max(arm_frac, finger_frac) * dt;
    r.info.goal_reached = goal_predicate(state_, target_, cfg_.mdp, episode_physics_.tool);
    r.reward = -std::abs(state_.tool_angle - target_) / cfg_.mdp.angle_range;
    if (r.info.goal_reached) r.reward += cfg_.mdp.goal_bonus;
    done_ = (r.info.goal_reached && cfg_.mdp.terminate_on_goal) || steps_ >= cfg_.mdp.horizon;
    r.done = done_;
    return r;
  }

  /// Advances one control interval with a normalised action in [-1, 1]^2.
  StepResult step_normalized(std::span<const double> action) {
    return step(action_to_control(action, cfg_.mdp, episode_physics_));
  }

  Eigen::VectorXd features(const Observation& o) const {
    return policy_features(o, cfg_.mdp, episode_physics_.tool);
  }

 private:
  void start_episode(const SimState& s, double target) {
    friction_multiplier_ = 1.0;
    if (cfg_.randomization.friction) {
      const double f = cfg_.randomization.friction_noise_frac;
      std::uniform_real_distribution<double> mult(1.0 - f, 1.0 + f);
      friction_multiplier_ = mult(rng_);
    }
    episode_physics_ = cfg_.physics;
    episode_physics_.friction = cfg_.physics.friction.with_stiffness_multiplier(friction_multiplier_);
    state_ = s;
    state_.finger_dist = std::clamp(state_.finger_dist, cfg_.physics.arm.finger_min,
                                    cfg_.physics.tool.rest_finger_distance);
    target_ = target;
    steps_ = 0;
    done_ = false;
    started_ = true;
    previous_ = ControlInput{};
    previous_.mode = cfg_.mdp.action_mode;
    previous_.finger_cmd = cfg_.mdp.action_mode == FingerMode::kRate ? 0.0 : state_.finger_dist;
  }

  EnvConfig cfg_;
  PhysicsParams episode_physics_;
  Rng rng_;
  SimState state_;
  ControlInput previous_;
  double target_ = 0.0;
  double friction_multiplier_ = 1.0;
  int steps_ = 0;
  bool done_ = false;
  bool started_ = false;
};

}  // namespace pivot

#endif  // PIVOT_ENVIRONMENT_HPP_
