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

// Evaluation protocols: success / steps-to-goal metrics, friction mismatch
// sweeps, the target-angle cycle and CSV trajectory dumps.

#ifndef PIVOT_EVALUATION_HPP_
#define PIVOT_EVALUATION_HPP_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pivot/environment.hpp"
#include "pivot/policy.hpp"
#include "pivot/rng.hpp"
#include "pivot/trpo.hpp"

namespace pivot {

/// Maps policy features to a normalised action.
using Actor = std::function<Vector(const Vector& features, Rng& rng)>;

inline Actor make_actor(const GaussianPolicy& policy, bool deterministic) {
  if (deterministic) {
    return [policy](const Vector& f, Rng&) { return forward_mean(policy, f); };
  }
  return [policy](const Vector& f, Rng& rng) { return sample_action(policy, f, rng); };
}

struct EvalProtocol {
  int n_episodes = 100;
  int step_cap = 250;
  Interval eval_angle_range{-std::numbers::pi / 2.5, std::numbers::pi / 2.5};
  double goal_tol = deg_to_rad(3.0);
  bool deterministic_policy = true;

  void validate() const {
    detail::require(n_episodes >= 1, "eval.n_episodes must be >= 1");
    detail::require(step_cap >= 1, "eval.step_cap must be >= 1");
    detail::require(eval_angle_range.lo <= eval_angle_range.hi, "eval.eval_angle_range must be non-empty");
    detail::require(goal_tol > 0.0, "eval.goal_tol must be > 0");
  }
};

struct SweepSpec {
  std::vector<double> friction_multipliers{0.25, 0.5, 1.0, 2.5, 5.0};
  int episodes_per_point = 100;

  void validate() const {
    detail::require(!friction_multipliers.empty(), "sweep.friction_multipliers must be non-empty");
    for (double m : friction_multipliers) {
      detail::require(std::isfinite(m) && m > 0.0, "sweep.friction_multipliers must be > 0");
    }
    detail::require(episodes_per_point >= 1, "sweep.episodes_per_point must be >= 1");
  }
};

struct CycleSpec {
  double start_deg = 0.0;
  std::vector<double> targets_deg{45.0, 0.0, -60.0, 30.0, 5.0, 0.0};
  int repeats = 1;  // the sequence is run this many times back to back

  void validate() const {
    detail::require(!targets_deg.empty(), "cycle.targets_deg must be non-empty");
    detail::require(repeats >= 1, "cycle.repeats must be >= 1");
    for (double t : targets_deg) {
      detail::require(std::abs(t) <= 90.0, "cycle.targets_deg must lie within [-90, 90]");
    }
  }
};

struct EvalMetrics {
  double avg_reward = 0.0;         // mean undiscounted episode return
  double avg_steps_to_goal = 0.0;  // step_cap for episodes that never reach the goal
  double success_rate = 0.0;
  int n_episodes = 0;

  bool operator==(const EvalMetrics&) const = default;
};

struct EpisodeResult {
  double total_reward = 0.0;
  int steps = 0;
  bool reached = false;
  double final_error = 0.0;
  SimState final_state;
};

/// Environment used for evaluation: nominal physics (randomisation off),
/// horizon = step_cap and the protocol's goal region and angle range.
inline EnvConfig evaluation_env_config(const EnvConfig& base, const EvalProtocol& protocol) {
  EnvConfig cfg = base;
  cfg.mdp.horizon = protocol.step_cap;
  cfg.mdp.goal_tol = protocol.goal_tol;
  cfg.mdp.init_target_range = protocol.eval_angle_range;
  cfg.mdp.terminate_on_goal = true;
  cfg.randomization = RandomizationConfig::disabled();
  return cfg;
}

namespace detail {

inline EpisodeResult run_episode(PivotEnv& env, Observation obs, const Actor& actor, Rng& rng,
                                 const std::function<void(const SimState&, const StepResult&)>& on_step = {}) {
  EpisodeResult res;
  bool done = false;
  while (!done) {
    const Vector a = actor(env.features(obs), rng);
    const SimState before = env.state();
    const StepResult r = env.step_normalized(std::span<const double>(a.data(), kActionDim));
    if (on_step) on_step(before, r);
    res.total_reward += r.reward;
    res.reached = res.reached || r.info.goal_reached;
    obs = r.obs;
    done = r.done;
  }
  res.steps = env.steps();
  res.final_state = env.state();
  res.final_error = env.state().tool_angle - env.target();
  return res;
}

}  // namespace detail

/// Runs protocol.n_episodes episodes with init/target drawn from the
/// protocol's range. Episode i is seeded from derive_seed(seed, {i}).
inline EvalMetrics evaluate(const Actor& actor, const EnvConfig& base, const EvalProtocol& protocol,
                            std::uint64_t seed, int workers = 1) {
  protocol.validate();
  const EnvConfig cfg = evaluation_env_config(base, protocol);
  std::vector<EpisodeResult> results(static_cast<std::size_t>(protocol.n_episodes));
  detail::parallel_for(protocol.n_episodes, workers, [&](int i) {
    const std::uint64_t ep_seed = derive_seed(seed, {static_cast<std::uint64_t>(i)});
    PivotEnv env(cfg);
    Rng rng(derive_seed(ep_seed, {1}));
    const Observation obs = env.reset(derive_seed(ep_seed, {0}));
    results[static_cast<std::size_t>(i)] = detail::run_episode(env, obs, actor, rng);
  });
  EvalMetrics m;
  m.n_episodes = protocol.n_episodes;
  for (const auto& r : results) {
    m.avg_reward += r.total_reward;
    m.avg_steps_to_goal += r.reached ? r.steps : protocol.step_cap;
    m.success_rate += r.reached ? 1.0 : 0.0;
  }
  const double n = protocol.n_episodes;
  m.avg_reward /= n;
  m.avg_steps_to_goal /= n;
  m.success_rate /= n;
  return m;
}

inline EvalMetrics evaluate(const GaussianPolicy& policy, const EnvConfig& base,
                            const EvalProtocol& protocol, std::uint64_t seed, int workers = 1) {
  return evaluate(make_actor(policy, protocol.deterministic_policy), base, protocol, seed, workers);
}

struct SweepRow {
  double multiplier = 1.0;
  EvalMetrics metrics;
};

/// One evaluate() per friction multiplier on the stiffness composites, all
/// with the same seed.
inline std::vector<SweepRow> friction_sweep(const Actor& actor, const EnvConfig& base,
                                            const SweepSpec& sweep, EvalProtocol protocol,
                                            std::uint64_t seed, int workers = 1) {
  sweep.validate();
  protocol.n_episodes = sweep.episodes_per_point;
  std::vector<SweepRow> rows;
  for (double mult : sweep.friction_multipliers) {
    EnvConfig cfg = base;
    cfg.physics.friction = base.physics.friction.with_stiffness_multiplier(mult);
    rows.push_back({mult, evaluate(actor, cfg, protocol, seed, workers)});
  }
  return rows;
}

inline std::vector<SweepRow> friction_sweep(const GaussianPolicy& policy, const EnvConfig& base,
                                            const SweepSpec& sweep, const EvalProtocol& protocol,
                                            std::uint64_t seed, int workers = 1) {
  return friction_sweep(make_actor(policy, protocol.deterministic_policy), base, sweep, protocol,
                        seed, workers);
}

struct CycleRow {
  double from_deg = 0.0;
  double target_deg = 0.0;
  bool reached = false;
  int steps = 0;
  double final_error_deg = 0.0;
};

/// Runs the target sequence back to back. Each transition starts from the
/// final tool angle of the previous one with the arm at rest and the default
/// grip; a transition that starts inside the goal region counts as reached in
/// zero steps.
inline std::vector<CycleRow> target_cycle(const Actor& actor, const EnvConfig& base,
                                          const CycleSpec& cycle, const EvalProtocol& protocol,
                                          std::uint64_t seed) {
  cycle.validate();
  const EnvConfig cfg = evaluation_env_config(base, protocol);
  std::vector<CycleRow> rows;
  double angle = deg_to_rad(cycle.start_deg);
  const std::size_t n_targets = cycle.targets_deg.size();
  for (std::size_t k = 0; k < n_targets * static_cast<std::size_t>(cycle.repeats); ++k) {
    const double target_deg = cycle.targets_deg[k % n_targets];
    const std::uint64_t ep_seed = derive_seed(seed, {static_cast<std::uint64_t>(k)});
    PivotEnv env(cfg);
    SimState init;
    init.tool_angle = angle;
    init.finger_dist = env.default_grip();
    const double target = deg_to_rad(target_deg);
    const Observation obs = env.reset_to(derive_seed(ep_seed, {0}), init, target);
    CycleRow row{rad_to_deg(angle), target_deg, false, 0, rad_to_deg(angle - target)};
    if (goal_predicate(env.state(), target, cfg.mdp, env.episode_physics().tool)) {
      row.reached = true;
    } else {
      Rng rng(derive_seed(ep_seed, {1}));
      const EpisodeResult r = detail::run_episode(env, obs, actor, rng);
      row.reached = r.reached;
      row.steps = r.steps;
      row.final_error_deg = rad_to_deg(r.final_error);
      angle = r.final_state.tool_angle;
    }
    rows.push_back(row);
  }
  return rows;
}

inline std::vector<CycleRow> target_cycle(const GaussianPolicy& policy, const EnvConfig& base,
                                          const CycleSpec& cycle, const EvalProtocol& protocol,
                                          std::uint64_t seed) {
  return target_cycle(make_actor(policy, protocol.deterministic_policy), base, cycle, protocol, seed);
}

/// Formats a double so that it parses back to the same value.
inline std::string format_number(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

/// Runs one episode from (init, target) and writes it as CSV, one row per
/// step with the state before the action and the reward that followed.
/// Returns the number of steps taken.
inline int dump_trajectory(const Actor& actor, const EnvConfig& base, const EvalProtocol& protocol,
                           double init, double target, std::uint64_t seed,
                           const std::filesystem::path& path) {
  const EnvConfig cfg = evaluation_env_config(base, protocol);
  PivotEnv env(cfg);
  SimState s;
  s.tool_angle = init;
  s.finger_dist = env.default_grip();
  const Observation obs = env.reset_to(derive_seed(seed, {0}), s, target);

  std::ostringstream csv;
  csv << "t,tool_angle,target,angle_error,grp_angle,grp_vel,finger_dist,reward\n";
  int k = 0;
  const double dt = cfg.mdp.dt;
  Rng rng(derive_seed(seed, {1}));
  detail::run_episode(env, obs, actor, rng, [&](const SimState& before, const StepResult& r) {
    csv << format_number(k * dt) << ',' << format_number(before.tool_angle) << ','
        << format_number(target) << ',' << format_number(before.tool_angle - target) << ','
        << format_number(before.grp_angle) << ',' << format_number(before.grp_vel) << ','
        << format_number(before.finger_dist) << ',' << format_number(r.reward) << '\n';
    ++k;
  });

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open trajectory file for writing: " + path.string());
  out << csv.str();
  if (!out) throw std::runtime_error("failed writing trajectory file: " + path.string());
  return k;
}

}  // namespace pivot

#endif  // PIVOT_EVALUATION_HPP_
