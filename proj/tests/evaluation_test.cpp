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

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "pivot/evaluation.hpp"
#include "test_util.hpp"

namespace pivot {
namespace {

using testing::ReadFile;
using testing::TempDir;

Actor ZeroActor() {
  return [](const Vector&, Rng&) { return Vector::Zero(kActionDim); };
}

Actor UniformActor() {
  return [](const Vector&, Rng& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    return Vector((Vector(2) << u(rng), u(rng)).finished());
  };
}

// Swings the arm back and forth with a firm grip.
Actor SwingActor() {
  return [](const Vector& f, Rng&) {
    return Vector((Vector(2) << (f[3] > 0.0 ? -1.0 : 1.0), 0.0).finished());
  };
}

GaussianPolicy UntrainedPolicy() {
  Rng rng(1);
  return GaussianPolicy::initialized(MlpSpec{{5, 32, 16, 2}}, rng);
}

TEST(EvaluateTest, RandomPolicyOnTrivialTask) {
  EvalProtocol p;
  p.n_episodes = 50;
  p.eval_angle_range = {0.2, 0.2};
  const EvalMetrics m = evaluate(UniformActor(), EnvConfig{}, p, 5);
  EXPECT_EQ(m.success_rate, 1.0);
  EXPECT_LE(m.avg_steps_to_goal, 2.0);
  EXPECT_GE(m.avg_steps_to_goal, 1.0);
}

TEST(EvaluateTest, ZeroActionNeverMovesTool) {
  EvalProtocol p;
  p.n_episodes = 30;
  p.eval_angle_range = {0.5, 0.5};
  EnvConfig env;
  env.mdp.init_target_range = {-1.0, 1.0};
  // init = target = 0.5 for every draw; use explicit resets instead.
  PivotEnv e(evaluation_env_config(env, p));
  Rng rng(0);
  int reached = 0;
  for (int i = 0; i < 30; ++i) {
    SimState s;
    s.tool_angle = 0.4;
    s.finger_dist = e.default_grip();
    const Observation obs = e.reset_to(i, s, -0.4);
    const EpisodeResult r = detail::run_episode(e, obs, ZeroActor(), rng);
    reached += r.reached ? 1 : 0;
    EXPECT_EQ(r.final_state.tool_angle, 0.4);
    EXPECT_EQ(r.steps, p.step_cap);
  }
  EXPECT_EQ(reached, 0);
  p.eval_angle_range = {-1.2566, 1.2566};
  p.n_episodes = 100;
  const EvalMetrics m = evaluate(ZeroActor(), EnvConfig{}, p, 6);
  // Only episodes that happen to start inside the goal region succeed.
  EXPECT_LT(m.success_rate, 0.1);
}

TEST(EvaluateTest, MetricsBoundedAndReproducible) {
  EvalProtocol p;
  p.n_episodes = 20;
  const GaussianPolicy pol = UntrainedPolicy();
  const Vector before = pol.flatten();
  const EvalMetrics a = evaluate(pol, EnvConfig{}, p, 11);
  const EvalMetrics b = evaluate(pol, EnvConfig{}, p, 11, 3);
  EXPECT_EQ(a, b);
  EXPECT_EQ(pol.flatten(), before);
  EXPECT_GE(a.success_rate, 0.0);
  EXPECT_LE(a.success_rate, 1.0);
  EXPECT_GE(a.avg_steps_to_goal, 1.0);
  EXPECT_LE(a.avg_steps_to_goal, p.step_cap);
  p.deterministic_policy = false;
  EXPECT_EQ(evaluate(pol, EnvConfig{}, p, 11), evaluate(pol, EnvConfig{}, p, 11, 2));
}

TEST(EvaluateTest, EvaluationEnvironmentIsNominal) {
  EvalProtocol p;
  const EnvConfig cfg = evaluation_env_config(EnvConfig{}, p);
  EXPECT_EQ(cfg.mdp.horizon, 250);
  EXPECT_FALSE(cfg.randomization.friction);
  EXPECT_FALSE(cfg.randomization.arm_delay);
  EXPECT_FALSE(cfg.randomization.finger_delay);
  EXPECT_EQ(cfg.mdp.init_target_range.hi, p.eval_angle_range.hi);
}

TEST(SweepTest, RowsAndConsistency) {
  EvalProtocol p;
  SweepSpec s;
  s.episodes_per_point = 10;
  const auto rows = friction_sweep(SwingActor(), EnvConfig{}, s, p, 3);
  ASSERT_EQ(rows.size(), 5u);
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rows[i].multiplier, s.friction_multipliers[i]);
  EvalProtocol q = p;
  q.n_episodes = 10;
  EXPECT_EQ(rows[2].metrics, evaluate(SwingActor(), EnvConfig{}, q, 3));
}

TEST(SweepTest, HugeFrictionPreventsMotion) {
  EvalProtocol p;
  SweepSpec s;
  s.friction_multipliers = {100.0};
  s.episodes_per_point = 100;
  const auto rows = friction_sweep(SwingActor(), EnvConfig{}, s, p, 4);
  // Oracle: the episodes that start inside the goal region.
  const EnvConfig cfg = evaluation_env_config(EnvConfig{}, p);
  int trivially_solved = 0;
  for (int i = 0; i < 100; ++i) {
    PivotEnv env(cfg);
    const std::uint64_t ep = derive_seed(4, {static_cast<std::uint64_t>(i)});
    env.reset(derive_seed(ep, {0}));
    trivially_solved += std::abs(env.state().tool_angle - env.target()) <= p.goal_tol ? 1 : 0;
  }
  EXPECT_LE(rows[0].metrics.success_rate, trivially_solved / 100.0);
}

TEST(CycleTest, DefaultHasSixRows) {
  EvalProtocol p;
  const auto rows = target_cycle(SwingActor(), EnvConfig{}, CycleSpec{}, p, 1);
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0].from_deg, 0.0);
  EXPECT_EQ(rows[0].target_deg, 45.0);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    // The tool angle carries over from the previous transition.
    EXPECT_NEAR(rows[i].from_deg, rows[i - 1].target_deg + rows[i - 1].final_error_deg, 1e-9);
  }
  CycleSpec repeated;
  repeated.repeats = 5;
  EXPECT_EQ(target_cycle(SwingActor(), EnvConfig{}, repeated, p, 1).size(), 30u);
}

TEST(CycleTest, DegenerateCycleReachedImmediately) {
  CycleSpec c;
  c.start_deg = 10.0;
  c.targets_deg = {10.0, 10.0, 10.0};
  const auto rows = target_cycle(UniformActor(), EnvConfig{}, c, EvalProtocol{}, 2);
  for (const auto& r : rows) {
    EXPECT_TRUE(r.reached);
    EXPECT_LE(r.steps, 1);
  }
}

TEST(CycleTest, Validation) {
  CycleSpec c;
  c.repeats = 0;
  EXPECT_THROW(c.validate(), InvariantError);
  c = {};
  c.targets_deg = {};
  EXPECT_THROW(c.validate(), InvariantError);
}

TEST(DumpTest, RowsHeaderAndDeterminism) {
  TempDir dir("dump");
  const auto a = dir.path() / "a.csv";
  const auto b = dir.path() / "b.csv";
  const Actor actor = make_actor(UntrainedPolicy(), true);
  const int steps = dump_trajectory(actor, EnvConfig{}, EvalProtocol{}, 0.0, deg_to_rad(-60.0), 9, a);
  dump_trajectory(actor, EnvConfig{}, EvalProtocol{}, 0.0, deg_to_rad(-60.0), 9, b);
  const std::string text = ReadFile(a);
  EXPECT_EQ(text, ReadFile(b));
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(static_cast<int>(lines.size()), steps + 1);
  EXPECT_EQ(lines[0], "t,tool_angle,target,angle_error,grp_angle,grp_vel,finger_dist,reward");
  // angle_error at t = 0 equals init - target.
  std::istringstream row(lines[1]);
  std::vector<double> cols;
  for (std::string cell; std::getline(row, cell, ',');) cols.push_back(std::stod(cell));
  EXPECT_EQ(cols[0], 0.0);
  EXPECT_EQ(cols[3], 0.0 - deg_to_rad(-60.0));
}

TEST(DumpTest, ReportsUnwritablePath) {
  TempDir dir("dump_err");
  const auto bad = dir.path() / "missing" / "x.csv";
  try {
    dump_trajectory(ZeroActor(), EnvConfig{}, EvalProtocol{}, 0.0, 0.5, 1, bad);
    FAIL() << "expected an exception";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find(bad.string()), std::string::npos);
  }
}

TEST(FormatTest, RoundTrips) {
  for (double x : {0.1, -1.0 / 3.0, 1e-300, 12345.678901234567}) {
    EXPECT_EQ(std::stod(format_number(x)), x);
  }
}

}  // namespace
}  // namespace pivot
