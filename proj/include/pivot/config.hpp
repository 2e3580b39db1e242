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

// Run configuration: one JSON document with a named section per component.
// Every section is optional and falls back to the embedded defaults; unknown
// keys and ill-typed values are rejected with their key path.

#ifndef PIVOT_CONFIG_HPP_
#define PIVOT_CONFIG_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "pivot/dynamics.hpp"
#include "pivot/environment.hpp"
#include "pivot/evaluation.hpp"
#include "pivot/policy.hpp"
#include "pivot/trpo.hpp"

namespace pivot {

using Json = nlohmann::ordered_json;

/// Config or checkpoint content error; the message starts with the key path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline ToolParams tool1_params() { return {6.943e-5, 0.026, 0.089, 0.0188}; }
inline ToolParams tool2_params() { return {1.111e-4, 0.033, 0.1, 0.0162}; }

struct PolicyConfig {
  MlpSpec mlp{{kObservationDim, 32, 16, kActionDim}};
  double init_log_std = 0.0;
};

struct BaselineConfig {
  MlpSpec mlp{{kObservationDim, 32, 16, 1}};
};

/// In-training evaluation used for the per-iteration log.
struct TrainEvalConfig {
  int every = 1;
  int n_episodes = 20;
};

struct RolloutConfig {
  double init_deg = 0.0;
  double target_deg = -60.0;
};

struct RunConfig {
  std::string run_id = "run";
  std::uint64_t master_seed = 1;
  std::string output_dir = "runs/run";
  int iterations = 500;
  int checkpoint_every = 50;
  std::string tool_preset = "tool1";  // informational once resolved
  EnvConfig env;
  PolicyConfig policy;
  BaselineConfig baseline;
  TrpoConfig trpo;
  TrainEvalConfig train_eval;
  EvalProtocol eval;
  SweepSpec sweep;
  CycleSpec cycle;
  RolloutConfig rollout;

  void validate() const {
    detail::require(!run_id.empty(), "run_id must be non-empty");
    detail::require(iterations >= 1, "iterations must be >= 1");
    detail::require(checkpoint_every >= 0, "checkpoint_every must be >= 0");
    env.validate();
    policy.mlp.validate(kObservationDim, "policy");
    detail::require(policy.mlp.output_dim() == kActionDim, "policy.layer_sizes must end with 2");
    baseline.mlp.validate(kObservationDim, "baseline");
    detail::require(baseline.mlp.output_dim() == 1, "baseline.layer_sizes must end with 1");
    trpo.validate();
    detail::require(train_eval.every >= 0, "train_eval.every must be >= 0");
    detail::require(train_eval.n_episodes >= 1, "train_eval.n_episodes must be >= 1");
    eval.validate();
    detail::require(eval.step_cap >= env.mdp.horizon, "eval.step_cap must be >= mdp.horizon");
    sweep.validate();
    cycle.validate();
  }
};

/// Defaults with the given tool preset ("tool1" or "tool2"). Tool 2 keeps the
/// tool-1 friction values; none were identified for it.
inline RunConfig default_run_config(const std::string& preset = "tool1") {
  RunConfig cfg;
  if (preset == "tool1") {
    cfg.env.physics.tool = tool1_params();
  } else if (preset == "tool2") {
    cfg.env.physics.tool = tool2_params();
  } else {
    throw ConfigError("tool: unknown preset '" + preset + "' (expected tool1 or tool2)");
  }
  cfg.tool_preset = preset;
  return cfg;
}

namespace detail {

inline std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

/// Strict reader: pulls known keys, then finish() rejects the rest.
class JsonReader {
 public:
  JsonReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  template <typename T>
  void operator()(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    read(*it, join_path(path_, key), out);
  }

  template <typename F>
  void section(const char* key, F&& visit) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    JsonReader sub(*it, join_path(path_, key));
    visit(sub);
    sub.finish();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(join_path(path_, it.key()) + ": unknown key");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "<root>" : path_; }

  static void read(const Json& v, const std::string& p, double& out) {
    if (!v.is_number()) throw ConfigError(p + ": expected a number");
    out = v.get<double>();
  }
  static void read(const Json& v, const std::string& p, int& out) {
    if (!v.is_number_integer()) throw ConfigError(p + ": expected an integer");
    out = v.get<int>();
  }
  static void read(const Json& v, const std::string& p, std::uint64_t& out) {
    if (!v.is_number_unsigned()) throw ConfigError(p + ": expected a non-negative integer");
    out = v.get<std::uint64_t>();
  }
  static void read(const Json& v, const std::string& p, bool& out) {
    if (!v.is_boolean()) throw ConfigError(p + ": expected true or false");
    out = v.get<bool>();
  }
  static void read(const Json& v, const std::string& p, std::string& out) {
    if (!v.is_string()) throw ConfigError(p + ": expected a string");
    out = v.get<std::string>();
  }
  static void read(const Json& v, const std::string& p, Interval& out) {
    std::vector<double> xs;
    read(v, p, xs);
    if (xs.size() != 2) throw ConfigError(p + ": expected [lo, hi]");
    out = {xs[0], xs[1]};
  }
  static void read(const Json& v, const std::string& p, FingerMode& out) {
    std::string s;
    read(v, p, s);
    if (s == "target-distance") {
      out = FingerMode::kTargetDistance;
    } else if (s == "rate") {
      out = FingerMode::kRate;
    } else {
      throw ConfigError(p + ": expected \"target-distance\" or \"rate\"");
    }
  }
  template <typename T>
  static void read(const Json& v, const std::string& p, std::vector<T>& out) {
    if (!v.is_array()) throw ConfigError(p + ": expected an array");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      T x{};
      read(v[i], p + "[" + std::to_string(i) + "]", x);
      out.push_back(x);
    }
  }
  template <typename T, std::size_t N>
  static void read(const Json& v, const std::string& p, std::array<T, N>& out) {
    std::vector<T> xs;
    read(v, p, xs);
    if (xs.size() != N) throw ConfigError(p + ": expected " + std::to_string(N) + " entries");
    std::copy(xs.begin(), xs.end(), out.begin());
  }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

class JsonWriter {
 public:
  template <typename T>
  void operator()(const char* key, const T& value) {
    j_[key] = encode(value);
  }

  template <typename F>
  void section(const char* key, F&& visit) {
    JsonWriter sub;
    visit(sub);
    j_[key] = std::move(sub.j_);
  }

  Json take() { return std::move(j_); }

 private:
  template <typename T>
  static Json encode(const T& v) { return Json(v); }
  static Json encode(const Interval& v) { return Json::array({v.lo, v.hi}); }
  static Json encode(const FingerMode& m) {
    return m == FingerMode::kRate ? Json("rate") : Json("target-distance");
  }

  Json j_ = Json::object();
};

// Field lists shared by JsonReader and JsonWriter.
template <typename V> void fields(V& v, ToolParams& t) {
  v("inertia", t.inertia);
  v("mass", t.mass);
  v("com_distance", t.com_distance);
  v("rest_finger_distance", t.rest_finger_distance);
}
template <typename V> void fields(V& v, FrictionParams& f) {
  v("viscous", f.viscous);
  v("coulomb_stiffness", f.coulomb_stiffness);
  v("static_stiffness", f.static_stiffness);
  v("stiction_eps", f.stiction_eps);
}
template <typename V> void fields(V& v, ArmParams& a) {
  v("link_length", a.link_length);
  v("gravity", a.gravity);
  v("accel_limit", a.accel_limit);
  v("grp_angle_range", a.grp_angle_range);
  v("finger_min", a.finger_min);
  v("finger_slew", a.finger_slew);
}
template <typename V> void fields(V& v, MdpConfig& m) {
  v("horizon", m.horizon);
  v("dt", m.dt);
  v("discount", m.discount);
  v("goal_tol", m.goal_tol);
  v("goal_vel_tol", m.goal_vel_tol);
  v("angle_range", m.angle_range);
  v("init_target_range", m.init_target_range);
  v("goal_bonus", m.goal_bonus);
  v("action_mode", m.action_mode);
  v("terminate_on_goal", m.terminate_on_goal);
  v("initial_grip_depth", m.initial_grip_depth);
  v("feature_scale", m.feature_scale);
}
template <typename V> void fields(V& v, RandomizationConfig& r) {
  v("friction_noise_frac", r.friction_noise_frac);
  v("delay_frac_max", r.delay_frac_max);
  v("friction", r.friction);
  v("arm_delay", r.arm_delay);
  v("finger_delay", r.finger_delay);
}
template <typename V> void fields(V& v, PolicyConfig& p) {
  v("layer_sizes", p.mlp.layer_sizes);
  std::string act = "tanh";
  v("hidden_activation", act);
  if (act != "tanh") throw ConfigError("policy.hidden_activation: only \"tanh\" is supported");
  v("init_log_std", p.init_log_std);
}
template <typename V> void fields(V& v, BaselineConfig& b) {
  v("layer_sizes", b.mlp.layer_sizes);
  std::string act = "tanh";
  v("hidden_activation", act);
  if (act != "tanh") throw ConfigError("baseline.hidden_activation: only \"tanh\" is supported");
}
template <typename V> void fields(V& v, TrpoConfig& t) {
  v("kl_step", t.kl_step);
  v("cg_iters", t.cg_iters);
  v("cg_damping", t.cg_damping);
  v("cg_residual_tol", t.cg_residual_tol);
  v("backtrack_ratio", t.backtrack_ratio);
  v("backtrack_steps", t.backtrack_steps);
  v("episodes_per_iter", t.episodes_per_iter);
  v("discount", t.discount);
  v("advantage_normalize", t.advantage_normalize);
  v("use_baseline", t.use_baseline);
  v("baseline_epochs", t.baseline_epochs);
  v("baseline_learn_rate", t.baseline_learn_rate);
}
template <typename V> void fields(V& v, TrainEvalConfig& t) {
  v("every", t.every);
  v("n_episodes", t.n_episodes);
}
template <typename V> void fields(V& v, EvalProtocol& e) {
  v("n_episodes", e.n_episodes);
  v("step_cap", e.step_cap);
  v("eval_angle_range", e.eval_angle_range);
  v("goal_tol", e.goal_tol);
  v("deterministic_policy", e.deterministic_policy);
}
template <typename V> void fields(V& v, SweepSpec& s) {
  v("friction_multipliers", s.friction_multipliers);
  v("episodes_per_point", s.episodes_per_point);
}
template <typename V> void fields(V& v, CycleSpec& c) {
  v("start_deg", c.start_deg);
  v("targets_deg", c.targets_deg);
  v("repeats", c.repeats);
}
template <typename V> void fields(V& v, RolloutConfig& r) {
  v("init_deg", r.init_deg);
  v("target_deg", r.target_deg);
}

template <typename V> void run_fields(V& v, RunConfig& c) {
  v("run_id", c.run_id);
  v("master_seed", c.master_seed);
  v("output_dir", c.output_dir);
  v("iterations", c.iterations);
  v("checkpoint_every", c.checkpoint_every);
  v("tool_preset", c.tool_preset);
  v.section("tool", [&](auto& s) { fields(s, c.env.physics.tool); });
  v.section("friction", [&](auto& s) { fields(s, c.env.physics.friction); });
  v.section("arm", [&](auto& s) { fields(s, c.env.physics.arm); });
  v.section("mdp", [&](auto& s) { fields(s, c.env.mdp); });
  v.section("randomization", [&](auto& s) { fields(s, c.env.randomization); });
  v.section("policy", [&](auto& s) { fields(s, c.policy); });
  v.section("baseline", [&](auto& s) { fields(s, c.baseline); });
  v.section("trpo", [&](auto& s) { fields(s, c.trpo); });
  v.section("train_eval", [&](auto& s) { fields(s, c.train_eval); });
  v.section("eval", [&](auto& s) { fields(s, c.eval); });
  v.section("sweep", [&](auto& s) { fields(s, c.sweep); });
  v.section("cycle", [&](auto& s) { fields(s, c.cycle); });
  v.section("rollout", [&](auto& s) { fields(s, c.rollout); });
}

}  // namespace detail

/// Parses a run config. A string-valued "tool_preset" selects the base
/// defaults before any section is applied. Validation failures are reported
/// as ConfigError.
inline RunConfig run_config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("<root>: expected an object");
  std::string preset = "tool1";
  if (auto it = j.find("tool_preset"); it != j.end()) {
    if (!it->is_string()) throw ConfigError("tool_preset: expected a string");
    preset = it->get<std::string>();
  }
  RunConfig cfg = default_run_config(preset);
  detail::JsonReader reader(j, "");
  detail::run_fields(reader, cfg);
  reader.finish();
  try {
    cfg.validate();
  } catch (const InvariantError& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

inline Json run_config_to_json(const RunConfig& cfg) {
  RunConfig copy = cfg;
  detail::JsonWriter writer;
  detail::run_fields(writer, copy);
  return writer.take();
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open file");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  return run_config_from_json(read_json_file(path));
}

inline void save_run_config(const RunConfig& cfg, const std::filesystem::path& path) {
  write_text_file(path, run_config_to_json(cfg).dump(2) + "\n");
}

}  // namespace pivot

#endif  // PIVOT_CONFIG_HPP_
