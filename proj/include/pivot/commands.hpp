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

// Subcommand implementations shared by the `pivot` executable and the tests.
// Every command writes the resolved config next to its outputs.

#ifndef PIVOT_COMMANDS_HPP_
#define PIVOT_COMMANDS_HPP_

#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pivot/checkpoint.hpp"
#include "pivot/config.hpp"
#include "pivot/evaluation.hpp"
#include "pivot/training.hpp"

namespace pivot {

namespace fs = std::filesystem;

inline constexpr std::uint64_t kEvalStream = 10;
inline constexpr std::uint64_t kSweepStream = 11;
inline constexpr std::uint64_t kCycleStream = 12;
inline constexpr std::uint64_t kRolloutDumpStream = 13;

struct TrainOptions {
  int workers = 1;
  std::optional<fs::path> resume_from;
  std::function<void(const TrainingLogRow&)> on_row;  // progress hook
};

struct TrainResult {
  fs::path final_checkpoint;
  std::vector<TrainingLogRow> rows;
  TrainerState state;
};

inline fs::path output_dir(const RunConfig& cfg) { return fs::path(cfg.output_dir); }

inline fs::path checkpoint_path(const RunConfig& cfg, int iteration) {
  std::ostringstream name;
  name << "checkpoint_" << std::setw(6) << std::setfill('0') << iteration << ".json";
  return output_dir(cfg) / "checkpoints" / name.str();
}

inline fs::path final_checkpoint_path(const RunConfig& cfg) {
  return output_dir(cfg) / "checkpoint_final.json";
}

namespace detail {

inline bool same_file(const fs::path& a, const fs::path& b) {
  std::error_code ec;
  return fs::exists(a) && fs::exists(b) && fs::equivalent(a, b, ec);
}

inline void guarded_save(const Checkpoint& ck, const fs::path& path,
                         const std::optional<fs::path>& input) {
  if (input && same_file(path, *input)) {
    throw ConfigError(path.string() + ": refusing to overwrite the input checkpoint; use --out");
  }
  save_checkpoint(ck, path);
}

inline void write_resolved_config(const RunConfig& cfg) {
  save_run_config(cfg, output_dir(cfg) / "resolved_config.json");
}

}  // namespace detail

/// Trains for cfg.iterations TRPO iterations (counting from the resumed
/// checkpoint, if any). Writes training_log.csv, timing.csv, periodic and
/// final checkpoints and resolved_config.json under cfg.output_dir.
inline TrainResult cmd_train(const RunConfig& cfg, const TrainOptions& opts = {}) {
  cfg.validate();
  fs::create_directories(output_dir(cfg));
  detail::write_resolved_config(cfg);

  TrainResult result;
  if (opts.resume_from) {
    const Checkpoint ck = load_checkpoint(*opts.resume_from);
    if (ck.master_seed != cfg.master_seed) {
      throw ConfigError("master_seed: checkpoint was trained with seed " +
                        std::to_string(ck.master_seed));
    }
    result.state = trainer_from_checkpoint(ck, cfg);
  } else {
    result.state = init_trainer(cfg);
  }

  const fs::path log_path = output_dir(cfg) / "training_log.csv";
  const fs::path timing_path = output_dir(cfg) / "timing.csv";
  const bool append = opts.resume_from && fs::exists(log_path);
  std::ofstream log(log_path, append ? std::ios::app : std::ios::trunc);
  std::ofstream timing(timing_path, append ? std::ios::app : std::ios::trunc);
  if (!log || !timing) throw std::runtime_error("cannot open training logs in " + cfg.output_dir);
  if (!append) {
    log << training_log_header() << '\n';
    timing << "iteration,wall_time_s\n";
  }

  TrainerState& st = result.state;
  while (st.iteration < cfg.iterations) {
    const TrainingLogRow row = train_iteration(st, cfg, opts.workers);
    log << to_csv(row) << '\n' << std::flush;
    timing << row.iteration << ',' << row.wall_time_s << '\n' << std::flush;
    result.rows.push_back(row);
    if (opts.on_row) opts.on_row(row);
    if (cfg.checkpoint_every > 0 && st.iteration % cfg.checkpoint_every == 0) {
      detail::guarded_save(st.checkpoint(cfg.master_seed), checkpoint_path(cfg, st.iteration),
                           opts.resume_from);
    }
  }
  result.final_checkpoint = final_checkpoint_path(cfg);
  detail::guarded_save(st.checkpoint(cfg.master_seed), result.final_checkpoint, opts.resume_from);
  return result;
}

/// Loads a checkpoint and checks it against the config; a missing path means
/// freshly initialised (untrained) parameters.
inline GaussianPolicy load_policy_for(const RunConfig& cfg, const std::optional<fs::path>& ckpt) {
  if (!ckpt) return init_trainer(cfg).policy;
  const Checkpoint ck = load_checkpoint(*ckpt);
  check_compatible(ck, cfg);
  return ck.policy;
}

inline Json metrics_json(const EvalMetrics& m) {
  return Json{{"avg_reward", m.avg_reward},
              {"avg_steps_to_goal", m.avg_steps_to_goal},
              {"success_rate", m.success_rate},
              {"n_episodes", m.n_episodes}};
}

inline EvalMetrics cmd_eval(const RunConfig& cfg, const std::optional<fs::path>& ckpt, int workers = 1) {
  cfg.validate();
  const GaussianPolicy policy = load_policy_for(cfg, ckpt);
  const EvalMetrics m =
      evaluate(policy, cfg.env, cfg.eval, derive_seed(cfg.master_seed, {kEvalStream}), workers);
  detail::write_resolved_config(cfg);
  std::ostringstream csv;
  csv << "avg_reward,avg_steps_to_goal,success_rate,n_episodes\n"
      << format_number(m.avg_reward) << ',' << format_number(m.avg_steps_to_goal) << ','
      << format_number(m.success_rate) << ',' << m.n_episodes << '\n';
  write_text_file(output_dir(cfg) / ("eval_" + cfg.run_id + ".csv"), csv.str());
  Json summary{{"protocol", "eval"}, {"run_id", cfg.run_id}, {"metrics", metrics_json(m)}};
  write_text_file(output_dir(cfg) / ("eval_" + cfg.run_id + ".json"), summary.dump(2) + "\n");
  return m;
}

inline std::vector<SweepRow> cmd_sweep(const RunConfig& cfg, const std::optional<fs::path>& ckpt,
                                       int workers = 1) {
  cfg.validate();
  const GaussianPolicy policy = load_policy_for(cfg, ckpt);
  const auto rows = friction_sweep(policy, cfg.env, cfg.sweep, cfg.eval,
                                   derive_seed(cfg.master_seed, {kSweepStream}), workers);
  detail::write_resolved_config(cfg);
  std::ostringstream csv;
  csv << "multiplier,avg_reward,avg_steps_to_goal,success_rate\n";
  Json points = Json::array();
  for (const auto& r : rows) {
    csv << format_number(r.multiplier) << ',' << format_number(r.metrics.avg_reward) << ','
        << format_number(r.metrics.avg_steps_to_goal) << ',' << format_number(r.metrics.success_rate)
        << '\n';
    Json p = metrics_json(r.metrics);
    p["multiplier"] = r.multiplier;
    points.push_back(p);
  }
  write_text_file(output_dir(cfg) / ("sweep_" + cfg.run_id + ".csv"), csv.str());
  Json summary{{"protocol", "sweep"}, {"run_id", cfg.run_id}, {"points", points}};
  write_text_file(output_dir(cfg) / ("sweep_" + cfg.run_id + ".json"), summary.dump(2) + "\n");
  return rows;
}

inline std::vector<CycleRow> cmd_cycle(const RunConfig& cfg, const std::optional<fs::path>& ckpt) {
  cfg.validate();
  const GaussianPolicy policy = load_policy_for(cfg, ckpt);
  const auto rows =
      target_cycle(policy, cfg.env, cfg.cycle, cfg.eval, derive_seed(cfg.master_seed, {kCycleStream}));
  detail::write_resolved_config(cfg);
  std::ostringstream csv;
  csv << "from_deg,target_deg,reached,steps,final_error_deg\n";
  int reached = 0;
  for (const auto& r : rows) {
    csv << format_number(r.from_deg) << ',' << format_number(r.target_deg) << ','
        << (r.reached ? 1 : 0) << ',' << r.steps << ',' << format_number(r.final_error_deg) << '\n';
    reached += r.reached ? 1 : 0;
  }
  write_text_file(output_dir(cfg) / ("cycle_" + cfg.run_id + ".csv"), csv.str());
  Json summary{{"protocol", "cycle"},
               {"run_id", cfg.run_id},
               {"transitions", rows.size()},
               {"reached", reached},
               {"success_rate", rows.empty() ? 0.0 : double(reached) / double(rows.size())}};
  write_text_file(output_dir(cfg) / ("cycle_" + cfg.run_id + ".json"), summary.dump(2) + "\n");
  return rows;
}

/// Dumps one trajectory from cfg.rollout.init_deg to cfg.rollout.target_deg.
inline fs::path cmd_rollout(const RunConfig& cfg, const std::optional<fs::path>& ckpt) {
  cfg.validate();
  const GaussianPolicy policy = load_policy_for(cfg, ckpt);
  detail::write_resolved_config(cfg);
  const fs::path path = output_dir(cfg) / ("rollout_" + cfg.run_id + ".csv");
  fs::create_directories(output_dir(cfg));
  dump_trajectory(make_actor(policy, cfg.eval.deterministic_policy), cfg.env, cfg.eval,
                  deg_to_rad(cfg.rollout.init_deg), deg_to_rad(cfg.rollout.target_deg),
                  derive_seed(cfg.master_seed, {kRolloutDumpStream}), path);
  return path;
}

}  // namespace pivot

#endif  // PIVOT_COMMANDS_HPP_
