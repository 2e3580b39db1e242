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

#ifndef PIVOT_TRAINING_HPP_
#define PIVOT_TRAINING_HPP_

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>

#include "pivot/checkpoint.hpp"
#include "pivot/config.hpp"
#include "pivot/evaluation.hpp"
#include "pivot/trpo.hpp"

namespace pivot {

// Stream ids under the master seed.
inline constexpr std::uint64_t kInitStream = 0;
inline constexpr std::uint64_t kRolloutStream = 1;
inline constexpr std::uint64_t kTrainEvalStream = 2;

struct TrainingLogRow {
  int iteration = 0;                // 1-based, after the update
  double avg_return = 0.0;          // mean undiscounted return of the training batch
  double eval_avg_reward = std::numeric_limits<double>::quiet_NaN();
  double avg_steps_to_goal = std::numeric_limits<double>::quiet_NaN();
  double success_rate = std::numeric_limits<double>::quiet_NaN();
  double mean_kl = 0.0;
  double surrogate_improvement = 0.0;
  bool step_accepted = false;
  double wall_time_s = 0.0;         // written to timing.csv, not the log

  bool evaluated() const { return !std::isnan(success_rate); }
};

inline const char* training_log_header() {
  return "iteration,avg_return,eval_avg_reward,avg_steps_to_goal,success_rate,mean_kl,"
         "surrogate_improvement,step_accepted";
}

inline std::string to_csv(const TrainingLogRow& r) {
  const auto num = [](double x) { return std::isnan(x) ? std::string() : format_number(x); };
  std::ostringstream os;
  os << r.iteration << ',' << num(r.avg_return) << ',' << num(r.eval_avg_reward) << ','
     << num(r.avg_steps_to_goal) << ',' << num(r.success_rate) << ',' << num(r.mean_kl) << ','
     << num(r.surrogate_improvement) << ',' << (r.step_accepted ? 1 : 0);
  return os.str();
}

struct TrainerState {
  GaussianPolicy policy;
  Mlp baseline;
  int iteration = 0;

  Checkpoint checkpoint(std::uint64_t master_seed) const {
    return {policy, baseline, iteration, master_seed};
  }
};

inline TrainerState init_trainer(const RunConfig& cfg) {
  Rng rng(derive_seed(cfg.master_seed, {kInitStream}));
  TrainerState st;
  st.policy = GaussianPolicy::initialized(cfg.policy.mlp, rng, cfg.policy.init_log_std);
  st.baseline = Mlp::initialized(cfg.baseline.mlp, rng);
  return st;
}

inline TrainerState trainer_from_checkpoint(const Checkpoint& ck, const RunConfig& cfg) {
  check_compatible(ck, cfg);
  return {ck.policy, ck.baseline, ck.iteration};
}

/// Evaluation protocol used for the per-iteration log.
inline EvalProtocol train_eval_protocol(const RunConfig& cfg) {
  EvalProtocol p = cfg.eval;
  p.n_episodes = cfg.train_eval.n_episodes;
  return p;
}

/// One iteration: collect, fit baseline, TRPO step, optional evaluation.
/// Rollouts of iteration k are seeded from (master_seed, rollout, k); the log
/// evaluation reuses one fixed seed so successive rows see the same episodes.
inline TrainingLogRow train_iteration(TrainerState& st, const RunConfig& cfg, int workers = 1) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t seed =
      derive_seed(cfg.master_seed, {kRolloutStream, static_cast<std::uint64_t>(st.iteration)});
  TrajectoryBatch batch = collect_rollouts(cfg.env, st.policy, cfg.trpo.episodes_per_iter, seed,
                                           cfg.trpo.discount, workers);
  compute_advantages(batch, cfg.trpo.use_baseline ? &st.baseline : nullptr,
                     cfg.trpo.advantage_normalize);
  if (cfg.trpo.use_baseline) st.baseline = fit_baseline(st.baseline, batch, cfg.trpo);
  const TrpoStep step = trpo_update(st.policy, batch, cfg.trpo);
  st.policy = step.policy;
  ++st.iteration;

  TrainingLogRow row;
  row.iteration = st.iteration;
  for (const auto& e : batch.episodes) row.avg_return += e.total_reward;
  row.avg_return /= static_cast<double>(batch.episodes.size());
  row.mean_kl = step.diagnostics.mean_kl;
  row.surrogate_improvement = step.diagnostics.improvement();
  row.step_accepted = step.diagnostics.accepted;
  if (cfg.train_eval.every > 0 &&
      (st.iteration % cfg.train_eval.every == 0 || st.iteration == cfg.iterations)) {
    const EvalMetrics m = evaluate(st.policy, cfg.env, train_eval_protocol(cfg),
                                   derive_seed(cfg.master_seed, {kTrainEvalStream}), workers);
    row.eval_avg_reward = m.avg_reward;
    row.avg_steps_to_goal = m.avg_steps_to_goal;
    row.success_rate = m.success_rate;
  }
  row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

}  // namespace pivot

#endif  // PIVOT_TRAINING_HPP_
