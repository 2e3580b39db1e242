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

// Trust region policy optimization: on-policy single-path rollouts, Monte Carlo
// returns, importance-weighted surrogate, natural-gradient step via conjugate
// gradient on Fisher-vector products, and a KL-checked backtracking line search.

#ifndef PIVOT_TRPO_HPP_
#define PIVOT_TRPO_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "pivot/environment.hpp"
#include "pivot/policy.hpp"
#include "pivot/rng.hpp"

namespace pivot {

struct TrpoConfig {
  double kl_step = 0.02;
  int cg_iters = 10;
  double cg_damping = 0.1;
  double cg_residual_tol = 1e-10;
  double backtrack_ratio = 0.8;
  int backtrack_steps = 10;
  int episodes_per_iter = 50;
  double discount = 0.99;
  bool advantage_normalize = true;
  bool use_baseline = true;
  int baseline_epochs = 25;
  double baseline_learn_rate = 1e-2;

  void validate() const {
    detail::require(kl_step > 0.0, "trpo.kl_step must be > 0");
    detail::require(cg_iters >= 1, "trpo.cg_iters must be >= 1");
    detail::require(cg_damping >= 0.0, "trpo.cg_damping must be >= 0");
    detail::require(cg_residual_tol >= 0.0, "trpo.cg_residual_tol must be >= 0");
    detail::require(backtrack_ratio > 0.0 && backtrack_ratio < 1.0,
                    "trpo.backtrack_ratio must lie in (0, 1)");
    detail::require(backtrack_steps >= 1, "trpo.backtrack_steps must be >= 1");
    detail::require(episodes_per_iter >= 1, "trpo.episodes_per_iter must be >= 1");
    detail::require(discount > 0.0 && discount < 1.0, "trpo.discount must lie in (0, 1)");
    detail::require(baseline_epochs >= 0, "trpo.baseline_epochs must be >= 0");
    detail::require(baseline_learn_rate > 0.0, "trpo.baseline_learn_rate must be > 0");
  }
};

struct EpisodeSummary {
  double total_reward = 0.0;
  int length = 0;
  bool goal_reached = false;
};

/// Sampled on-policy data. Columns of the matrices are time steps, episodes
/// are stored back to back; episode_offsets has one extra trailing entry.
struct TrajectoryBatch {
  Matrix features;
  Matrix actions;
  Vector rewards;
  Vector log_prob_old;
  Vector returns;
  Vector advantages;
  std::vector<Eigen::Index> episode_offsets{0};
  std::vector<EpisodeSummary> episodes;

  Eigen::Index size() const { return rewards.size(); }
  bool empty() const { return size() == 0; }
};

/// R_t = sum_k alpha^k r_{t+k}, restarting at every episode boundary.
inline Vector discounted_returns(const Vector& rewards, const std::vector<Eigen::Index>& offsets,
                                 double discount) {
  detail::require(discount > 0.0 && discount < 1.0, "discount must lie in (0, 1)");
  Vector out(rewards.size());
  for (std::size_t e = 0; e + 1 < offsets.size(); ++e) {
    double running = 0.0;
    for (Eigen::Index t = offsets[e + 1] - 1; t >= offsets[e]; --t) {
      running = rewards[t] + discount * running;
      out[t] = running;
    }
  }
  return out;
}

inline Vector discounted_returns(const Vector& rewards, double discount) {
  return discounted_returns(rewards, {0, rewards.size()}, discount);
}

namespace detail {

struct EpisodeRecord {
  std::vector<Vector> features;
  std::vector<Vector> actions;
  std::vector<double> rewards;
  std::vector<double> log_probs;
  EpisodeSummary summary;
};

inline EpisodeRecord run_training_episode(const EnvConfig& env_cfg, const GaussianPolicy& policy,
                                          std::uint64_t episode_seed) {
  PivotEnv env(env_cfg);
  Rng action_rng(derive_seed(episode_seed, {1}));
  Observation obs = env.reset(derive_seed(episode_seed, {0}));
  EpisodeRecord rec;
  bool done = false;
  while (!done) {
    Vector f = env.features(obs);
    Vector a = sample_action(policy, f, action_rng);
    rec.log_probs.push_back(log_prob(policy, f, a));
    const StepResult r = env.step_normalized(std::span<const double>(a.data(), kActionDim));
    rec.features.push_back(std::move(f));
    rec.actions.push_back(std::move(a));
    rec.rewards.push_back(r.reward);
    rec.summary.total_reward += r.reward;
    rec.summary.goal_reached = rec.summary.goal_reached || r.info.goal_reached;
    obs = r.obs;
    done = r.done;
  }
  rec.summary.length = static_cast<int>(rec.rewards.size());
  return rec;
}

/// Runs fn(i) for i in [0, n) over up to `workers` threads. Each index is
/// handled by exactly one thread, results must be written to slot i.
inline void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  workers = std::clamp(workers, 1, std::max(n, 1));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += workers) fn(i);
    });
  }
}

}  // namespace detail

/// Samples n_episodes with a ~ pi(.|s). Episode i uses the substream
/// derive_seed(seed, {i}), so the result does not depend on `workers`.
inline TrajectoryBatch collect_rollouts(const EnvConfig& env_cfg, const GaussianPolicy& policy,
                                        int n_episodes, std::uint64_t seed, double discount,
                                        int workers = 1) {
  detail::require(n_episodes >= 1, "collect_rollouts needs n_episodes >= 1");
  detail::require(policy.mean_net.spec().input_dim() == kObservationDim &&
                      policy.action_dim() == kActionDim,
                  "policy dimensions do not match the environment");
  std::vector<detail::EpisodeRecord> records(static_cast<std::size_t>(n_episodes));
  detail::parallel_for(n_episodes, workers, [&](int i) {
    records[static_cast<std::size_t>(i)] =
        detail::run_training_episode(env_cfg, policy, derive_seed(seed, {static_cast<std::uint64_t>(i)}));
  });

  Eigen::Index total = 0;
  for (const auto& r : records) total += static_cast<Eigen::Index>(r.rewards.size());
  TrajectoryBatch batch;
  batch.features.resize(kObservationDim, total);
  batch.actions.resize(kActionDim, total);
  batch.rewards.resize(total);
  batch.log_prob_old.resize(total);
  Eigen::Index col = 0;
  for (const auto& r : records) {
    for (std::size_t t = 0; t < r.rewards.size(); ++t, ++col) {
      batch.features.col(col) = r.features[t];
      batch.actions.col(col) = r.actions[t];
      batch.rewards[col] = r.rewards[t];
      batch.log_prob_old[col] = r.log_probs[t];
    }
    batch.episode_offsets.push_back(col);
    batch.episodes.push_back(r.summary);
  }
  batch.returns = discounted_returns(batch.rewards, batch.episode_offsets, discount);
  batch.advantages = batch.returns;
  return batch;
}

/// Advantage = return - baseline (when given), optionally standardised.
inline void compute_advantages(TrajectoryBatch& batch, const Mlp* baseline, bool normalize) {
  batch.advantages = batch.returns;
  if (baseline) batch.advantages -= baseline->forward(batch.features).row(0).transpose();
  if (normalize && batch.size() > 1) {
    const double mean = batch.advantages.mean();
    const double var = (batch.advantages.array() - mean).square().mean();
    const double sd = std::sqrt(var);
    batch.advantages.array() -= mean;
    if (sd > 1e-12) batch.advantages /= sd;
  }
}

/// Mean importance-weighted advantage under new_policy.
inline double surrogate(const GaussianPolicy& new_policy, const TrajectoryBatch& batch) {
  detail::require(!batch.empty(), "surrogate needs a nonempty batch");
  const Vector lp = log_prob_batch(new_policy, batch.features, batch.actions);
  return ((lp - batch.log_prob_old).array().exp() * batch.advantages.array()).mean();
}

inline Vector fisher_vector_product(const GaussianPolicy& policy, const TrajectoryBatch& batch,
                                    const Vector& v, double damping) {
  return fisher_vector_product(policy, batch.features, v, damping);
}

struct CgResult {
  Vector x;
  std::vector<double> residual_norms;  // entry 0 is ||b||
  int iterations = 0;
};

/// Conjugate gradient for a symmetric positive definite operator.
inline CgResult conjugate_gradient(const std::function<Vector(const Vector&)>& op, const Vector& b,
                                   int iters, double tol) {
  CgResult out;
  out.x = Vector::Zero(b.size());
  Vector r = b;
  Vector p = r;
  double rr = r.squaredNorm();
  out.residual_norms.push_back(std::sqrt(rr));
  for (int i = 0; i < iters && std::sqrt(rr) > tol; ++i) {
    const Vector ap = op(p);
    const double pap = p.dot(ap);
    if (!(pap > 0.0)) break;
    const double alpha = rr / pap;
    out.x += alpha * p;
    r -= alpha * ap;
    const double rr_next = r.squaredNorm();
    out.residual_norms.push_back(std::sqrt(rr_next));
    p = r + (rr_next / rr) * p;
    rr = rr_next;
    out.iterations = i + 1;
  }
  return out;
}

struct TrpoDiagnostics {
  bool accepted = false;
  double mean_kl = 0.0;
  double surrogate_before = 0.0;
  double surrogate_after = 0.0;
  double step_size = 0.0;   // beta * ratio^k actually applied
  int backtracks = 0;
  int cg_iterations = 0;
  double gradient_norm = 0.0;

  double improvement() const { return surrogate_after - surrogate_before; }
};

struct TrpoStep {
  GaussianPolicy policy;
  TrpoDiagnostics diagnostics;
};

/// One constrained update: s = CG(F, g), beta = sqrt(2 delta / s'Fs), then
/// backtrack from beta s until mean KL <= delta and the surrogate improves.
/// If nothing passes the old parameters are returned with accepted = false.
inline TrpoStep trpo_update(const GaussianPolicy& policy, const TrajectoryBatch& batch,
                            const TrpoConfig& cfg) {
  detail::require(!batch.empty(), "trpo_update needs a nonempty batch");
  TrpoStep out{policy, {}};
  auto& diag = out.diagnostics;

  const ValueAndGrad g = value_and_grad(
      policy, SurrogateLoss{batch.features, batch.actions, batch.log_prob_old, batch.advantages});
  diag.surrogate_before = g.value;
  diag.surrogate_after = g.value;
  diag.gradient_norm = g.grad.norm();
  if (!(diag.gradient_norm > 0.0) || !g.grad.allFinite()) return out;

  const auto fvp = [&](const Vector& v) {
    return fisher_vector_product(policy, batch.features, v, cfg.cg_damping);
  };
  const CgResult cg = conjugate_gradient(fvp, g.grad, cfg.cg_iters, cfg.cg_residual_tol);
  diag.cg_iterations = cg.iterations;
  const double shs = cg.x.dot(fvp(cg.x));
  if (!(shs > 0.0) || !std::isfinite(shs)) return out;
  const double beta = std::sqrt(2.0 * cfg.kl_step / shs);

  const Vector theta = policy.flatten();
  double scale = beta;
  for (int k = 0; k < cfg.backtrack_steps; ++k, scale *= cfg.backtrack_ratio) {
    GaussianPolicy candidate = policy.with_params(theta + scale * cg.x);
    if (!candidate.finite()) continue;
    const double kl = kl_mean(policy, candidate, batch.features);
    const double sur = surrogate(candidate, batch);
    if (kl <= cfg.kl_step && sur > diag.surrogate_before) {
      out.policy = std::move(candidate);
      diag.accepted = true;
      diag.mean_kl = kl;
      diag.surrogate_after = sur;
      diag.step_size = scale;
      diag.backtracks = k;
      return out;
    }
  }
  diag.backtracks = cfg.backtrack_steps;
  return out;
}

/// Full-batch regression of the baseline toward the Monte Carlo returns with
/// Adam-scaled steps. A step that would raise the training MSE is rejected and
/// the learning rate halved, so the MSE never increases across epochs.
inline Mlp fit_baseline(const Mlp& baseline, const TrajectoryBatch& batch, const TrpoConfig& cfg) {
  detail::require(!batch.empty(), "fit_baseline needs a nonempty batch");
  Mlp net = baseline;
  if (cfg.baseline_epochs == 0) return net;
  const MseLoss loss{batch.features, batch.returns};
  Vector theta = net.flatten();
  Vector m = Vector::Zero(theta.size());
  Vector v = Vector::Zero(theta.size());
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  double lr = cfg.baseline_learn_rate;
  ValueAndGrad cur = value_and_grad(net, loss);
  int t = 0;  // Adam step count since the moments were last reset
  for (int epoch = 1; epoch <= cfg.baseline_epochs; ++epoch) {
    if (cur.grad.squaredNorm() == 0.0) break;
    ++t;
    m = kBeta1 * m + (1.0 - kBeta1) * cur.grad;
    v = kBeta2 * v + (1.0 - kBeta2) * cur.grad.cwiseProduct(cur.grad);
    const double c1 = 1.0 - std::pow(kBeta1, t);
    const double c2 = 1.0 - std::pow(kBeta2, t);
    const Vector step = (m / c1).array() / ((v / c2).array().sqrt() + kEps);
    bool accepted = false;
    for (int attempt = 0; attempt < 30 && !accepted; ++attempt) {
      const Vector trial = theta - lr * step;
      const Mlp trial_net = net.with_params(trial);
      const ValueAndGrad next = value_and_grad(trial_net, loss);
      if (std::isfinite(next.value) && next.value <= cur.value) {
        theta = trial;
        net = trial_net;
        cur = next;
        lr = std::min(cfg.baseline_learn_rate, 2.0 * lr);
        accepted = true;
      } else {
        lr *= 0.5;
      }
    }
    if (!accepted) {
      // Stale momentum points uphill; restart from the plain gradient.
      m.setZero();
      v.setZero();
      t = 0;
      lr = cfg.baseline_learn_rate;
    }
  }
  return net;
}

}  // namespace pivot

#endif  // PIVOT_TRPO_HPP_
