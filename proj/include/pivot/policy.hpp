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

// Fully connected tanh networks with hand-written reverse- and forward-mode
// differentiation, and the diagonal Gaussian policy built on top of them.
//
// Flat parameter layout (used by gradients, checkpoints and the optimizer):
//   for each layer k = 0..L-1:  W_k in column-major order (out x in), then b_k
//   then, for a Gaussian policy, log_std (one entry per action dimension).

#ifndef PIVOT_POLICY_HPP_
#define PIVOT_POLICY_HPP_

#include <cmath>
#include <cstddef>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "pivot/dynamics.hpp"
#include "pivot/rng.hpp"

namespace pivot {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct MlpSpec {
  std::vector<int> layer_sizes;

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  int num_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }

  Eigen::Index num_params() const {
    Eigen::Index n = 0;
    for (int k = 0; k < num_layers(); ++k) {
      n += static_cast<Eigen::Index>(layer_sizes[k + 1]) * (layer_sizes[k] + 1);
    }
    return n;
  }

  void validate(int expected_input, const std::string& name, bool require_hidden = true) const {
    detail::require(layer_sizes.size() >= 2, name + ".layer_sizes needs at least 2 entries");
    if (require_hidden) {
      detail::require(layer_sizes.size() >= 3, name + ".layer_sizes needs at least 1 hidden layer");
    }
    for (int s : layer_sizes) detail::require(s >= 1, name + ".layer_sizes entries must be >= 1");
    detail::require(layer_sizes.front() == expected_input,
                    name + ".layer_sizes[0] must equal the observation dimension");
  }

  bool operator==(const MlpSpec&) const = default;
};

/// Activations saved by a forward pass, needed for backprop and JVPs.
struct MlpTape {
  std::vector<Matrix> activations;  // activations[0] = input, back() = output
};

/// Multilayer perceptron, tanh hidden units and a linear output layer. Batched
/// inputs are matrices with one sample per column.
class Mlp {
 public:
  Mlp() = default;

  explicit Mlp(MlpSpec spec) : spec_(std::move(spec)) {
    for (int k = 0; k < spec_.num_layers(); ++k) {
      weights_.push_back(Matrix::Zero(spec_.layer_sizes[k + 1], spec_.layer_sizes[k]));
      biases_.push_back(Vector::Zero(spec_.layer_sizes[k + 1]));
    }
  }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, last layer
  /// scaled by output_scale.
  static Mlp initialized(const MlpSpec& spec, Rng& rng, double output_scale = 0.01) {
    Mlp net(spec);
    for (int k = 0; k < spec.num_layers(); ++k) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(spec.layer_sizes[k]));
      std::uniform_real_distribution<double> u(-bound, bound);
      Matrix& w = net.weights_[static_cast<std::size_t>(k)];
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = u(rng);
      }
      if (k == spec.num_layers() - 1) w *= output_scale;
    }
    return net;
  }

  const MlpSpec& spec() const { return spec_; }
  Eigen::Index num_params() const { return spec_.num_params(); }
  Matrix& weight(int k) { return weights_[static_cast<std::size_t>(k)]; }
  const Matrix& weight(int k) const { return weights_[static_cast<std::size_t>(k)]; }
  Vector& bias(int k) { return biases_[static_cast<std::size_t>(k)]; }
  const Vector& bias(int k) const { return biases_[static_cast<std::size_t>(k)]; }

  Matrix forward(const Matrix& x, MlpTape* tape = nullptr) const {
    check_input(x);
    if (tape) {
      tape->activations.clear();
      tape->activations.push_back(x);
    }
    Matrix h = x;
    const int last = spec_.num_layers() - 1;
    for (int k = 0; k <= last; ++k) {
      Matrix z = weight(k) * h;
      z.colwise() += bias(k);
      h = (k < last) ? Matrix(z.array().tanh()) : std::move(z);
      if (tape) tape->activations.push_back(h);
    }
    return h;
  }

  Vector forward(const Vector& x) const { return forward(Matrix(x)).col(0); }

  /// Reverse mode: given dLoss/dOutput (same shape as the output), returns
  /// dLoss/dParams in flat layout.
  Vector backward(const MlpTape& tape, const Matrix& output_grad) const {
    Vector grad(num_params());
    const int last = spec_.num_layers() - 1;
    Matrix delta = output_grad;
    std::vector<std::pair<Matrix, Vector>> layer_grads(static_cast<std::size_t>(last + 1));
    for (int k = last; k >= 0; --k) {
      if (k < last) {
        const Matrix& h = tape.activations[static_cast<std::size_t>(k + 1)];
        delta = delta.cwiseProduct(Matrix((1.0 - h.array().square())));
      }
      const Matrix& in = tape.activations[static_cast<std::size_t>(k)];
      layer_grads[static_cast<std::size_t>(k)] = {delta * in.transpose(), delta.rowwise().sum()};
      if (k > 0) delta = weight(k).transpose() * delta;
    }
    Eigen::Index offset = 0;
    for (const auto& [gw, gb] : layer_grads) {
      grad.segment(offset, gw.size()) = Eigen::Map<const Vector>(gw.data(), gw.size());
      offset += gw.size();
      grad.segment(offset, gb.size()) = gb;
      offset += gb.size();
    }
    return grad;
  }

  /// Forward mode: directional derivative of the outputs along a flat
  /// parameter direction, evaluated at the taped inputs.
  Matrix jvp(const MlpTape& tape, const Vector& direction) const {
    const Mlp dir = with_params(direction);
    const int last = spec_.num_layers() - 1;
    Matrix dh = Matrix::Zero(tape.activations[0].rows(), tape.activations[0].cols());
    for (int k = 0; k <= last; ++k) {
      const Matrix& in = tape.activations[static_cast<std::size_t>(k)];
      Matrix dz = dir.weight(k) * in + weight(k) * dh;
      dz.colwise() += dir.bias(k);
      if (k < last) {
        const Matrix& h = tape.activations[static_cast<std::size_t>(k + 1)];
        dh = dz.cwiseProduct(Matrix(1.0 - h.array().square()));
      } else {
        dh = std::move(dz);
      }
    }
    return dh;
  }

  Vector flatten() const {
    Vector out(num_params());
    Eigen::Index offset = 0;
    for (int k = 0; k < spec_.num_layers(); ++k) {
      const Matrix& w = weight(k);
      out.segment(offset, w.size()) = Eigen::Map<const Vector>(w.data(), w.size());
      offset += w.size();
      out.segment(offset, bias(k).size()) = bias(k);
      offset += bias(k).size();
    }
    return out;
  }

  void unflatten(const Vector& flat) {
    detail::require(flat.size() == num_params(), "parameter vector size does not match network");
    Eigen::Index offset = 0;
    for (int k = 0; k < spec_.num_layers(); ++k) {
      Matrix& w = weight(k);
      w = Eigen::Map<const Matrix>(flat.data() + offset, w.rows(), w.cols());
      offset += w.size();
      bias(k) = flat.segment(offset, bias(k).size());
      offset += bias(k).size();
    }
  }

  Mlp with_params(const Vector& flat) const {
    Mlp out(spec_);
    out.unflatten(flat);
    return out;
  }

 private:
  void check_input(const Matrix& x) const {
    if (x.rows() != spec_.input_dim()) {
      throw InvariantError("network input has " + std::to_string(x.rows()) + " rows, expected " +
                           std::to_string(spec_.input_dim()));
    }
  }

  MlpSpec spec_;
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
};

/// Diagonal Gaussian policy with a state-independent learnable log std.
struct GaussianPolicy {
  Mlp mean_net;
  Vector log_std;

  GaussianPolicy() = default;
  GaussianPolicy(Mlp net, Vector ls) : mean_net(std::move(net)), log_std(std::move(ls)) {
    detail::require(log_std.size() == mean_net.spec().output_dim(),
                    "log_std size must equal the action dimension");
  }

  static GaussianPolicy initialized(const MlpSpec& spec, Rng& rng, double init_log_std = 0.0) {
    return {Mlp::initialized(spec, rng), Vector::Constant(spec.output_dim(), init_log_std)};
  }

  int action_dim() const { return static_cast<int>(log_std.size()); }
  Eigen::Index num_params() const { return mean_net.num_params() + log_std.size(); }

  Vector flatten() const {
    Vector out(num_params());
    out << mean_net.flatten(), log_std;
    return out;
  }

  void unflatten(const Vector& flat) {
    detail::require(flat.size() == num_params(), "parameter vector size does not match policy");
    mean_net.unflatten(flat.head(mean_net.num_params()));
    log_std = flat.tail(log_std.size());
  }

  GaussianPolicy with_params(const Vector& flat) const {
    GaussianPolicy out = *this;
    out.unflatten(flat);
    return out;
  }

  bool finite() const { return flatten().allFinite(); }
};

struct GaussianPolicyOutput {
  Vector mean;
  Vector std;
};

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

inline Vector forward_mean(const GaussianPolicy& policy, const Vector& features) {
  return policy.mean_net.forward(features);
}

inline GaussianPolicyOutput policy_output(const GaussianPolicy& policy, const Vector& features) {
  return {forward_mean(policy, features), policy.log_std.array().exp()};
}

/// Draws a ~ N(mean, diag(std^2)).
inline Vector sample_action(const GaussianPolicy& policy, const Vector& features, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector a = forward_mean(policy, features);
  for (Eigen::Index i = 0; i < a.size(); ++i) a[i] += std::exp(policy.log_std[i]) * normal(rng);
  return a;
}

/// Log density of a diagonal Gaussian with the given mean and log std.
inline double gaussian_log_prob(const Vector& mean, const Vector& log_std, const Vector& action) {
  detail::require(action.size() == mean.size(), "action dimension mismatch");
  double lp = 0.0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const double z = (action[i] - mean[i]) * std::exp(-log_std[i]);
    lp += -0.5 * z * z - log_std[i] - kHalfLog2Pi;
  }
  return lp;
}

inline double log_prob(const GaussianPolicy& policy, const Vector& features, const Vector& action) {
  return gaussian_log_prob(forward_mean(policy, features), policy.log_std, action);
}

/// Log densities for a batch (features and actions one sample per column).
inline Vector log_prob_batch(const GaussianPolicy& policy, const Matrix& features,
                             const Matrix& actions, const Matrix* means = nullptr) {
  const Matrix mu = means ? *means : policy.mean_net.forward(features);
  detail::require(actions.rows() == mu.rows() && actions.cols() == mu.cols(),
                  "action batch shape mismatch");
  const Vector inv_std = (-policy.log_std).array().exp();
  const double norm = policy.log_std.sum() + kHalfLog2Pi * static_cast<double>(mu.rows());
  Vector out(mu.cols());
  for (Eigen::Index c = 0; c < mu.cols(); ++c) {
    const Vector z = (actions.col(c) - mu.col(c)).cwiseProduct(inv_std);
    out[c] = -0.5 * z.squaredNorm() - norm;
  }
  return out;
}

/// KL(old || new) for one state, diagonal Gaussians.
inline double gaussian_kl(const Vector& mean_old, const Vector& log_std_old, const Vector& mean_new,
                          const Vector& log_std_new) {
  double kl = 0.0;
  for (Eigen::Index i = 0; i < mean_old.size(); ++i) {
    const double var_old = std::exp(2.0 * log_std_old[i]);
    const double var_new = std::exp(2.0 * log_std_new[i]);
    const double dm = mean_old[i] - mean_new[i];
    kl += log_std_new[i] - log_std_old[i] + (var_old + dm * dm) / (2.0 * var_new) - 0.5;
  }
  return kl;
}

/// Mean over the batch columns of KL(pi_old(.|s) || pi_new(.|s)).
inline double kl_mean(const GaussianPolicy& old_policy, const GaussianPolicy& new_policy,
                      const Matrix& features) {
  detail::require(old_policy.action_dim() == new_policy.action_dim(), "action dimension mismatch");
  if (features.cols() == 0) return 0.0;
  const Matrix mu_old = old_policy.mean_net.forward(features);
  const Matrix mu_new = new_policy.mean_net.forward(features);
  double total = 0.0;
  for (Eigen::Index c = 0; c < features.cols(); ++c) {
    total += gaussian_kl(mu_old.col(c), old_policy.log_std, mu_new.col(c), new_policy.log_std);
  }
  return total / static_cast<double>(features.cols());
}

// ---------------------------------------------------------------------------
// Scalar losses and their exact gradients.

struct ValueAndGrad {
  double value = 0.0;
  Vector grad;
};

/// Importance-weighted surrogate: mean_i exp(logp_new_i - logp_old_i) * adv_i.
struct SurrogateLoss {
  const Matrix& features;
  const Matrix& actions;
  const Vector& log_prob_old;
  const Vector& advantages;
};

/// Mean KL(old || params) over the batch states.
struct KlLoss {
  const GaussianPolicy& old_policy;
  const Matrix& features;
};

/// Mean squared error between network output and targets.
struct MseLoss {
  const Matrix& features;
  const Vector& targets;
};

inline ValueAndGrad value_and_grad(const GaussianPolicy& policy, const SurrogateLoss& loss) {
  const auto n = loss.features.cols();
  detail::require(n > 0, "surrogate needs a nonempty batch");
  MlpTape tape;
  const Matrix mu = policy.mean_net.forward(loss.features, &tape);
  const Vector lp = log_prob_batch(policy, loss.features, loss.actions, &mu);
  const Vector inv_var = (-2.0 * policy.log_std).array().exp();
  const double inv_n = 1.0 / static_cast<double>(n);

  ValueAndGrad out;
  Matrix d_mu(mu.rows(), n);
  Vector d_log_std = Vector::Zero(policy.log_std.size());
  for (Eigen::Index c = 0; c < n; ++c) {
    const double w = std::exp(lp[c] - loss.log_prob_old[c]) * loss.advantages[c];
    out.value += w;
    const Vector diff = loss.actions.col(c) - mu.col(c);
    d_mu.col(c) = w * inv_n * diff.cwiseProduct(inv_var);
    d_log_std += w * inv_n * (diff.array().square() * inv_var.array() - 1.0).matrix();
  }
  out.value *= inv_n;
  out.grad.resize(policy.num_params());
  out.grad << policy.mean_net.backward(tape, d_mu), d_log_std;
  return out;
}

inline ValueAndGrad value_and_grad(const GaussianPolicy& policy, const KlLoss& loss) {
  const auto n = loss.features.cols();
  detail::require(n > 0, "KL loss needs a nonempty batch");
  MlpTape tape;
  const Matrix mu = policy.mean_net.forward(loss.features, &tape);
  const Matrix mu_old = loss.old_policy.mean_net.forward(loss.features);
  const Vector var_old = (2.0 * loss.old_policy.log_std).array().exp();
  const Vector inv_var = (-2.0 * policy.log_std).array().exp();
  const double inv_n = 1.0 / static_cast<double>(n);

  ValueAndGrad out;
  Matrix d_mu(mu.rows(), n);
  Vector d_log_std = Vector::Zero(policy.log_std.size());
  for (Eigen::Index c = 0; c < n; ++c) {
    out.value += gaussian_kl(mu_old.col(c), loss.old_policy.log_std, mu.col(c), policy.log_std);
    const Vector dm = mu.col(c) - mu_old.col(c);
    d_mu.col(c) = inv_n * dm.cwiseProduct(inv_var);
    d_log_std += inv_n * (1.0 - ((var_old + dm.cwiseProduct(dm)).array() * inv_var.array())).matrix();
  }
  out.value *= inv_n;
  out.grad.resize(policy.num_params());
  out.grad << policy.mean_net.backward(tape, d_mu), d_log_std;
  return out;
}

inline ValueAndGrad value_and_grad(const Mlp& net, const MseLoss& loss) {
  const auto n = loss.features.cols();
  detail::require(n > 0 && loss.targets.size() == n, "MSE loss needs matching nonempty batch");
  detail::require(net.spec().output_dim() == 1, "MSE loss expects a scalar-output network");
  MlpTape tape;
  const Matrix out_values = net.forward(loss.features, &tape);
  const Vector residual = out_values.row(0).transpose() - loss.targets;
  const double inv_n = 1.0 / static_cast<double>(n);
  ValueAndGrad out;
  out.value = residual.squaredNorm() * inv_n;
  const Matrix d_out = (2.0 * inv_n) * residual.transpose();
  out.grad = net.backward(tape, d_out);
  return out;
}

/// Gradient of a scalar loss with respect to all parameters in flat layout.
template <typename Params, typename Loss>
Vector grad(const Params& params, const Loss& loss) {
  return value_and_grad(params, loss).grad;
}

/// Fisher-vector product: Hessian of mean KL(old || theta) at theta = old,
/// applied to v, plus damping * v. Uses the Gauss-Newton identity
/// H = J^T M J with M = diag(1/sigma^2) for the mean outputs and 2 for each
/// log std, which is exact at theta = old.
inline Vector fisher_vector_product(const GaussianPolicy& policy, const Matrix& features,
                                    const Vector& v, double damping = 0.0) {
  detail::require(v.size() == policy.num_params(), "FVP direction has wrong dimension");
  const auto n = features.cols();
  detail::require(n > 0, "FVP needs a nonempty batch");
  const Eigen::Index net_params = policy.mean_net.num_params();
  MlpTape tape;
  policy.mean_net.forward(features, &tape);
  const Matrix d_mu = policy.mean_net.jvp(tape, v.head(net_params));
  const Vector inv_var = (-2.0 * policy.log_std).array().exp();
  const double inv_n = 1.0 / static_cast<double>(n);
  const Matrix weighted = inv_n * (inv_var.asDiagonal() * d_mu);
  Vector out(policy.num_params());
  out << policy.mean_net.backward(tape, weighted), 2.0 * v.tail(policy.log_std.size());
  out += damping * v;
  return out;
}

}  // namespace pivot

#endif  // PIVOT_POLICY_HPP_
