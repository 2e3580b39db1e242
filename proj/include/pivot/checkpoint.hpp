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

// Checkpoint file: a JSON document
//
//   {
//     "format": "pivot-checkpoint",
//     "version": 1,
//     "iteration": <completed TRPO iterations>,
//     "rng": {"scheme": "derive_seed/splitmix64", "master_seed": S, "next_iteration": N},
//     "policy":   {"layer_sizes": [...], "hidden_activation": "tanh",
//                  "params": [flat policy parameters]},
//     "baseline": {"layer_sizes": [...], "hidden_activation": "tanh",
//                  "params": [flat baseline parameters]}
//   }
//
// Parameters use the flat layout documented in policy.hpp and are written with
// round-trip precision. Every random stream of a run is derived from
// (master_seed, iteration, ...), so (master_seed, next_iteration) is the whole
// generator state needed to resume.

#ifndef PIVOT_CHECKPOINT_HPP_
#define PIVOT_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pivot/config.hpp"
#include "pivot/policy.hpp"

namespace pivot {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  GaussianPolicy policy;
  Mlp baseline;
  int iteration = 0;
  std::uint64_t master_seed = 0;
};

namespace detail {

inline Json encode_net(const MlpSpec& spec, const Vector& params) {
  Json j = Json::object();
  j["layer_sizes"] = spec.layer_sizes;
  j["hidden_activation"] = "tanh";
  j["params"] = std::vector<double>(params.data(), params.data() + params.size());
  return j;
}

inline std::pair<MlpSpec, Vector> decode_net(const Json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  for (const char* key : {"layer_sizes", "hidden_activation", "params"}) {
    if (!j.contains(key)) throw ConfigError(path + "." + key + ": missing");
  }
  if (j["hidden_activation"] != "tanh") throw ConfigError(path + ".hidden_activation: expected tanh");
  MlpSpec spec;
  try {
    spec.layer_sizes = j["layer_sizes"].get<std::vector<int>>();
  } catch (const Json::exception&) {
    throw ConfigError(path + ".layer_sizes: expected an integer array");
  }
  if (spec.layer_sizes.size() < 2) throw ConfigError(path + ".layer_sizes: too short");
  for (int s : spec.layer_sizes) {
    if (s < 1) throw ConfigError(path + ".layer_sizes: entries must be >= 1");
  }
  const Json& params = j["params"];
  if (!params.is_array()) throw ConfigError(path + ".params: expected an array");
  Vector v(static_cast<Eigen::Index>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].is_number()) throw ConfigError(path + ".params[" + std::to_string(i) + "]: expected a number");
    v[static_cast<Eigen::Index>(i)] = params[i].get<double>();
  }
  if (!v.allFinite()) throw ConfigError(path + ".params: non-finite value");
  return {spec, v};
}

}  // namespace detail

inline Json checkpoint_to_json(const Checkpoint& ck) {
  Json j = Json::object();
  j["format"] = "pivot-checkpoint";
  j["version"] = kCheckpointVersion;
  j["iteration"] = ck.iteration;
  j["rng"] = Json{{"scheme", "derive_seed/splitmix64"},
                  {"master_seed", ck.master_seed},
                  {"next_iteration", ck.iteration}};
  j["policy"] = detail::encode_net(ck.policy.mean_net.spec(), ck.policy.flatten());
  j["baseline"] = detail::encode_net(ck.baseline.spec(), ck.baseline.flatten());
  return j;
}

inline Checkpoint checkpoint_from_json(const Json& j) {
  if (!j.is_object() || j.value("format", "") != "pivot-checkpoint") {
    throw ConfigError("format: not a pivot checkpoint");
  }
  if (j.value("version", -1) != kCheckpointVersion) {
    throw ConfigError("version: unsupported checkpoint version");
  }
  Checkpoint ck;
  if (!j.contains("iteration") || !j["iteration"].is_number_integer() || j["iteration"].get<int>() < 0) {
    throw ConfigError("iteration: expected a non-negative integer");
  }
  ck.iteration = j["iteration"].get<int>();
  if (!j.contains("rng") || !j["rng"].contains("master_seed") ||
      !j["rng"]["master_seed"].is_number_unsigned()) {
    throw ConfigError("rng.master_seed: expected a non-negative integer");
  }
  ck.master_seed = j["rng"]["master_seed"].get<std::uint64_t>();
  if (!j.contains("policy")) throw ConfigError("policy: missing");
  if (!j.contains("baseline")) throw ConfigError("baseline: missing");

  auto [pspec, pparams] = detail::decode_net(j["policy"], "policy");
  Mlp pnet(pspec);
  const Eigen::Index n_log_std = pspec.output_dim();
  if (pparams.size() != pnet.num_params() + n_log_std) {
    throw ConfigError("policy.params: expected " + std::to_string(pnet.num_params() + n_log_std) +
                      " values, found " + std::to_string(pparams.size()));
  }
  ck.policy = GaussianPolicy(pnet, Vector::Zero(n_log_std));
  ck.policy.unflatten(pparams);

  auto [bspec, bparams] = detail::decode_net(j["baseline"], "baseline");
  ck.baseline = Mlp(bspec);
  if (bparams.size() != ck.baseline.num_params()) {
    throw ConfigError("baseline.params: expected " + std::to_string(ck.baseline.num_params()) +
                      " values, found " + std::to_string(bparams.size()));
  }
  ck.baseline.unflatten(bparams);
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  write_text_file(path, checkpoint_to_json(ck).dump(1) + "\n");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const Json j = read_json_file(path);
  try {
    return checkpoint_from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

/// Throws if the checkpoint networks do not match the config's architectures.
inline void check_compatible(const Checkpoint& ck, const RunConfig& cfg) {
  if (!(ck.policy.mean_net.spec() == cfg.policy.mlp)) {
    throw ConfigError("policy.layer_sizes: checkpoint architecture does not match config");
  }
  if (!(ck.baseline.spec() == cfg.baseline.mlp)) {
    throw ConfigError("baseline.layer_sizes: checkpoint architecture does not match config");
  }
}

}  // namespace pivot

#endif  // PIVOT_CHECKPOINT_HPP_
