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

// pivot: train and evaluate pivoting policies from a JSON run config.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pivot/commands.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> checkpoint;
  std::optional<int> iterations;
  std::optional<double> init_deg;
  std::optional<double> target_deg;
  int workers = 1;
};

pivot::RunConfig resolve(const Overrides& o) {
  pivot::RunConfig cfg = o.config_path.empty()
                             ? pivot::default_run_config(o.preset.empty() ? "tool1" : o.preset)
                             : pivot::load_run_config(o.config_path);
  if (!o.config_path.empty() && !o.preset.empty()) {
    throw pivot::ConfigError("--preset: cannot be combined with --config; set tool_preset in the file");
  }
  if (o.seed) cfg.master_seed = *o.seed;
  if (o.out) cfg.output_dir = *o.out;
  if (o.iterations) cfg.iterations = *o.iterations;
  if (o.init_deg) cfg.rollout.init_deg = *o.init_deg;
  if (o.target_deg) cfg.rollout.target_deg = *o.target_deg;
  try {
    cfg.validate();
  } catch (const pivot::InvariantError& e) {
    throw pivot::ConfigError(e.what());
  }
  if (cfg.tool_preset == "tool2") {
    std::cerr << "warning: tool2 preset reuses the tool-1 friction values\n";
  }
  return cfg;
}

std::optional<std::filesystem::path> checkpoint_arg(const Overrides& o) {
  if (!o.checkpoint) return std::nullopt;
  return std::filesystem::path(*o.checkpoint);
}

void print_metrics(const pivot::EvalMetrics& m) {
  std::printf("success_rate %.4f  avg_steps_to_goal %.2f  avg_reward %.4f  episodes %d\n",
              m.success_rate, m.avg_steps_to_goal, m.avg_reward, m.n_episodes);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pivoting gripper simulator and TRPO trainer"};
  app.require_subcommand(1);
  Overrides o;

  const auto common = [&o](CLI::App* sub, bool with_checkpoint) {
    sub->add_option("--config", o.config_path, "Run config JSON")->check(CLI::ExistingFile);
    sub->add_option("--preset", o.preset, "Default tool preset when no config is given")
        ->check(CLI::IsMember({"tool1", "tool2"}));
    sub->add_option("--seed", o.seed, "Override master_seed");
    sub->add_option("--out", o.out, "Override output_dir");
    sub->add_option("--workers", o.workers, "Rollout worker threads")->check(CLI::PositiveNumber);
    if (with_checkpoint) {
      sub->add_option("--checkpoint", o.checkpoint, "Checkpoint to load")->check(CLI::ExistingFile);
    }
  };

  auto* train = app.add_subcommand("train", "Run TRPO training");
  common(train, true);
  train->add_option("--iterations", o.iterations, "Override iterations")->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  common(eval, true);
  auto* sweep = app.add_subcommand("sweep", "Friction multiplier sweep");
  common(sweep, true);
  auto* cycle = app.add_subcommand("cycle", "Sequential target cycle");
  common(cycle, true);
  auto* rollout = app.add_subcommand("rollout", "Dump one trajectory as CSV");
  common(rollout, true);
  rollout->add_option("--init-deg", o.init_deg, "Initial tool angle in degrees");
  rollout->add_option("--target-deg", o.target_deg, "Target tool angle in degrees");
  auto* print = app.add_subcommand("print-config", "Print the resolved config");
  common(print, false);
  print->add_option("--iterations", o.iterations, "Override iterations")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    const pivot::RunConfig cfg = resolve(o);
    const auto ckpt = checkpoint_arg(o);
    if (*print) {
      std::cout << pivot::run_config_to_json(cfg).dump(2) << '\n';
    } else if (*train) {
      pivot::TrainOptions opts;
      opts.workers = o.workers;
      opts.resume_from = ckpt;
      opts.on_row = [](const pivot::TrainingLogRow& r) {
        std::printf("iter %4d  return %9.4f  success %6.3f  kl %.5f  accepted %d\n", r.iteration,
                    r.avg_return, r.evaluated() ? r.success_rate : -1.0, r.mean_kl,
                    r.step_accepted ? 1 : 0);
        std::fflush(stdout);
      };
      const auto result = pivot::cmd_train(cfg, opts);
      std::cout << "final checkpoint: " << result.final_checkpoint.string() << '\n';
    } else if (*eval) {
      print_metrics(pivot::cmd_eval(cfg, ckpt, o.workers));
    } else if (*sweep) {
      for (const auto& row : pivot::cmd_sweep(cfg, ckpt, o.workers)) {
        std::printf("x%-5g ", row.multiplier);
        print_metrics(row.metrics);
      }
    } else if (*cycle) {
      for (const auto& r : pivot::cmd_cycle(cfg, ckpt)) {
        std::printf("%7.1f -> %7.1f  %s  steps %4d  final_error %.2f deg\n", r.from_deg, r.target_deg,
                    r.reached ? "reached" : "missed ", r.steps, r.final_error_deg);
      }
    } else if (*rollout) {
      std::cout << pivot::cmd_rollout(cfg, ckpt).string() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
