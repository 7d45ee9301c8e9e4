/*
 * Copyright 2026 The filtopt Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "filtopt/io/equiv.hpp"
#include "filtopt/io/experiment.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

// Exit codes: 0 success, 1 usage, 2 data error, 3 divergence.
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDiverged = 3;

int cmd_simulate(const std::string& out_dir, filtopt::SimConfig cfg) {
  const auto data = filtopt::gen_dataset(cfg);
  filtopt::io::save_dataset(out_dir, data);
  long records = 0;
  for (const auto& f : data.tracks) records += static_cast<long>(f.size());
  std::printf("dataset written to %s (%d frames, %zu landmarks, %ld track records)\n",
              out_dir.c_str(), cfg.steps, data.world.landmarks.size(), records);
  return 0;
}

int cmd_run(const filtopt::io::ExperimentConfig& cfg) {
  const auto result = filtopt::io::run_experiment(cfg);
  std::printf("%s\n", result.metrics_json.c_str());
  if (result.diverged) {
    std::fprintf(stderr, "E_DIVERGE: estimator diverged (partial results written)\n");
    return kExitDiverged;
  }
  return 0;
}

int cmd_eval(const std::string& estimate, const std::string& gt, const std::string& out_dir) {
  const auto result = filtopt::io::evaluate_files(estimate, gt, out_dir);
  std::printf("%s\n", result.metrics_json.c_str());
  return 0;
}

int cmd_equiv(const std::string& kind, int trials, std::uint64_t seed) {
  std::vector<std::string> kinds =
      kind == "all" ? filtopt::io::equiv_kinds() : std::vector<std::string>{kind};
  bool all_pass = true;
  for (const auto& k : kinds) {
    const auto rep = filtopt::io::equiv_check(k, trials, seed);
    std::printf("%-13s trials=%-4d max_mean=%.3e max_cov=%.3e %s\n", rep.kind.c_str(),
                rep.trials, rep.max_mean_discrepancy, rep.max_cov_discrepancy,
                rep.pass ? "PASS" : "FAIL");
    for (const auto& [eps, dist] : rep.epsilon_study) {
      std::printf("  epsilon=%.0e frobenius_distance=%.6e\n", eps, dist);
    }
    if (!rep.epsilon_study.empty()) {
      std::printf("  epsilon limit convergence: %s\n",
                  rep.epsilon_monotone ? "monotone" : "NOT monotone");
    }
    all_pass = all_pass && rep.pass;
  }
  return all_pass ? 0 : kExitData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"filtopt: filters and smoothers as Gauss-Newton / marginalization schedules"};
  app.require_subcommand(1);

  // simulate ----------------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
  std::string sim_out = "dataset";
  std::string sim_model = "planar2d";
  filtopt::SimConfig sim_cfg;
  sim->add_option("--out", sim_out, "output directory");
  sim->add_option("--seed", sim_cfg.seed, "PRNG seed (no entropy source exists)");
  sim->add_option("--model", sim_model, "planar2d | stereo3d");
  sim->add_option("--steps", sim_cfg.steps, "number of frames");
  sim->add_option("--landmarks", sim_cfg.landmarks, "landmark count");
  sim->add_option("--max-range", sim_cfg.max_range, "planar visibility radius (m)");
  sim->add_option("--sigma-v", sim_cfg.sigma_v_std, "planar measurement noise std (m)");
  sim->add_option("--pixel-sigma", sim_cfg.pixel_sigma, "stereo pixel noise std");
  bool zero_noise = false;
  sim->add_flag("--zero-noise", zero_noise, "disable all injected noise");

  // run ----------------------------------------------------------------------
  auto* run = app.add_subcommand("run", "run an estimator on a dataset");
  filtopt::io::ExperimentConfig run_cfg;
  std::string run_estimator = "ekf";
  run->add_option("--dataset", run_cfg.dataset_dir, "dataset directory")->required();
  run->add_option("--out", run_cfg.out_dir, "output directory")->required();
  run->add_option("--estimator", run_estimator,
                  "ekf | iekf | swf | msckf | imsckf | keyframe | dead-reckoning");
  run->add_option("--n", run_cfg.schedule.window_n, "window size (swf/keyframe recent window)");
  run->add_option("--k", run_cfg.schedule.keyframe_k, "keyframe window size");
  run->add_option("--n-max", run_cfg.schedule.n_max, "MSCKF pose bound");
  run->add_option("--gn-iters", run_cfg.schedule.gn_iters, "Gauss-Newton steps per frame (swf)");
  run->add_option("--max-gn", run_cfg.schedule.max_gn, "iteration cap for iterated variants");
  run->add_option("--match-ratio", run_cfg.schedule.match_ratio, "keyframe promotion threshold");
  run->add_option("--seed", run_cfg.seed, "trial seed base");
  run->add_option("--trials", run_cfg.trials, "Monte-Carlo re-simulation trials");

  // eval ----------------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "evaluate an estimate against ground truth");
  std::string eval_est, eval_gt, eval_out;
  eval->add_option("--estimate", eval_est, "estimate csv")->required();
  eval->add_option("--ground-truth", eval_gt, "ground truth csv")->required();
  eval->add_option("--out", eval_out, "output directory (optional)");

  // equiv-check -----------------------------------------------------------------
  auto* equiv = app.add_subcommand("equiv-check", "machine-check the filter/optimizer theorems");
  std::string equiv_kind = "all";
  int equiv_trials = 100;
  std::uint64_t equiv_seed = 42;
  equiv->add_option("--kind", equiv_kind,
                    "ekf_aug | ekf_update | ekf_prop | msckf_aug | msckf_update | msckf_prop | all");
  equiv->add_option("--trials", equiv_trials, "trials per kind");
  equiv->add_option("--seed", equiv_seed, "PRNG seed");

  auto* version = app.add_subcommand("version", "print version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "E_USAGE: %s\n", e.what());
    return kExitUsage;
  }

  try {
    if (sim->parsed()) {
      if (sim_model == "planar2d") {
        sim_cfg.model = filtopt::ModelKind::planar2d;
      } else if (sim_model == "stereo3d") {
        sim_cfg.model = filtopt::ModelKind::stereo3d;
      } else {
        std::fprintf(stderr, "E_USAGE: unknown model '%s'\n", sim_model.c_str());
        return kExitUsage;
      }
      if (zero_noise) {
        sim_cfg.sigma_w_diag.setZero();
        sim_cfg.sigma_v_std = 0.0;
        sim_cfg.pixel_sigma = 0.0;
        sim_cfg.imu_noise = {};
      }
      return cmd_simulate(sim_out, sim_cfg);
    }
    if (run->parsed()) {
      run_cfg.schedule.kind = filtopt::EstimatorSchedule::parse_kind(run_estimator);
      if (run_cfg.trials < 1) {
        std::fprintf(stderr, "E_USAGE: --trials must be >= 1\n");
        return kExitUsage;
      }
      return cmd_run(run_cfg);
    }
    if (eval->parsed()) return cmd_eval(eval_est, eval_gt, eval_out);
    if (equiv->parsed()) {
      if (equiv_trials < 1) {
        std::fprintf(stderr, "E_USAGE: --trials must be >= 1\n");
        return kExitUsage;
      }
      return cmd_equiv(equiv_kind, equiv_trials, equiv_seed);
    }
    if (version->parsed()) {
      std::printf("filtopt %s\n", kVersion);
      return 0;
    }
  } catch (const filtopt::DataError& e) {
    std::fprintf(stderr, "E_DATA: %s\n", e.what());
    return kExitData;
  } catch (const filtopt::DivergenceError& e) {
    std::fprintf(stderr, "E_DIVERGE: %s\n", e.what());
    return kExitDiverged;
  } catch (const filtopt::StructureError& e) {
    std::fprintf(stderr, "E_USAGE: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "E_DATA: %s\n", e.what());
    return kExitData;
  }
  return 0;
}
