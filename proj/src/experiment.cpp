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
#include "filtopt/io/experiment.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace filtopt::io {

namespace fs = std::filesystem;
using nlohmann::json;

Trajectory ground_truth_trajectory(const SimDataset& data) {
  Trajectory out;
  for (const auto& g : data.world.trajectory) {
    if (data.config.model == ModelKind::planar2d) {
      out.push_back(planar_pose(g.t, Vec3(g.state)));
    } else {
      TrajectoryPose p;
      p.t = g.t;
      p.p = Vec3(g.state.head<3>());
      p.q = UnitQuaternion(g.state[3], Vec3(g.state.segment<3>(4))).normalized();
      out.push_back(p);
    }
  }
  return out;
}

namespace {

struct EvalOutput {
  RmseResult rmse;
  std::vector<DriftPoint> drift;
};

// Align (when possible) and score.
EvalOutput evaluate(const Trajectory& estimate, const Trajectory& gt) {
  Trajectory aligned = estimate;
  try {
    aligned = apply_alignment(umeyama_align(estimate, gt), estimate);
  } catch (const NumericalError&) {
    // Degenerate association (too few/collinear pairs): score unaligned.
  }
  EvalOutput out;
  out.rmse = rmse(aligned, gt);
  out.drift = drift_curve(aligned, gt);
  return out;
}

void write_drift(const std::string& path, const std::vector<DriftPoint>& drift) {
  std::ofstream out(path);
  out << kDriftSchema << "\n# distance_m,drift_m\n";
  for (const auto& d : drift) {
    out << format_double(d.distance_m) << "," << format_double(d.drift_m) << "\n";
  }
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();
  cfg.schedule.validate();
  if (cfg.trials < 1) throw StructureError("run_experiment: trials must be >= 1");

  const SimDataset data = load_dataset(cfg.dataset_dir);
  fs::create_directories(cfg.out_dir);
  std::ofstream log((fs::path(cfg.out_dir) / "run.log").string());
  auto logger = [&log](const std::string& msg) { log << msg << "\n"; };

  const bool planar = data.config.model == ModelKind::planar2d;
  std::vector<double> times;
  for (const auto& g : data.world.trajectory) times.push_back(g.t);

  const auto model = make_model(data);
  logger("estimator=" + EstimatorSchedule::kind_name(cfg.schedule.kind));
  logger("dataset=" + cfg.dataset_dir);
  const ScheduleRunResult run = run_schedule(cfg.schedule, *model, data.tracks, times, logger);
  if (run.diverged) logger("DIVERGED after " + std::to_string(run.trajectory.size()) + " frames");

  const Trajectory gt = ground_truth_trajectory(data);
  const EvalOutput eval = evaluate(run.trajectory, gt);

  save_trajectory((fs::path(cfg.out_dir) / "estimate.csv").string(), run.trajectory, planar);
  write_drift((fs::path(cfg.out_dir) / "drift.csv").string(), eval.drift);

  ExperimentResult out;
  out.rmse = eval.rmse;
  out.drift = eval.drift;
  out.diverged = run.diverged;
  out.gn_steps = run.gn_steps;
  out.marginalizations = run.marginalizations;
  out.features_dropped = run.features_dropped;

  json j;
  j["schema"] = "filtopt:metrics:v1";
  j["estimator"] = EstimatorSchedule::kind_name(cfg.schedule.kind);
  j["dataset"] = cfg.dataset_dir;
  j["seed"] = cfg.seed;
  j["diverged"] = out.diverged;
  j["frames"] = run.trajectory.size();
  j["rmse_translation_m"] = out.rmse.translation_m;
  j["rmse_rotation_deg"] = out.rmse.rotation_deg;
  j["associated_pairs"] = out.rmse.pairs;
  j["gn_steps"] = out.gn_steps;
  j["marginalizations"] = out.marginalizations;
  j["features_dropped"] = out.features_dropped;
  {
    json drift = json::array();
    for (const auto& d : eval.drift) drift.push_back({d.distance_m, d.drift_m});
    j["drift"] = drift;
  }

  // Monte-Carlo trials: re-simulate with derived seeds, merge by trial index.
  if (cfg.trials > 1) {
    json trials = json::array();
    for (int i = 0; i < cfg.trials; ++i) {
      SimConfig sim_cfg = data.config;
      sim_cfg.seed = cfg.seed + static_cast<std::uint64_t>(i);
      const SimDataset trial_data = gen_dataset(sim_cfg);
      const auto trial_model = make_model(trial_data);
      std::vector<double> trial_times;
      for (const auto& g : trial_data.world.trajectory) trial_times.push_back(g.t);
      const auto trial_run =
          run_schedule(cfg.schedule, *trial_model, trial_data.tracks, trial_times, logger);
      const auto trial_eval = evaluate(trial_run.trajectory, ground_truth_trajectory(trial_data));
      trials.push_back({{"trial", i},
                        {"seed", sim_cfg.seed},
                        {"diverged", trial_run.diverged},
                        {"rmse_translation_m", trial_eval.rmse.translation_m},
                        {"rmse_rotation_deg", trial_eval.rmse.rotation_deg}});
    }
    j["trials"] = trials;
  }

  out.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  j["runtime_seconds"] = out.runtime_seconds;

  out.metrics_json = j.dump(2);
  std::ofstream((fs::path(cfg.out_dir) / "metrics.json").string()) << out.metrics_json << "\n";
  logger("rmse_translation_m=" + std::to_string(out.rmse.translation_m));
  logger("rmse_rotation_deg=" + std::to_string(out.rmse.rotation_deg));
  return out;
}

ExperimentResult evaluate_files(const std::string& estimate_path, const std::string& gt_path,
                                const std::string& out_dir) {
  const Trajectory est = load_trajectory(estimate_path);
  const Trajectory gt = load_trajectory(gt_path);
  const EvalOutput eval = evaluate(est, gt);

  ExperimentResult out;
  out.rmse = eval.rmse;
  out.drift = eval.drift;

  json j;
  j["schema"] = "filtopt:metrics:v1";
  j["estimate"] = estimate_path;
  j["ground_truth"] = gt_path;
  j["rmse_translation_m"] = out.rmse.translation_m;
  j["rmse_rotation_deg"] = out.rmse.rotation_deg;
  j["associated_pairs"] = out.rmse.pairs;
  {
    json drift = json::array();
    for (const auto& d : eval.drift) drift.push_back({d.distance_m, d.drift_m});
    j["drift"] = drift;
  }
  out.metrics_json = j.dump(2);

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream((fs::path(out_dir) / "metrics.json").string()) << out.metrics_json << "\n";
    write_drift((fs::path(out_dir) / "drift.csv").string(), eval.drift);
  }
  return out;
}

}  // namespace filtopt::io
