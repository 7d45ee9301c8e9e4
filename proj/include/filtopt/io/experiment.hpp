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
#pragma once

#include <string>

#include "filtopt/estimators/schedule.hpp"
#include "filtopt/io/dataset.hpp"

namespace filtopt::io {

struct ExperimentConfig {
  EstimatorSchedule schedule;
  std::string dataset_dir;
  std::string out_dir;
  std::uint64_t seed = 42;  // trial seed base (re-simulation trials)
  int trials = 1;
};

struct ExperimentResult {
  RmseResult rmse;
  std::vector<DriftPoint> drift;
  bool diverged = false;
  long gn_steps = 0;
  long marginalizations = 0;
  long features_dropped = 0;
  double runtime_seconds = 0.0;
  std::string metrics_json;  // serialized metrics (written to metrics.json)
};

// Loads the dataset, runs the schedule, aligns against ground truth, and
// writes estimate.csv, metrics.json, drift.csv and run.log under out_dir.
// With trials > 1, re-simulates the dataset with derived seeds (seed + trial
// index) and reports per-trial RMSE merged by trial index.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Evaluate an estimate file against a ground-truth file (alignment + RMSE +
// drift curve); writes metrics.json and drift.csv when out_dir is nonempty.
ExperimentResult evaluate_files(const std::string& estimate_path, const std::string& gt_path,
                                const std::string& out_dir);

Trajectory ground_truth_trajectory(const SimDataset& data);

}  // namespace filtopt::io
