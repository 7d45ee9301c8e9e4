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

#include "filtopt/estimators/ekf.hpp"
#include "filtopt/estimators/msckf.hpp"
#include "filtopt/estimators/window.hpp"
#include "filtopt/metrics.hpp"

namespace filtopt {

// Declarative policy turning the two primitives into the estimator zoo.
struct EstimatorSchedule {
  enum class Kind { ekf, iekf, swf, msckf, imsckf, keyframe, dead_reckoning };
  Kind kind = Kind::ekf;
  int window_n = 5;        // swf window / keyframe recent window
  int keyframe_k = 5;      // retained keyframes
  int n_max = 5;           // msckf pose bound
  int gn_iters = 1;        // steps per frame for swf
  int max_gn = 25;         // cap for the iterated variants
  double tol = 1e-9;
  double match_ratio = 0.6;

  void validate() const;
  static Kind parse_kind(const std::string& name);
  static std::string kind_name(Kind k);
  // The iterated variants run Gauss-Newton to convergence.
  bool iterated() const { return kind == Kind::iekf || kind == Kind::imsckf; }
};

struct ScheduleRunResult {
  Trajectory trajectory;  // partial when diverged
  long gn_steps = 0;
  long marginalizations = 0;
  long features_dropped = 0;
  bool diverged = false;
};

// Dispatch a schedule over a model and measurement stream.  Frame timestamps
// are taken from `times` (size must match frames).  ekf/iekf require the
// planar model.
ScheduleRunResult run_schedule(const EstimatorSchedule& sched, const SlamModel& model,
                               const Frames& frames, const std::vector<double>& times,
                               const std::function<void(const std::string&)>& log = {});

// Trajectory pose from a model state (planar state or IMU state).
TrajectoryPose state_to_pose(double t, const ManifoldPoint& state);

}  // namespace filtopt
