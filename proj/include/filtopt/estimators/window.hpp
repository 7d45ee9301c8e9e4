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

#include <deque>
#include <functional>
#include <map>
#include <set>

#include "filtopt/models.hpp"
#include "filtopt/optimizer.hpp"

namespace filtopt {

struct KeyframePolicy {
  int recent_n = 3;         // recent-frame window
  int keyframe_k = 5;       // retained keyframes
  double match_ratio = 0.6; // promote when overlap with the newest keyframe drops below
};

struct WindowOptions {
  int window_n = 5;     // SWF window (ignored in keyframe mode)
  int gn_iters = 1;     // Gauss-Newton steps per frame (1 = filter-like)
  bool until_convergence = false;
  int max_gn = 25;
  double tol = 1e-9;
  bool keyframe_mode = false;
  KeyframePolicy policy;
  std::function<void(const std::string&)> log;
};

struct WindowRunResult {
  std::vector<ManifoldPoint> estimates;  // newest window state per frame (partial when diverged)
  long gn_steps = 0;
  long marginalizations = 0;
  long features_dropped = 0;
  bool diverged = false;
};

// Sliding-window estimator over the running cost: the window keeps raw
// dynamics/measurement residuals (relinearized by every Gauss-Newton step);
// marginalization folds only the residuals touching departing blocks into the
// prior.  In keyframe mode, frames leaving the recent window are retained
// when flagged as keyframes and depart in keyframe order instead.
class WindowEstimator {
 public:
  WindowEstimator(const SlamModel& model, WindowOptions opts);

  // Process one frame; returns the published state estimate.
  ManifoldPoint step(int frame_idx, const std::vector<Observation>& obs);

  const RunningCost& cost() const { return cost_; }
  int window_pose_count() const { return static_cast<int>(window_.size()); }
  int keyframe_count() const { return static_cast<int>(keyframes_.size()); }
  int flagged_keyframes() const {
    int n = keyframe_count();
    for (const auto& f : window_) n += f.keyframe ? 1 : 0;
    return n;
  }
  long gn_steps() const { return stats_gn_; }
  long marginalizations() const { return stats_marg_; }
  long features_dropped() const { return stats_dropped_; }

 private:
  struct FrameEntry {
    int frame_idx;
    int block_id;
    bool keyframe = false;
    std::set<long> landmarks;  // feature ids observed at this frame
  };

  int pose_block(int frame_idx) const { return 2 * frame_idx + 2; }
  int feature_block(long feature_id) const { return static_cast<int>(1000000 + 2 * feature_id); }

  void add_dynamics(int from_frame, int to_frame);
  void add_measurement(int frame_idx, long feature_id, const VecX& z);
  void attach_feature(long feature_id);
  void marginalize_frame(const FrameEntry& fe, const std::set<long>& incoming);
  void run_gauss_newton();

  const SlamModel& model_;
  WindowOptions opts_;
  RunningCost cost_;
  std::deque<FrameEntry> window_;    // recent frames (both modes)
  std::deque<FrameEntry> keyframes_; // keyframe mode only
  std::map<long, std::vector<std::pair<int, VecX>>> pending_;  // feature -> (frame, z)
  std::set<long> live_features_;     // feature id -> has a block
  std::set<long> retired_features_;
  std::map<long, std::set<int>> feature_frames_;  // observing frames with residuals
  MatX sv_sqrt_;
  long stats_gn_ = 0, stats_marg_ = 0, stats_dropped_ = 0;
};

WindowRunResult window_run(const SlamModel& model, const Frames& frames,
                           const WindowOptions& opts);

// Dead-reckoning baseline: dynamics only, no corrections.
std::vector<ManifoldPoint> dead_reckon(const SlamModel& model, int frame_count);

}  // namespace filtopt
