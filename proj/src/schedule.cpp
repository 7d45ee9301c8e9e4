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
#include "filtopt/estimators/schedule.hpp"

namespace filtopt {

void EstimatorSchedule::validate() const {
  switch (kind) {
    case Kind::swf:
      if (window_n < 1) throw StructureError("schedule: swf requires n >= 1");
      if (gn_iters < 1) throw StructureError("schedule: swf requires gn_iters >= 1");
      break;
    case Kind::msckf:
    case Kind::imsckf:
      if (n_max < 2) throw StructureError("schedule: msckf requires n_max >= 2");
      break;
    case Kind::keyframe:
      if (window_n < 1 || keyframe_k < 0) throw StructureError("schedule: invalid keyframe sizes");
      if (match_ratio < 0.0 || match_ratio > 1.0) {
        throw StructureError("schedule: match ratio must be in [0, 1]");
      }
      break;
    default:
      break;
  }
  if (max_gn < 1) throw StructureError("schedule: max_gn must be >= 1");
}

EstimatorSchedule::Kind EstimatorSchedule::parse_kind(const std::string& name) {
  if (name == "ekf") return Kind::ekf;
  if (name == "iekf") return Kind::iekf;
  if (name == "swf") return Kind::swf;
  if (name == "msckf") return Kind::msckf;
  if (name == "imsckf") return Kind::imsckf;
  if (name == "keyframe") return Kind::keyframe;
  if (name == "dead-reckoning" || name == "dead_reckoning") return Kind::dead_reckoning;
  throw StructureError("unknown estimator kind: " + name);
}

std::string EstimatorSchedule::kind_name(Kind k) {
  switch (k) {
    case Kind::ekf: return "ekf";
    case Kind::iekf: return "iekf";
    case Kind::swf: return "swf";
    case Kind::msckf: return "msckf";
    case Kind::imsckf: return "imsckf";
    case Kind::keyframe: return "keyframe";
    case Kind::dead_reckoning: return "dead-reckoning";
  }
  return "?";
}

TrajectoryPose state_to_pose(double t, const ManifoldPoint& state) {
  if (state.kind() == ManifoldPoint::Kind::Euclidean) {
    return planar_pose(t, Vec3(state.euclidean_value()));
  }
  const auto s = imu_state_view(state);
  TrajectoryPose p;
  p.t = t;
  p.p = s.r_ws;
  p.q = s.q_ws;
  return p;
}

ScheduleRunResult run_schedule(const EstimatorSchedule& sched, const SlamModel& model,
                               const Frames& frames, const std::vector<double>& times,
                               const std::function<void(const std::string&)>& log) {
  sched.validate();
  if (times.size() != frames.size()) {
    throw StructureError("run_schedule: times/frames length mismatch");
  }
  using Kind = EstimatorSchedule::Kind;

  ScheduleRunResult out;
  auto push = [&](size_t t, const ManifoldPoint& state) {
    out.trajectory.push_back(state_to_pose(times[t], state));
  };

  switch (sched.kind) {
    case Kind::ekf:
    case Kind::iekf: {
      const auto* planar = dynamic_cast<const PlanarModel*>(&model);
      if (planar == nullptr) {
        throw StructureError("run_schedule: ekf/iekf require the planar model");
      }
      FrameObservations obs(frames.size());
      for (size_t t = 0; t < frames.size(); ++t) {
        for (const auto& o : frames[t]) obs[t].push_back({o.feature_id, Vec2(o.z)});
      }
      EkfRunOptions opts;
      opts.iterated = sched.kind == Kind::iekf;
      opts.max_gn = sched.max_gn;
      opts.tol = sched.tol;
      const auto res = ekf_run(*planar, obs, opts);
      for (size_t t = 0; t < res.estimates.size(); ++t) {
        push(t, ManifoldPoint::euclidean(res.estimates[t]));
      }
      out.gn_steps = res.gn_steps;
      out.marginalizations = res.marginalizations;
      out.diverged = res.diverged;
      break;
    }
    case Kind::swf:
    case Kind::keyframe: {
      WindowOptions opts;
      opts.window_n = sched.window_n;
      opts.gn_iters = sched.gn_iters;
      opts.until_convergence = false;
      opts.max_gn = sched.max_gn;
      opts.tol = sched.tol;
      opts.keyframe_mode = sched.kind == Kind::keyframe;
      opts.policy.recent_n = sched.window_n;
      opts.policy.keyframe_k = sched.keyframe_k;
      opts.policy.match_ratio = sched.match_ratio;
      opts.log = log;
      const auto res = window_run(model, frames, opts);
      for (size_t t = 0; t < res.estimates.size(); ++t) push(t, res.estimates[t]);
      out.gn_steps = res.gn_steps;
      out.marginalizations = res.marginalizations;
      out.features_dropped = res.features_dropped;
      out.diverged = res.diverged;
      break;
    }
    case Kind::msckf:
    case Kind::imsckf: {
      MsckfRunOptions opts;
      opts.n_max = sched.n_max;
      opts.iterated = sched.kind == Kind::imsckf;
      opts.max_gn = sched.max_gn;
      opts.tol = sched.tol;
      opts.log = log;
      const auto res = msckf_run(model, frames, opts);
      for (size_t t = 0; t < res.estimates.size(); ++t) push(t, res.estimates[t]);
      out.gn_steps = res.gn_steps;
      out.marginalizations = res.marginalizations;
      out.features_dropped = res.features_dropped;
      out.diverged = res.diverged;
      break;
    }
    case Kind::dead_reckoning: {
      const auto est = dead_reckon(model, static_cast<int>(frames.size()));
      for (size_t t = 0; t < est.size(); ++t) push(t, est[t]);
      break;
    }
  }
  return out;
}

}  // namespace filtopt
