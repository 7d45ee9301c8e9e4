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
#include "filtopt/estimators/window.hpp"

#include <algorithm>

namespace filtopt {

WindowEstimator::WindowEstimator(const SlamModel& model, WindowOptions opts)
    : model_(model), opts_(std::move(opts)) {
  if (!opts_.keyframe_mode && opts_.window_n < 1) {
    throw StructureError("WindowEstimator: window_n must be >= 1");
  }
  if (opts_.keyframe_mode && (opts_.policy.recent_n < 1 || opts_.policy.keyframe_k < 0)) {
    throw StructureError("WindowEstimator: invalid keyframe policy");
  }
  sv_sqrt_ = sqrt_information(model_.sigma_v());
}

void WindowEstimator::add_dynamics(int from_frame, int to_frame) {
  const DiscreteTransition tr =
      model_.propagate(cost_.state().value(pose_block(from_frame)), from_frame);
  ResidualBlock dyn;
  dyn.kind = ResidualKind::dynamics;
  dyn.block_ids = {pose_block(from_frame), pose_block(to_frame)};
  dyn.sqrt_info = sqrt_information(tr.sigma_w);
  dyn.residual_dim = tr.phi.rows();
  dyn.key1 = to_frame;
  dyn.eval = [tr](const BlockValues& v) { return boxminus(v[1], tr.apply(v[0])); };
  dyn.jac = [tr](const BlockValues& v) {
    const ManifoldPoint g = tr.apply(v[0]);
    return std::vector<MatX>{boxminus_jacobian_wrt_base(v[1], g) * tr.phi,
                             boxminus_jacobian(v[1], g)};
  };
  cost_.add_residual(dyn);
}

void WindowEstimator::add_measurement(int frame_idx, long feature_id, const VecX& z) {
  const SlamModel* m = &model_;
  ResidualBlock r;
  r.kind = ResidualKind::measurement;
  r.block_ids = {pose_block(frame_idx), feature_block(feature_id)};
  r.sqrt_info = sv_sqrt_;
  r.residual_dim = model_.dz();
  r.key1 = frame_idx;
  r.key2 = feature_id;
  r.eval = [m, z](const BlockValues& v) {
    return VecX(z - m->measure_state(v[0], v[1].euclidean_value()));
  };
  r.jac = [m](const BlockValues& v) {
    return std::vector<MatX>{-m->measure_state_jac_state(v[0], v[1].euclidean_value()),
                             -m->measure_jac_feat(m->camera_pose(v[0]), v[1].euclidean_value())};
  };
  cost_.add_residual(r);
  feature_frames_[feature_id].insert(frame_idx);
}

void WindowEstimator::attach_feature(long feature_id) {
  auto it = pending_.find(feature_id);
  if (it == pending_.end() || it->second.size() < 2) return;
  std::vector<PoseObservation> obs;
  for (const auto& [frame, z] : it->second) {
    obs.push_back({model_.camera_pose(cost_.state().value(pose_block(frame))), z});
  }
  const auto tri = triangulate_feature(model_, obs);
  if (!tri.ok) return;  // keep buffering; later views may fix it
  cost_.state().add_block(feature_block(feature_id), BlockKind::feature,
                          ManifoldPoint::euclidean(tri.point));
  live_features_.insert(feature_id);
  for (const auto& [frame, z] : it->second) add_measurement(frame, feature_id, z);
  pending_.erase(it);
}

void WindowEstimator::marginalize_frame(const FrameEntry& fe, const std::set<long>& incoming) {
  std::set<int> marg{fe.block_id};
  std::vector<long> gone_features;
  for (auto& [fid, frames] : feature_frames_) {
    auto frames_copy = frames;
    frames_copy.erase(fe.frame_idx);
    // Only visible in the departing frame: no residual at any remaining
    // window frame and not observed in the incoming frame either.
    if (frames_copy.empty() && !incoming.count(fid) && live_features_.count(fid)) {
      marg.insert(feature_block(fid));
      gone_features.push_back(fid);
    }
  }

  FullState lin = cost_.state();
  marginalize(cost_, lin, marg);
  ++stats_marg_;

  for (long fid : gone_features) {
    live_features_.erase(fid);
    retired_features_.insert(fid);
    feature_frames_.erase(fid);
  }
  for (auto& [fid, frames] : feature_frames_) frames.erase(fe.frame_idx);
  // Pending observations at the departed frame can no longer attach.
  for (auto it = pending_.begin(); it != pending_.end();) {
    auto& vec = it->second;
    vec.erase(std::remove_if(vec.begin(), vec.end(),
                             [&](const auto& p) { return p.first == fe.frame_idx; }),
              vec.end());
    if (vec.empty()) {
      ++stats_dropped_;
      if (opts_.log) opts_.log("pending feature " + std::to_string(it->first) + " dropped");
      it = pending_.erase(it);
    } else {
      ++it;
    }
  }
}

void WindowEstimator::run_gauss_newton() {
  const int iters = opts_.until_convergence ? opts_.max_gn : opts_.gn_iters;
  GaussNewtonReport rep = gauss_newton_solve(cost_, cost_.state(), iters, opts_.tol);
  stats_gn_ += rep.iterations;
  if (rep.diverged) throw DivergenceError("window estimator: " + rep.note);
}

ManifoldPoint WindowEstimator::step(int frame_idx, const std::vector<Observation>& obs) {
  if (frame_idx == 0) {
    cost_.state().add_block(pose_block(0), BlockKind::pose, model_.initial_state());
    FullState mean;
    mean.add_block(pose_block(0), BlockKind::pose, model_.initial_state());
    cost_.add_prior({mean, model_.initial_covariance()});
  } else {
    const int prev = window_.back().frame_idx;
    const DiscreteTransition tr = model_.propagate(cost_.state().value(pose_block(prev)), prev);
    cost_.state().add_block(pose_block(frame_idx), BlockKind::pose, tr.x1);
    add_dynamics(prev, frame_idx);
  }

  FrameEntry entry;
  entry.frame_idx = frame_idx;
  entry.block_id = pose_block(frame_idx);
  for (const auto& o : obs) entry.landmarks.insert(o.feature_id);

  if (opts_.keyframe_mode) {
    if (keyframes_.empty() && window_.empty()) {
      entry.keyframe = true;
    } else {
      // Newest flagged frame, searching the recent window first.
      const std::set<long>* ref = nullptr;
      for (auto it = window_.rbegin(); it != window_.rend(); ++it) {
        if (it->keyframe) {
          ref = &it->landmarks;
          break;
        }
      }
      if (!ref && !keyframes_.empty()) ref = &keyframes_.back().landmarks;
      if (ref && !entry.landmarks.empty()) {
        size_t matched = 0;
        for (long id : entry.landmarks) {
          if (ref->count(id)) ++matched;
        }
        const double ratio = static_cast<double>(matched) /
                             static_cast<double>(entry.landmarks.size());
        entry.keyframe = ratio < opts_.policy.match_ratio;
      }
    }
  }
  window_.push_back(entry);

  // Window maintenance (departures precede this frame's measurements).
  if (opts_.keyframe_mode) {
    while (static_cast<int>(window_.size()) > opts_.policy.recent_n) {
      FrameEntry oldest = window_.front();
      window_.pop_front();
      if (oldest.keyframe) {
        keyframes_.push_back(oldest);
        while (static_cast<int>(keyframes_.size()) > opts_.policy.keyframe_k) {
          FrameEntry kf = keyframes_.front();
          keyframes_.pop_front();
          marginalize_frame(kf, entry.landmarks);
        }
      } else {
        marginalize_frame(oldest, entry.landmarks);
      }
    }
  } else {
    while (static_cast<int>(window_.size()) > opts_.window_n) {
      FrameEntry oldest = window_.front();
      window_.pop_front();
      marginalize_frame(oldest, entry.landmarks);
    }
  }

  // Measurements: existing features attach directly; new features enter via
  // the inverse map when the model has one, otherwise buffer and triangulate.
  std::vector<Observation> sorted = obs;
  std::sort(sorted.begin(), sorted.end(),
            [](const Observation& a, const Observation& b) { return a.feature_id < b.feature_id; });
  for (const auto& o : sorted) {
    if (retired_features_.count(o.feature_id)) continue;
    if (live_features_.count(o.feature_id)) {
      add_measurement(frame_idx, o.feature_id, o.z);
      continue;
    }
    const auto ell = model_.inverse_measure(
        model_.camera_pose(cost_.state().value(pose_block(frame_idx))), o.z);
    if (ell) {
      cost_.state().add_block(feature_block(o.feature_id), BlockKind::feature,
                              ManifoldPoint::euclidean(*ell));
      live_features_.insert(o.feature_id);
      add_measurement(frame_idx, o.feature_id, o.z);
    } else {
      pending_[o.feature_id].push_back({frame_idx, o.z});
      attach_feature(o.feature_id);
    }
  }

  run_gauss_newton();
  return cost_.state().value(pose_block(frame_idx));
}

WindowRunResult window_run(const SlamModel& model, const Frames& frames,
                           const WindowOptions& opts) {
  WindowEstimator est(model, opts);
  WindowRunResult out;
  try {
    for (size_t t = 0; t < frames.size(); ++t) {
      out.estimates.push_back(est.step(static_cast<int>(t), frames[t]));
    }
  } catch (const DivergenceError&) {
    out.diverged = true;
  }
  out.gn_steps = est.gn_steps();
  out.marginalizations = est.marginalizations();
  out.features_dropped = est.features_dropped();
  return out;
}

std::vector<ManifoldPoint> dead_reckon(const SlamModel& model, int frame_count) {
  std::vector<ManifoldPoint> out;
  ManifoldPoint x = model.initial_state();
  out.push_back(x);
  for (int t = 1; t < frame_count; ++t) {
    x = model.propagate(x, t - 1).x1;
    out.push_back(x);
  }
  return out;
}

}  // namespace filtopt
