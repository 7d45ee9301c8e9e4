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

#include <functional>
#include <map>
#include <set>
#include <vector>

#include "filtopt/models.hpp"
#include "filtopt/optimizer.hpp"

namespace filtopt {

// MSCKF belief: the dynamic state (IMU state for the stereo model, unicycle
// state for the planar one) plus a sliding window of cloned camera poses,
// with a joint tangent-space covariance; bookkeeping set S_z carries the
// stored measurements awaiting processing.
struct MsckfBelief {
  ManifoldPoint dyn;
  std::vector<long> pose_ids;         // ascending
  std::vector<ManifoldPoint> poses;   // same order
  MatX cov;

  struct Pair {
    long pose_id = 0;
    long feature_id = 0;
    VecX z;
  };
  std::vector<Pair> s_z;  // kept sorted by (pose_id, feature_id)

  int n() const { return static_cast<int>(poses.size()); }
  int dyn_dim() const { return dyn.tangent_dim(); }
  int dim() const;
  int pose_offset(int idx) const;  // tangent offset of poses[idx]
  int pose_index(long pose_id) const;
  const ManifoldPoint& pose(long pose_id) const;

  void check() const;  // covariance symmetric PSD, ids consistent
};

struct MsckfSets {
  std::vector<long> s_x;                 // pose ids to drop
  std::vector<MsckfBelief::Pair> s_z1;   // pairs at dropped poses (common features)
  std::vector<MsckfBelief::Pair> s_z2;   // pairs of features unobserved at newest pose
  std::vector<long> s_f;                 // features to process, ascending

  std::vector<MsckfBelief::Pair> processing_pairs() const;  // union, sorted, deduped
};

// Set selection, Alg.-7 style: when n >= n_max - 1, every third pose starting
// from the second oldest is dropped; features common to all of them are
// processed, as are features no longer observed at the newest pose.
MsckfSets msckf_select_sets(const MsckfBelief& b, int n_max);

// Same selection evaluated just before the incoming frame's pose is cloned:
// "observed at the newest pose" is read from the incoming feature list and
// the window count is taken as n + 1.  The run loop uses this form so the
// update never has to invert a covariance containing a fresh (perfectly
// correlated) clone.
MsckfSets msckf_select_sets_pre_augment(const MsckfBelief& b, const std::set<long>& incoming,
                                        int n_max);

// --- Pose augmentation ------------------------------------------------------

// Classical: append psi(dyn) with covariance [I; Psi] Sigma [I; Psi]^T (the
// analytic epsilon -> 0 limit).
MsckfBelief msckf_pose_augment(const MsckfBelief& b, const SlamModel& model, long new_pose_id);

// Test oracle: one Gauss-Newton step on prior + eps^{-1} |x_new [-] psi(dyn)|^2
// about (mu, psi(mu)) at finite epsilon.
MsckfBelief msckf_pose_augment_gn(const MsckfBelief& b, const SlamModel& model, long new_pose_id,
                                  double epsilon);

// --- Feature update ---------------------------------------------------------

using FeatureEstimates = std::map<long, VecX>;

// Classical nullspace-projection update: residuals of the given pairs are
// projected onto an orthonormal basis A of N(H_f^T), QR-compressed, and
// applied in information form.
MsckfBelief msckf_feature_update_classical(const MsckfBelief& b, const SlamModel& model,
                                           const std::vector<MsckfBelief::Pair>& pairs,
                                           const FeatureEstimates& estimates);

// Optimization path: marginalize the feature blocks out of
// prior + measurement residuals (whole stack as C_2, Theorem-7 form).  With
// gn_iters > 1 the linearization point is first refined by that many
// Gauss-Newton steps over (state, features) -- the iterated variant.
MsckfBelief msckf_feature_update_opt(const MsckfBelief& b, const SlamModel& model,
                                     const std::vector<MsckfBelief::Pair>& pairs,
                                     const FeatureEstimates& estimates, int gn_iters = 1,
                                     double tol = 1e-9, long* gn_steps = nullptr);

// --- Propagation ------------------------------------------------------------

// Classical: dyn block through (g, Phi, Sigma_w), poses untouched.
MsckfBelief msckf_propagate_classical(const MsckfBelief& b, const DiscreteTransition& tr);

// Optimization path: marginalize the previous dynamic state out of
// prior + dynamics residual about (mu, g(mu)).
MsckfBelief msckf_propagate_opt(const MsckfBelief& b, const DiscreteTransition& tr);

// Drop poses (rows/columns removed; Gaussian marginal).
MsckfBelief msckf_drop_poses(const MsckfBelief& b, const std::vector<long>& pose_ids);

// --- Run loop ---------------------------------------------------------------

struct MsckfRunOptions {
  int n_max = 5;
  bool classical = false;  // covariance-form feature updates instead of the primitive
  bool iterated = false;   // iMSCKF: refine the update linearization point
  int max_gn = 25;
  double tol = 1e-9;
  std::function<void(const std::string&)> log;
};

struct MsckfRunResult {
  std::vector<ManifoldPoint> estimates;  // dynamic state per frame (partial when diverged)
  MsckfBelief final_belief;
  long gn_steps = 0;
  long marginalizations = 0;
  long features_processed = 0;
  long features_dropped = 0;
  int max_pose_count = 0;
  bool diverged = false;
};

MsckfRunResult msckf_run(const SlamModel& model, const Frames& frames,
                         const MsckfRunOptions& opts = {});

}  // namespace filtopt
