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

#include <vector>

#include "filtopt/models.hpp"
#include "filtopt/optimizer.hpp"

namespace filtopt {

// Planar EKF belief: mean (x, y, theta, f_1, ..., f_p), covariance 3 + 2p.
struct EkfBelief {
  VecX mean = VecX::Zero(3);
  MatX cov = MatX::Identity(3, 3);
  std::vector<long> feature_ids;  // identity of each feature slot, in order

  int p() const { return static_cast<int>(feature_ids.size()); }
  int dim() const { return 3 + 2 * p(); }
  Vec3 pose() const { return mean.head<3>(); }
  Vec2 feature(int slot) const { return mean.segment<2>(3 + 2 * slot); }
  int slot_of(long feature_id) const;  // -1 when absent

  void check() const;  // dimensions consistent, covariance symmetric PSD
};

struct EkfObservation {
  long feature_id = 0;
  Vec2 z = Vec2::Zero();
};

// --- Classical sub-steps (covariance form) --------------------------------

// Feature augmentation: appends ell(mu_x, z_k) per new feature and grows the
// covariance with the inverse-map Jacobians L_x = [I 0], L_z = I.
EkfBelief ekf_feature_augment_classical(const EkfBelief& b, const std::vector<EkfObservation>& zs,
                                        const Mat2& sigma_v);

// Kalman feature update from measurements of features already in the state.
EkfBelief ekf_feature_update_classical(const EkfBelief& b, const std::vector<EkfObservation>& zs,
                                       const Mat2& sigma_v);

// Propagation: mean (g(mu_x), mu_f), covariance blocks through G.
EkfBelief ekf_propagate_classical(const EkfBelief& b, const Vec3& g_of_mu, const Mat3& g_jac,
                                  const Mat3& sigma_w);

// --- Optimization forms (Gauss-Newton / marginalization primitives) -------

// One Gauss-Newton step on prior + new-feature measurement residuals, about
// (mu, ell(mu_x, z)).
EkfBelief ekf_feature_augment_opt(const EkfBelief& b, const std::vector<EkfObservation>& zs,
                                  const Mat2& sigma_v);

// gn_iters Gauss-Newton steps on prior + existing-feature measurement
// residuals, about mu (1 step = EKF, until convergence = iEKF).
EkfBelief ekf_feature_update_opt(const EkfBelief& b, const std::vector<EkfObservation>& zs,
                                 const Mat2& sigma_v, int gn_iters = 1, double tol = 1e-9,
                                 long* gn_steps = nullptr);

// Marginalization of the old pose from prior + dynamics residual about
// (mu, g(mu)).
EkfBelief ekf_propagate_opt(const EkfBelief& b, const PlanarModel& model, int frame_k);

// --- Run loop ---------------------------------------------------------------

// Per-frame feature observations, frame index == vector index.
using FrameObservations = std::vector<std::vector<EkfObservation>>;

struct EkfRunOptions {
  bool iterated = false;  // iEKF: update steps run to convergence
  int max_gn = 25;
  double tol = 1e-9;
  bool classical = false;  // use the covariance-form sub-steps instead
};

struct EkfRunResult {
  std::vector<Vec3> estimates;  // x_hat_t per frame (partial when diverged)
  EkfBelief final_belief;
  long gn_steps = 0;
  long marginalizations = 0;
  bool diverged = false;
};

EkfRunResult ekf_run(const PlanarModel& model, const FrameObservations& frames,
                     const EkfRunOptions& opts = {});

}  // namespace filtopt
