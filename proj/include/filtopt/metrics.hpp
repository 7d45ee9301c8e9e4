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

#include "filtopt/manifold.hpp"

namespace filtopt {

struct TrajectoryPose {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
  UnitQuaternion q;  // body orientation (planar: yaw about z)
};

// Timestamps must be strictly increasing.
using Trajectory = std::vector<TrajectoryPose>;

TrajectoryPose planar_pose(double t, const Vec3& xytheta);

struct AlignmentResult {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
};

// Timestamp association tolerance, seconds.
inline constexpr double kAssocTol = 0.010;

// Associated index pairs (estimate, ground truth) by nearest timestamp.
std::vector<std::pair<int, int>> associate(const Trajectory& est, const Trajectory& gt,
                                           double tol = kAssocTol);

// Least-squares rigid alignment of the estimate onto the ground truth
// (SVD of the cross-covariance with reflection correction, scale fixed to 1).
// Throws NumericalError on degenerate (fewer than 3 or collinear) point sets.
AlignmentResult umeyama_align(const Trajectory& est, const Trajectory& gt,
                              double tol = kAssocTol);

Trajectory apply_alignment(const AlignmentResult& a, const Trajectory& est);

struct RmseResult {
  double translation_m = 0.0;
  double rotation_deg = 0.0;
  int pairs = 0;
};

// RMSE over associated pairs: Euclidean position errors and geodesic
// orientation angles.
RmseResult rmse(const Trajectory& aligned_est, const Trajectory& gt, double tol = kAssocTol);

struct DriftPoint {
  double distance_m = 0.0;
  double drift_m = 0.0;
};

// Position error sampled at fixed arc-length milestones along the ground
// truth (default every 5 m).  Empty when the trajectory is shorter than one
// interval.
std::vector<DriftPoint> drift_curve(const Trajectory& aligned_est, const Trajectory& gt,
                                    double interval_m = 5.0, double tol = kAssocTol);

}  // namespace filtopt
