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
#include "filtopt/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace filtopt {

TrajectoryPose planar_pose(double t, const Vec3& xytheta) {
  TrajectoryPose p;
  p.t = t;
  p.p = Vec3(xytheta[0], xytheta[1], 0.0);
  // Yaw quaternion straight from the half angle (no chart restriction).
  p.q = UnitQuaternion(std::cos(0.5 * xytheta[2]), Vec3(0, 0, std::sin(0.5 * xytheta[2])));
  return p;
}

std::vector<std::pair<int, int>> associate(const Trajectory& est, const Trajectory& gt,
                                           double tol) {
  std::vector<std::pair<int, int>> out;
  size_t j = 0;
  for (size_t i = 0; i < est.size(); ++i) {
    while (j + 1 < gt.size() &&
           std::abs(gt[j + 1].t - est[i].t) <= std::abs(gt[j].t - est[i].t)) {
      ++j;
    }
    if (j < gt.size() && std::abs(gt[j].t - est[i].t) <= tol) {
      out.push_back({static_cast<int>(i), static_cast<int>(j)});
    }
  }
  return out;
}

AlignmentResult umeyama_align(const Trajectory& est, const Trajectory& gt, double tol) {
  const auto pairs = associate(est, gt, tol);
  if (pairs.size() < 3) throw NumericalError("umeyama_align: fewer than 3 associated pairs");

  Vec3 mean_e = Vec3::Zero(), mean_g = Vec3::Zero();
  for (const auto& [i, j] : pairs) {
    mean_e += est[i].p;
    mean_g += gt[j].p;
  }
  mean_e /= static_cast<double>(pairs.size());
  mean_g /= static_cast<double>(pairs.size());

  Mat3 h = Mat3::Zero();
  for (const auto& [i, j] : pairs) {
    h += (est[i].p - mean_e) * (gt[j].p - mean_g).transpose();
  }
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  // Rank >= 2 needed to pin the rotation (planar sets have rank 2).
  if (svd.singularValues()[1] < 1e-12 * std::max(svd.singularValues()[0], 1e-300)) {
    throw NumericalError("umeyama_align: degenerate (collinear or coincident) point set");
  }
  Mat3 s = Mat3::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0) s(2, 2) = -1.0;
  AlignmentResult out;
  out.rotation = svd.matrixV() * s * svd.matrixU().transpose();
  out.translation = mean_g - out.rotation * mean_e;
  return out;
}

Trajectory apply_alignment(const AlignmentResult& a, const Trajectory& est) {
  Trajectory out = est;
  const UnitQuaternion qa = quat_from_matrix(a.rotation);
  for (auto& p : out) {
    p.p = a.rotation * p.p + a.translation;
    p.q = qa * p.q;
  }
  return out;
}

RmseResult rmse(const Trajectory& aligned_est, const Trajectory& gt, double tol) {
  const auto pairs = associate(aligned_est, gt, tol);
  if (pairs.empty()) throw NumericalError("rmse: empty association");
  double st = 0.0, sr = 0.0;
  for (const auto& [i, j] : pairs) {
    st += (aligned_est[i].p - gt[j].p).squaredNorm();
    const Vec3 dtheta = quat_log(gt[j].q.conjugate() * aligned_est[i].q);
    sr += dtheta.squaredNorm();
  }
  RmseResult out;
  out.pairs = static_cast<int>(pairs.size());
  out.translation_m = std::sqrt(st / pairs.size());
  out.rotation_deg = std::sqrt(sr / pairs.size()) * 180.0 / 3.14159265358979323846;
  return out;
}

std::vector<DriftPoint> drift_curve(const Trajectory& aligned_est, const Trajectory& gt,
                                    double interval_m, double tol) {
  const auto pairs = associate(aligned_est, gt, tol);
  std::vector<DriftPoint> out;
  if (pairs.empty() || interval_m <= 0) return out;

  // Arc length along the ground truth, sampled at gt indices.
  std::vector<double> arc(gt.size(), 0.0);
  for (size_t j = 1; j < gt.size(); ++j) {
    arc[j] = arc[j - 1] + (gt[j].p - gt[j - 1].p).norm();
  }

  double next = interval_m;
  for (const auto& [i, j] : pairs) {
    while (arc[j] >= next) {
      out.push_back({next, (aligned_est[i].p - gt[j].p).norm()});
      next += interval_m;
    }
  }
  return out;
}

}  // namespace filtopt
