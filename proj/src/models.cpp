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
#include "filtopt/models.hpp"

#include <algorithm>
#include <cmath>

namespace filtopt {

Vec3 planar_step(const Vec3& x, double v, double omega, double dt) {
  const double th = x[2];
  Vec3 out;
  if (std::abs(omega) * dt < 1e-8) {
    out[0] = x[0] + v * dt * std::cos(th) - 0.5 * v * omega * dt * dt * std::sin(th);
    out[1] = x[1] + v * dt * std::sin(th) + 0.5 * v * omega * dt * dt * std::cos(th);
  } else {
    out[0] = x[0] + v / omega * (std::sin(th + omega * dt) - std::sin(th));
    out[1] = x[1] - v / omega * (std::cos(th + omega * dt) - std::cos(th));
  }
  out[2] = th + omega * dt;
  return out;
}

Mat3 planar_step_jacobian(const Vec3& x, double v, double omega, double dt) {
  const double th = x[2];
  Mat3 g = Mat3::Identity();
  if (std::abs(omega) * dt < 1e-8) {
    g(0, 2) = -v * dt * std::sin(th) - 0.5 * v * omega * dt * dt * std::cos(th);
    g(1, 2) = v * dt * std::cos(th) - 0.5 * v * omega * dt * dt * std::sin(th);
  } else {
    g(0, 2) = v / omega * (std::cos(th + omega * dt) - std::cos(th));
    g(1, 2) = v / omega * (std::sin(th + omega * dt) - std::sin(th));
  }
  return g;
}

MatX planar_measure_jac_state() {
  MatX j = MatX::Zero(2, 3);
  j.leftCols<2>() = -Mat2::Identity();
  return j;
}

MatX planar_measure_jac_feat() { return Mat2::Identity(); }

ManifoldPoint make_camera_pose(const CameraPose& p) {
  return ManifoldPoint::product(
      {ManifoldPoint::quaternion(p.q_wc), ManifoldPoint::euclidean(p.r_wc)});
}

CameraPose camera_pose_view(const ManifoldPoint& p) {
  const auto& parts = p.parts();
  if (parts.size() != 2) throw StructureError("camera_pose_view: not a camera pose");
  return {parts[0].quat_value(), Vec3(parts[1].euclidean_value())};
}

Vec3 to_camera_frame(const CameraPose& pose, const Vec3& f_world) {
  return pose.q_wc.rotation().transpose() * (f_world - pose.r_wc);
}

Vec3 stereo_project(const StereoIntrinsics& k, const CameraPose& pose, const Vec3& f_world) {
  const Vec3 pc = to_camera_frame(pose, f_world);
  if (pc.z() <= kMinDepth) throw DomainError("stereo_project: point behind camera");
  const Vec3 pr = pc - Vec3(k.baseline, 0, 0);
  return Vec3(k.fx * pc.x() / pc.z() + k.cx, k.fx * pr.x() / pc.z() + k.cx,
              k.fy * pc.y() / pc.z() + k.cy);
}

bool stereo_visible(const StereoIntrinsics& k, const CameraPose& pose, const Vec3& f_world,
                    double max_depth) {
  const Vec3 pc = to_camera_frame(pose, f_world);
  if (pc.z() <= kMinDepth || pc.z() > max_depth) return false;
  const Vec3 z = stereo_project(k, pose, f_world);
  // Inside a nominal 2*cx x 2*cy image in both cameras.
  return z[0] >= 0 && z[0] <= 2 * k.cx && z[1] >= 0 && z[1] <= 2 * k.cx && z[2] >= 0 &&
         z[2] <= 2 * k.cy;
}

namespace {

// d z / d p_c for the stereo projection.
Mat3 stereo_jac_pc(const StereoIntrinsics& k, const Vec3& pc) {
  const double iz = 1.0 / pc.z();
  Mat3 j;
  j << k.fx * iz, 0, -k.fx * pc.x() * iz * iz,
       k.fx * iz, 0, -k.fx * (pc.x() - k.baseline) * iz * iz,
       0, k.fy * iz, -k.fy * pc.y() * iz * iz;
  return j;
}

}  // namespace

MatX stereo_jac_pose(const StereoIntrinsics& k, const CameraPose& pose, const Vec3& f_world) {
  const Vec3 pc = to_camera_frame(pose, f_world);
  const Mat3 jz = stereo_jac_pc(k, pc);
  MatX j(3, 6);
  // Right perturbation q [+] dth: p_c = Exp(-dth) R^T (f - r).
  j.leftCols<3>() = jz * so3_hat(pc);
  j.rightCols<3>() = -jz * pose.q_wc.rotation().transpose();
  return j;
}

MatX stereo_jac_feat(const StereoIntrinsics& k, const CameraPose& pose, const Vec3& f_world) {
  const Vec3 pc = to_camera_frame(pose, f_world);
  return stereo_jac_pc(k, pc) * pose.q_wc.rotation().transpose();
}

std::optional<Vec3> stereo_backproject(const StereoIntrinsics& k, const CameraPose& pose,
                                       const Vec3& z) {
  const double disparity = z[0] - z[1];
  if (disparity <= 1e-9) return std::nullopt;
  const double depth = k.fx * k.baseline / disparity;
  if (depth <= kMinDepth) return std::nullopt;
  const Vec3 pc(depth * (z[0] - k.cx) / k.fx, depth * (z[2] - k.cy) / k.fy, depth);
  return pose.q_wc.rotation() * pc + pose.r_wc;
}

CameraPose imu_to_camera(const ManifoldPoint& imu_state, const Extrinsics& ext) {
  const auto s = imu_state_view(imu_state);
  CameraPose out;
  out.q_wc = s.q_ws * ext.q_sc;
  out.r_wc = s.r_ws + s.q_ws.rotation() * ext.r_sc;
  return out;
}

MatX imu_to_camera_jacobian(const ManifoldPoint& imu_state, const Extrinsics& ext) {
  const auto s = imu_state_view(imu_state);
  MatX j = MatX::Zero(6, kImuStateDim);
  // d(theta_C)/d(theta_S): q_WC [+] dc = q_WS Exp(ds) q_SC => dc = R(q_SC)^T ds.
  j.block<3, 3>(0, 0) = ext.q_sc.rotation().transpose();
  // d(r_C)/d(theta_S) = -R(q_WS) [r_SC]x,  d(r_C)/d(r_S) = I.
  j.block<3, 3>(3, 0) = -s.q_ws.rotation() * so3_hat(ext.r_sc);
  j.block<3, 3>(3, 12) = Mat3::Identity();
  return j;
}

VecX SlamModel::measure_state(const ManifoldPoint& x, const VecX& f) const {
  return measure(camera_pose(x), f);
}

MatX SlamModel::measure_state_jac_state(const ManifoldPoint& x, const VecX& f) const {
  return measure_jac_pose(camera_pose(x), f) * camera_pose_jacobian(x);
}

TriangulationResult triangulate_feature(const SlamModel& model,
                                        const std::vector<PoseObservation>& obs,
                                        double max_residual_rms) {
  TriangulationResult out;
  if (obs.size() < 2) {
    out.reason = "fewer than 2 observations";
    return out;
  }
  auto init = model.linear_init(obs);
  if (!init) {
    out.reason = "degenerate linear initialization";
    return out;
  }
  VecX f = *init;

  const int dz = model.dz();
  const int df = model.df();
  for (int it = 0; it < 10; ++it) {
    MatX jtj = MatX::Zero(df, df);
    VecX jtr = VecX::Zero(df);
    bool bad = false;
    for (const auto& o : obs) {
      VecX r;
      MatX j;
      try {
        r = model.measure(o.pose, f) - o.z;
        j = model.measure_jac_feat(o.pose, f);
      } catch (const DomainError&) {
        bad = true;
        break;
      }
      jtj += j.transpose() * j;
      jtr += j.transpose() * r;
    }
    if (bad) {
      out.reason = "refinement left the projection domain";
      return out;
    }
    Eigen::LDLT<MatX> ldlt(jtj);
    if (ldlt.info() != Eigen::Success) {
      out.reason = "singular refinement system";
      return out;
    }
    const VecX step = ldlt.solve(-jtr);
    f += step;
    if (step.norm() < 1e-12) break;
  }

  double ss = 0.0;
  for (const auto& o : obs) {
    try {
      ss += (model.measure(o.pose, f) - o.z).squaredNorm();
    } catch (const DomainError&) {
      out.reason = "triangulated point behind camera";
      return out;
    }
  }
  out.residual_rms = std::sqrt(ss / (static_cast<double>(obs.size()) * dz));
  if (out.residual_rms > max_residual_rms) {
    out.reason = "residual above threshold";
    return out;
  }
  out.ok = true;
  out.point = f;
  return out;
}

PlanarModel::PlanarModel(Controls controls, Mat3 sigma_w, Mat2 sigma_v, Vec3 x0, Mat3 p0)
    : controls_(std::move(controls)), sigma_w_(sigma_w), sigma_v_(sigma_v), x0_(x0), p0_(p0) {
  if (controls_.v.size() != controls_.omega.size()) {
    throw StructureError("PlanarModel: control channels differ in length");
  }
}

DiscreteTransition PlanarModel::propagate(const ManifoldPoint& x, int frame_k) const {
  if (frame_k < 0 || frame_k >= static_cast<int>(controls_.v.size())) {
    throw StructureError("PlanarModel::propagate: frame index out of range");
  }
  const Vec3 xv = Vec3(x.euclidean_value());
  DiscreteTransition t;
  t.x0 = x;
  t.x1 = ManifoldPoint::euclidean(
      planar_step(xv, controls_.v[frame_k], controls_.omega[frame_k], controls_.dt));
  t.phi = planar_step_jacobian(xv, controls_.v[frame_k], controls_.omega[frame_k], controls_.dt);
  t.sigma_w = sigma_w_;
  t.t0 = frame_k * controls_.dt;
  t.t1 = (frame_k + 1) * controls_.dt;
  return t;
}

VecX PlanarModel::measure(const ManifoldPoint& pose, const VecX& f) const {
  return planar_measure(Vec3(pose.euclidean_value()), Vec2(f));
}

MatX PlanarModel::measure_jac_pose(const ManifoldPoint&, const VecX&) const {
  return planar_measure_jac_state();
}

MatX PlanarModel::measure_jac_feat(const ManifoldPoint&, const VecX&) const {
  return planar_measure_jac_feat();
}

std::optional<VecX> PlanarModel::inverse_measure(const ManifoldPoint& pose, const VecX& z) const {
  return VecX(planar_inverse_measure(Vec3(pose.euclidean_value()), Vec2(z)));
}

std::optional<VecX> PlanarModel::linear_init(const std::vector<PoseObservation>& obs) const {
  // Least squares for z = f - pos: the average of back-projections.
  Vec2 acc = Vec2::Zero();
  for (const auto& o : obs) acc += planar_inverse_measure(Vec3(o.pose.euclidean_value()), Vec2(o.z));
  return VecX(acc / static_cast<double>(obs.size()));
}

StereoImuModel::StereoImuModel(StereoIntrinsics intr, Extrinsics ext, ImuNoiseSpec noise,
                               std::vector<ImuSample> imu, std::vector<double> frame_times,
                               double pixel_sigma, ManifoldPoint x0, MatX p0)
    : intr_(intr),
      ext_(ext),
      noise_(noise),
      dyn_(noise),
      imu_(std::move(imu)),
      frame_times_(std::move(frame_times)),
      pixel_sigma_(pixel_sigma),
      x0_(std::move(x0)),
      p0_(std::move(p0)) {
  if (frame_times_.size() < 1) throw StructureError("StereoImuModel: no frames");
}

std::vector<ImuSample> StereoImuModel::frame_slice(int frame_k) const {
  if (frame_k < 0 || frame_k + 1 >= static_cast<int>(frame_times_.size())) {
    throw StructureError("StereoImuModel: frame index out of range");
  }
  const double t0 = frame_times_[frame_k], t1 = frame_times_[frame_k + 1];
  std::vector<ImuSample> slice;
  for (const auto& s : imu_) {
    if (s.t >= t0 - 1e-9 && s.t <= t1 + 1e-9) slice.push_back(s);
  }
  if (slice.size() < 2) {
    throw DataError("StereoImuModel: fewer than 2 IMU samples in frame interval " +
                    std::to_string(frame_k));
  }
  return slice;
}

DiscreteTransition StereoImuModel::propagate(const ManifoldPoint& x, int frame_k) const {
  return discretize(dyn_, x, frame_slice(frame_k));
}

ManifoldPoint StereoImuModel::camera_pose(const ManifoldPoint& x) const {
  return make_camera_pose(imu_to_camera(x, ext_));
}

MatX StereoImuModel::camera_pose_jacobian(const ManifoldPoint& x) const {
  return imu_to_camera_jacobian(x, ext_);
}

MatX StereoImuModel::sigma_v() const {
  return pixel_sigma_ * pixel_sigma_ * Mat3::Identity();
}

VecX StereoImuModel::measure(const ManifoldPoint& pose, const VecX& f) const {
  return stereo_project(intr_, camera_pose_view(pose), Vec3(f));
}

MatX StereoImuModel::measure_jac_pose(const ManifoldPoint& pose, const VecX& f) const {
  return stereo_jac_pose(intr_, camera_pose_view(pose), Vec3(f));
}

MatX StereoImuModel::measure_jac_feat(const ManifoldPoint& pose, const VecX& f) const {
  return stereo_jac_feat(intr_, camera_pose_view(pose), Vec3(f));
}

std::optional<VecX> StereoImuModel::linear_init(const std::vector<PoseObservation>& obs) const {
  Vec3 acc = Vec3::Zero();
  int n = 0;
  for (const auto& o : obs) {
    auto p = stereo_backproject(intr_, camera_pose_view(o.pose), Vec3(o.z));
    if (p) {
      acc += *p;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return VecX(acc / n);
}

}  // namespace filtopt
