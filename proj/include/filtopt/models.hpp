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

#include <optional>
#include <vector>

#include "filtopt/imu.hpp"

namespace filtopt {

// ---------------------------------------------------------------------------
// Planar unicycle model: state (x, y, theta), feature (f1, f2),
// z = f - x_pos.
// ---------------------------------------------------------------------------

// Exact unicycle arc for piecewise-constant (v, omega) over dt.
Vec3 planar_step(const Vec3& x, double v, double omega, double dt);
Mat3 planar_step_jacobian(const Vec3& x, double v, double omega, double dt);

inline Vec2 planar_measure(const Vec3& x, const Vec2& f) { return f - x.head<2>(); }
// dh/dx over (x, y, theta) and dh/df.
MatX planar_measure_jac_state();
MatX planar_measure_jac_feat();
// Inverse measurement map: h(x, ell(x, z)) = z.
inline Vec2 planar_inverse_measure(const Vec3& x, const Vec2& z) { return Vec2(x.head<2>()) + z; }

// ---------------------------------------------------------------------------
// Stereo pinhole model: rectified pair with common intrinsics, measurement
// (u_L, u_R, v).
// ---------------------------------------------------------------------------

struct StereoIntrinsics {
  double fx = 400.0, fy = 400.0, cx = 320.0, cy = 240.0;
  double baseline = 0.1;  // meters
};

struct CameraPose {
  UnitQuaternion q_wc;  // camera-to-world
  Vec3 r_wc = Vec3::Zero();
};

ManifoldPoint make_camera_pose(const CameraPose& p);
CameraPose camera_pose_view(const ManifoldPoint& p);

inline constexpr double kMinDepth = 1e-3;

// Point in camera coordinates; depth is p_c.z().
Vec3 to_camera_frame(const CameraPose& pose, const Vec3& f_world);

// Projection of a world point into both rectified cameras.  Throws
// DomainError when the point is behind either camera.
Vec3 stereo_project(const StereoIntrinsics& k, const CameraPose& pose, const Vec3& f_world);
bool stereo_visible(const StereoIntrinsics& k, const CameraPose& pose, const Vec3& f_world,
                    double max_depth);

// d z / d (pose tangent: d_theta, d_r) and d z / d f.
MatX stereo_jac_pose(const StereoIntrinsics& k, const CameraPose& pose, const Vec3& f_world);
MatX stereo_jac_feat(const StereoIntrinsics& k, const CameraPose& pose, const Vec3& f_world);

// Closed-form point from one stereo observation (disparity back-projection).
std::optional<Vec3> stereo_backproject(const StereoIntrinsics& k, const CameraPose& pose,
                                       const Vec3& z);

// Fixed sensor-to-camera extrinsics.
struct Extrinsics {
  UnitQuaternion q_sc;
  Vec3 r_sc = Vec3::Zero();
};

// Camera pose of an IMU state: q_WC = q_WS * q_SC, r_WC = r_WS + R(q_WS) r_SC.
CameraPose imu_to_camera(const ManifoldPoint& imu_state, const Extrinsics& ext);
// 6 x 15 Jacobian of the map w.r.t. the IMU-state tangent.
MatX imu_to_camera_jacobian(const ManifoldPoint& imu_state, const Extrinsics& ext);

// ---------------------------------------------------------------------------
// Model abstraction used by the estimator schedules.  A "dynamic state" is
// what dynamics propagate (unicycle state / IMU state); a "camera pose" is
// what measurements attach to (the dynamic state itself for the planar model,
// the extrinsic-transformed pose for the stereo model).
// ---------------------------------------------------------------------------

struct PoseObservation {
  ManifoldPoint pose;  // camera pose value
  VecX z;
};

// One tracked-feature measurement; a measurement stream is one vector of
// these per frame.
struct Observation {
  long feature_id = 0;
  VecX z;
};
using Frames = std::vector<std::vector<Observation>>;

class SlamModel {
 public:
  virtual ~SlamModel() = default;

  virtual int dz() const = 0;
  virtual int df() const = 0;
  virtual int pose_dim() const = 0;

  virtual ManifoldPoint initial_state() const = 0;
  virtual MatX initial_covariance() const = 0;
  // Transition from frame k to k+1 linearized about x.
  virtual DiscreteTransition propagate(const ManifoldPoint& x, int frame_k) const = 0;
  virtual int frame_count() const = 0;

  // Pose cloning (psi) and its Jacobian w.r.t. the dynamic-state tangent.
  virtual ManifoldPoint camera_pose(const ManifoldPoint& x) const = 0;
  virtual MatX camera_pose_jacobian(const ManifoldPoint& x) const = 0;

  virtual MatX sigma_v() const = 0;
  virtual VecX measure(const ManifoldPoint& pose, const VecX& f) const = 0;
  virtual MatX measure_jac_pose(const ManifoldPoint& pose, const VecX& f) const = 0;
  virtual MatX measure_jac_feat(const ManifoldPoint& pose, const VecX& f) const = 0;

  // Measurement model on the dynamic state (pose cloning chained in).
  VecX measure_state(const ManifoldPoint& x, const VecX& f) const;
  MatX measure_state_jac_state(const ManifoldPoint& x, const VecX& f) const;

  // Inverse measurement map ell(x, z), when the model has one (planar).
  virtual std::optional<VecX> inverse_measure(const ManifoldPoint& pose, const VecX& z) const = 0;

  // Model-specific linear initialization for triangulation.
  virtual std::optional<VecX> linear_init(const std::vector<PoseObservation>& obs) const = 0;
};

struct TriangulationResult {
  bool ok = false;
  VecX point;
  double residual_rms = 0.0;
  std::string reason;
};

// Linear initialization + at most 10 Gauss-Newton refinement steps over the
// feature position with poses held fixed.  Requires >= 2 observations.
TriangulationResult triangulate_feature(const SlamModel& model,
                                        const std::vector<PoseObservation>& obs,
                                        double max_residual_rms = 1e2);

// Planar model over scripted controls (one (v, omega) pair per frame gap).
class PlanarModel final : public SlamModel {
 public:
  struct Controls {
    std::vector<double> v, omega;  // size = frame gaps
    double dt = 0.1;
  };

  PlanarModel(Controls controls, Mat3 sigma_w, Mat2 sigma_v, Vec3 x0, Mat3 p0);

  int dz() const override { return 2; }
  int df() const override { return 2; }
  int pose_dim() const override { return 3; }

  ManifoldPoint initial_state() const override { return ManifoldPoint::euclidean(x0_); }
  MatX initial_covariance() const override { return p0_; }
  DiscreteTransition propagate(const ManifoldPoint& x, int frame_k) const override;
  int frame_count() const override { return static_cast<int>(controls_.v.size()) + 1; }

  ManifoldPoint camera_pose(const ManifoldPoint& x) const override { return x; }
  MatX camera_pose_jacobian(const ManifoldPoint& x) const override {
    return MatX::Identity(x.tangent_dim(), x.tangent_dim());
  }

  MatX sigma_v() const override { return sigma_v_; }
  VecX measure(const ManifoldPoint& pose, const VecX& f) const override;
  MatX measure_jac_pose(const ManifoldPoint& pose, const VecX& f) const override;
  MatX measure_jac_feat(const ManifoldPoint& pose, const VecX& f) const override;
  std::optional<VecX> inverse_measure(const ManifoldPoint& pose, const VecX& z) const override;
  std::optional<VecX> linear_init(const std::vector<PoseObservation>& obs) const override;

  const Controls& controls() const { return controls_; }
  const Mat3& sigma_w() const { return sigma_w_; }

 private:
  Controls controls_;
  Mat3 sigma_w_;
  Mat2 sigma_v_;
  Vec3 x0_;
  Mat3 p0_;
};

// Stereo+IMU model: dynamic state is the 15-dim IMU state, poses are cloned
// camera poses, measurements are (u_L, u_R, v) pixels.
class StereoImuModel final : public SlamModel {
 public:
  StereoImuModel(StereoIntrinsics intr, Extrinsics ext, ImuNoiseSpec noise,
                 std::vector<ImuSample> imu, std::vector<double> frame_times,
                 double pixel_sigma, ManifoldPoint x0, MatX p0);

  int dz() const override { return 3; }
  int df() const override { return 3; }
  int pose_dim() const override { return 6; }

  ManifoldPoint initial_state() const override { return x0_; }
  MatX initial_covariance() const override { return p0_; }
  DiscreteTransition propagate(const ManifoldPoint& x, int frame_k) const override;
  int frame_count() const override { return static_cast<int>(frame_times_.size()); }

  ManifoldPoint camera_pose(const ManifoldPoint& x) const override;
  MatX camera_pose_jacobian(const ManifoldPoint& x) const override;

  MatX sigma_v() const override;
  VecX measure(const ManifoldPoint& pose, const VecX& f) const override;
  MatX measure_jac_pose(const ManifoldPoint& pose, const VecX& f) const override;
  MatX measure_jac_feat(const ManifoldPoint& pose, const VecX& f) const override;
  std::optional<VecX> inverse_measure(const ManifoldPoint&, const VecX&) const override {
    return std::nullopt;
  }
  std::optional<VecX> linear_init(const std::vector<PoseObservation>& obs) const override;

  const StereoIntrinsics& intrinsics() const { return intr_; }
  const Extrinsics& extrinsics() const { return ext_; }

 private:
  std::vector<ImuSample> frame_slice(int frame_k) const;

  StereoIntrinsics intr_;
  Extrinsics ext_;
  ImuNoiseSpec noise_;
  ImuDynamics dyn_;
  std::vector<ImuSample> imu_;
  std::vector<double> frame_times_;
  double pixel_sigma_;
  ManifoldPoint x0_;
  MatX p0_;
};

}  // namespace filtopt
