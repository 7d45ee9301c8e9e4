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

#include <memory>
#include <string>
#include <vector>

#include "filtopt/estimators/msckf.hpp"
#include "filtopt/models.hpp"

namespace filtopt {

enum class ModelKind { planar2d, stereo3d };

struct SimConfig {
  std::uint64_t seed = 42;  // mandatory; there is no entropy source
  ModelKind model = ModelKind::planar2d;
  int steps = 200;
  int landmarks = 40;

  // Planar circle (slightly under one lap so tracks never wrap around).
  double dt = 0.1;
  double speed = 1.6;            // m/s
  double lap_fraction = 0.9;     // fraction of a full circle over the run
  double max_range = 4.5;        // visibility radius, meters
  Vec3 sigma_w_diag = Vec3(4e-4, 4e-4, 1e-4);  // per-step process covariance diagonal
  double sigma_v_std = 0.05;     // measurement noise std, meters

  // Stereo 3D.
  double frame_dt = 0.05;        // 20 Hz frames
  int imu_per_frame = 10;        // 200 Hz IMU
  double circle_radius = 5.0;
  double height_amp = 0.5;       // sinusoidal altitude amplitude
  double height_freq = 0.2;      // altitude cycles per second
  double landmark_depth = 4.0;   // cylinder offset beyond the path radius
  double max_depth = 15.0;
  double pixel_sigma = 0.05;     // pixels, per coordinate
  StereoIntrinsics intrinsics;
  ImuNoiseSpec imu_noise{1e-6, 1e-5, 1e-10, 1e-9};
  Vec3 gyro_bias = Vec3::Zero();
  Vec3 accel_bias = Vec3::Zero();

  void validate() const;
};

struct Landmark {
  long id = 0;
  VecX position;  // 2- or 3-vector
};

struct GroundTruthPose {
  double t = 0.0;
  VecX state;  // planar: (x, y, theta); stereo: (px, py, pz, qw, qx, qy, qz)
};

struct World {
  ModelKind model = ModelKind::planar2d;
  std::vector<Landmark> landmarks;
  std::vector<GroundTruthPose> trajectory;
};

struct SimDataset {
  SimConfig config;
  World world;
  Frames tracks;               // per frame, sorted by feature id
  std::vector<ImuSample> imu;  // stereo only
  // Initial belief handed to estimators.
  VecX x0;   // planar (x, y, theta) or stereo IMU state coordinates (q, v, bg, ba, r)
  MatX p0;
};

// Scripted-control planar trajectory (exact unicycle arcs, optional per-step
// process noise drawn through the given stream).
std::vector<Vec3> gen_trajectory_2d(const SimConfig& cfg, Rng* process_noise);

// z = f - x_pos (+ noise when rng given).
Vec2 measure_planar(const Vec3& pose, const Vec2& landmark, const Mat2& sigma_v, Rng* rng);

// Stereo projection (+ noise); throws DomainError behind the camera.
Vec3 measure_stereo(const StereoIntrinsics& k, const CameraPose& pose, const Vec3& landmark,
                    double pixel_sigma, Rng* rng);

// Full deterministic dataset (world, tracks, IMU stream, initial belief).
SimDataset gen_dataset(const SimConfig& cfg);

// Estimator-facing model built from a dataset.
std::unique_ptr<SlamModel> make_model(const SimDataset& data);

}  // namespace filtopt
