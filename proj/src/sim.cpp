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
#include "filtopt/sim.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace filtopt {

namespace {

constexpr double kPi = 3.14159265358979323846;

// PSD coloring (eigendecomposition square root; tolerates zero noise).
VecX draw_psd(const MatX& cov, Rng& rng) {
  Eigen::SelfAdjointEigenSolver<MatX> es(symmetrize(cov));
  const VecX lam = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * (lam.cwiseSqrt().asDiagonal() * rng.gaussian_vec(cov.rows()));
}

}  // namespace

void SimConfig::validate() const {
  if (steps < 1) throw StructureError("SimConfig: steps must be >= 1");
  if (landmarks < 0) throw StructureError("SimConfig: landmarks must be >= 0");
  if (dt <= 0 || frame_dt <= 0) throw StructureError("SimConfig: timestep must be positive");
  if ((sigma_w_diag.array() < 0).any() || sigma_v_std < 0 || pixel_sigma < 0) {
    throw StructureError("SimConfig: noise parameters must be nonnegative");
  }
  imu_noise.validate();
}

std::vector<Vec3> gen_trajectory_2d(const SimConfig& cfg, Rng* process_noise) {
  const double total_t = cfg.steps * cfg.dt;
  const double omega = 2.0 * kPi * cfg.lap_fraction / total_t;
  const Mat3 sigma_w = cfg.sigma_w_diag.asDiagonal();

  std::vector<Vec3> out;
  Vec3 x = Vec3::Zero();
  out.push_back(x);
  for (int t = 1; t < cfg.steps; ++t) {
    x = planar_step(x, cfg.speed, omega, cfg.dt);
    if (process_noise != nullptr) x += Vec3(draw_psd(sigma_w, *process_noise));
    out.push_back(x);
  }
  return out;
}

Vec2 measure_planar(const Vec3& pose, const Vec2& landmark, const Mat2& sigma_v, Rng* rng) {
  Vec2 z = planar_measure(pose, landmark);
  if (rng != nullptr) z += Vec2(draw_psd(sigma_v, *rng));
  return z;
}

Vec3 measure_stereo(const StereoIntrinsics& k, const CameraPose& pose, const Vec3& landmark,
                    double pixel_sigma, Rng* rng) {
  Vec3 z = stereo_project(k, pose, landmark);
  if (rng != nullptr && pixel_sigma > 0) {
    z += pixel_sigma * Vec3(rng->gaussian(), rng->gaussian(), rng->gaussian());
  }
  return z;
}

namespace {

SimDataset gen_planar(const SimConfig& cfg) {
  SimDataset out;
  out.config = cfg;
  out.world.model = ModelKind::planar2d;

  Rng root(cfg.seed);
  Rng traj_rng = root.fork(1);
  Rng land_rng = root.fork(2);
  Rng meas_rng = root.fork(3);

  const auto traj = gen_trajectory_2d(cfg, &traj_rng);
  for (int t = 0; t < cfg.steps; ++t) {
    out.world.trajectory.push_back({t * cfg.dt, VecX(traj[t])});
  }

  // Landmarks in an annulus around the circle path.
  const double total_t = cfg.steps * cfg.dt;
  const double omega = 2.0 * kPi * cfg.lap_fraction / total_t;
  const double radius = cfg.speed / omega;
  const Vec2 center(0.0, radius);  // trajectory starts at origin heading +x
  for (int i = 0; i < cfg.landmarks; ++i) {
    const double ang = land_rng.uniform(0.0, 2.0 * kPi);
    const double r = land_rng.uniform(radius - 1.5, radius + 1.5);
    out.world.landmarks.push_back(
        {static_cast<long>(i), VecX(Vec2(center + r * Vec2(std::cos(ang), std::sin(ang))))});
  }

  // Tracks with permanent termination: one contiguous visibility interval per
  // landmark (a lost track is lost, as a front-end tracker would report).
  const Mat2 sigma_v = cfg.sigma_v_std * cfg.sigma_v_std * Mat2::Identity();
  std::vector<bool> alive(cfg.landmarks, true), started(cfg.landmarks, false);
  out.tracks.resize(cfg.steps);
  for (int t = 0; t < cfg.steps; ++t) {
    for (int i = 0; i < cfg.landmarks; ++i) {
      if (!alive[i]) continue;
      const Vec2 f = Vec2(out.world.landmarks[i].position);
      const bool visible = (f - traj[t].head<2>()).norm() <= cfg.max_range;
      if (visible) {
        started[i] = true;
        out.tracks[t].push_back(
            {static_cast<long>(i), VecX(measure_planar(traj[t], f, sigma_v, &meas_rng))});
      } else if (started[i]) {
        alive[i] = false;
      }
    }
  }

  out.x0 = VecX(traj[0]);
  out.p0 = 1e-6 * Mat3::Identity();
  return out;
}

struct StereoTruth {
  Vec3 p, v, a;    // world frame
  UnitQuaternion q_ws;
  Vec3 omega_body;
};

StereoTruth stereo_truth_at(const SimConfig& cfg, double t) {
  const double total_t = cfg.steps * cfg.frame_dt;
  const double omega = 2.0 * kPi * cfg.lap_fraction / total_t;
  const double wz = 2.0 * kPi * cfg.height_freq;
  const double psi = omega * t;
  const double r = cfg.circle_radius;

  StereoTruth out;
  out.p = Vec3(r * std::cos(psi), r * std::sin(psi), cfg.height_amp * std::sin(wz * t));
  out.v = Vec3(-r * omega * std::sin(psi), r * omega * std::cos(psi),
               cfg.height_amp * wz * std::cos(wz * t));
  out.a = Vec3(-r * omega * omega * std::cos(psi), -r * omega * omega * std::sin(psi),
               -cfg.height_amp * wz * wz * std::sin(wz * t));

  // Optical axis radially outward, camera x along the negative tangent,
  // camera y pointing down.
  Mat3 rot;
  rot.col(0) = Vec3(std::sin(psi), -std::cos(psi), 0);
  rot.col(1) = Vec3(0, 0, -1);
  rot.col(2) = Vec3(std::cos(psi), std::sin(psi), 0);
  out.q_ws = quat_from_matrix(rot);
  out.omega_body = Vec3(0, -omega, 0);
  return out;
}

SimDataset gen_stereo(const SimConfig& cfg) {
  SimDataset out;
  out.config = cfg;
  out.world.model = ModelKind::stereo3d;

  Rng root(cfg.seed);
  Rng land_rng = root.fork(2);
  Rng meas_rng = root.fork(3);
  Rng imu_rng = root.fork(4);

  // Landmarks on a cylinder outside the path.
  const double rl = cfg.circle_radius + cfg.landmark_depth;
  for (int i = 0; i < cfg.landmarks; ++i) {
    const double ang = land_rng.uniform(0.0, 2.0 * kPi);
    const double h = land_rng.uniform(-1.5, 1.5);
    out.world.landmarks.push_back(
        {static_cast<long>(i), VecX(Vec3(rl * std::cos(ang), rl * std::sin(ang), h))});
  }

  // Frames and tracks (same permanent-termination policy as the planar sim).
  std::vector<bool> alive(cfg.landmarks, true), started(cfg.landmarks, false);
  out.tracks.resize(cfg.steps);
  for (int t = 0; t < cfg.steps; ++t) {
    const StereoTruth tr = stereo_truth_at(cfg, t * cfg.frame_dt);
    VecX gt(7);
    gt << tr.p.x(), tr.p.y(), tr.p.z(), tr.q_ws.w, tr.q_ws.vec.x(), tr.q_ws.vec.y(),
        tr.q_ws.vec.z();
    out.world.trajectory.push_back({t * cfg.frame_dt, gt});

    const CameraPose cam{tr.q_ws, tr.p};  // identity extrinsics
    for (int i = 0; i < cfg.landmarks; ++i) {
      if (!alive[i]) continue;
      const Vec3 f = Vec3(out.world.landmarks[i].position);
      const bool visible = stereo_visible(cfg.intrinsics, cam, f, cfg.max_depth);
      if (visible) {
        started[i] = true;
        out.tracks[t].push_back({static_cast<long>(i),
                                 VecX(measure_stereo(cfg.intrinsics, cam, f, cfg.pixel_sigma,
                                                     &meas_rng))});
      } else if (started[i]) {
        alive[i] = false;
      }
    }
  }

  // IMU stream at imu_per_frame times the frame rate.
  const double imu_dt = cfg.frame_dt / cfg.imu_per_frame;
  const int imu_count = (cfg.steps - 1) * cfg.imu_per_frame + 1;
  for (int k = 0; k < imu_count; ++k) {
    const double t = k * imu_dt;
    const StereoTruth tr = stereo_truth_at(cfg, t);
    out.imu.push_back(imu_measurement_model(t, tr.q_ws, tr.omega_body, tr.a, kGravityW,
                                            cfg.gyro_bias, cfg.accel_bias, cfg.imu_noise, imu_dt,
                                            &imu_rng));
  }

  // Initial belief at the true initial IMU state.
  const StereoTruth t0 = stereo_truth_at(cfg, 0.0);
  out.x0 = VecX(16);
  out.x0 << t0.q_ws.w, t0.q_ws.vec.x(), t0.q_ws.vec.y(), t0.q_ws.vec.z(), t0.v.x(), t0.v.y(),
      t0.v.z(), cfg.gyro_bias.x(), cfg.gyro_bias.y(), cfg.gyro_bias.z(), cfg.accel_bias.x(),
      cfg.accel_bias.y(), cfg.accel_bias.z(), t0.p.x(), t0.p.y(), t0.p.z();
  VecX p0_diag(kImuStateDim);
  p0_diag << 1e-6, 1e-6, 1e-6, 1e-4, 1e-4, 1e-4, 1e-8, 1e-8, 1e-8, 1e-8, 1e-8, 1e-8, 1e-6, 1e-6,
      1e-6;
  out.p0 = p0_diag.asDiagonal();
  return out;
}

}  // namespace

SimDataset gen_dataset(const SimConfig& cfg) {
  cfg.validate();
  return cfg.model == ModelKind::planar2d ? gen_planar(cfg) : gen_stereo(cfg);
}

std::unique_ptr<SlamModel> make_model(const SimDataset& data) {
  const SimConfig& cfg = data.config;
  // Zero-noise datasets are valid; the estimators' information-form residual
  // weights need invertible covariances, so floor them at a negligible level.
  constexpr double kVarFloor = 1e-12;
  if (cfg.model == ModelKind::planar2d) {
    const double total_t = cfg.steps * cfg.dt;
    const double omega = 2.0 * kPi * cfg.lap_fraction / total_t;
    PlanarModel::Controls ctrl;
    ctrl.dt = cfg.dt;
    ctrl.v.assign(cfg.steps - 1, cfg.speed);
    ctrl.omega.assign(cfg.steps - 1, omega);
    const Vec3 sw = cfg.sigma_w_diag.cwiseMax(kVarFloor);
    const double sv = std::max(cfg.sigma_v_std * cfg.sigma_v_std, kVarFloor);
    return std::make_unique<PlanarModel>(ctrl, Mat3(sw.asDiagonal()),
                                         Mat2(sv * Mat2::Identity()), Vec3(data.x0),
                                         Mat3(data.p0));
  }

  std::vector<double> frame_times;
  for (const auto& g : data.world.trajectory) frame_times.push_back(g.t);
  UnitQuaternion q0(data.x0[0], Vec3(data.x0[1], data.x0[2], data.x0[3]));
  const ManifoldPoint x0 =
      make_imu_state(q0.normalized(), Vec3(data.x0.segment<3>(4)), Vec3(data.x0.segment<3>(7)),
                     Vec3(data.x0.segment<3>(10)), Vec3(data.x0.segment<3>(13)));
  ImuNoiseSpec noise = cfg.imu_noise;
  noise.gyro_density = std::max(noise.gyro_density, kVarFloor);
  noise.accel_density = std::max(noise.accel_density, kVarFloor);
  noise.gyro_bias_walk = std::max(noise.gyro_bias_walk, 1e-14);
  noise.accel_bias_walk = std::max(noise.accel_bias_walk, 1e-14);
  const double px_sigma = std::max(cfg.pixel_sigma, 1e-6);
  return std::make_unique<StereoImuModel>(cfg.intrinsics, Extrinsics{}, noise, data.imu,
                                          frame_times, px_sigma, x0, data.p0);
}

}  // namespace filtopt
