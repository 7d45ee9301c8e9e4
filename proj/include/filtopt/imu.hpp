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
#include "filtopt/rng.hpp"

namespace filtopt {

struct ImuSample {
  double t = 0.0;       // seconds
  Vec3 omega_meas;      // rad/s, body frame
  Vec3 accel_meas;      // m/s^2, body frame
};

// Continuous-time white-noise / random-walk densities (autocorrelation
// E[w(s) w(s')] = K delta(s - s')).
struct ImuNoiseSpec {
  double gyro_density = 0.0;       // (rad/s)^2 / Hz
  double accel_density = 0.0;      // (m/s^2)^2 / Hz
  double gyro_bias_walk = 0.0;     // (rad/s)^2 * Hz
  double accel_bias_walk = 0.0;    // (m/s^2)^2 * Hz

  void validate() const;
};

// Continuous dynamics x' = g_ct(x, u, w) presented through its tangent
// velocity and first-order error-state model.
class ContinuousDynamics {
 public:
  virtual ~ContinuousDynamics() = default;
  // xi such that x(t + dt) ~ x [+] xi dt.
  virtual VecX tangent_velocity(const ManifoldPoint& x, const ImuSample& u) const = 0;
  // A = d(error dynamics)/d(error state) at (x, u, w = 0).
  virtual MatX error_jacobian(const ManifoldPoint& x, const ImuSample& u) const = 0;
  // B = d(error dynamics)/dw at (x, u, w = 0).
  virtual MatX noise_jacobian(const ManifoldPoint& x, const ImuSample& u) const = 0;
  // Continuous-time noise density K.
  virtual MatX noise_density() const = 0;
};

// Discrete-time transition produced by integrating over one sample span:
// nominal endpoint, first-order error transition Phi, process covariance.
struct DiscreteTransition {
  ManifoldPoint x0;     // nominal start
  ManifoldPoint x1;     // nominal endpoint g_hat(x0)
  MatX phi;             // d_x x d_x
  MatX sigma_w;         // d_x x d_x, symmetric PSD
  double t0 = 0.0, t1 = 0.0;

  // The paper's discrete map: g(x) = x1 [+] Phi (x [-] x0).
  ManifoldPoint apply(const ManifoldPoint& x) const;
};

// Integrates the nominal state with chart RK4 (inputs linearly interpolated
// between samples), accumulates Phi as a product of I + A dt factors and
// Sigma_w as Sigma <- Phi_dt Sigma Phi_dt^T + B K B^T dt per sample interval.
// Samples must have strictly increasing timestamps; the integration spans
// [samples.front().t, samples.back().t].
DiscreteTransition discretize(const ContinuousDynamics& dyn, const ManifoldPoint& x0,
                              const std::vector<ImuSample>& samples);

// IMU state (q_WS, v_S, b_g, b_a, r_WS) as a product manifold point.
// Tangent order: (d_theta, d_v, d_bg, d_ba, d_r), dimension 15.
ManifoldPoint make_imu_state(const UnitQuaternion& q_ws, const Vec3& v, const Vec3& bg,
                             const Vec3& ba, const Vec3& r_ws);

struct ImuStateView {
  UnitQuaternion q_ws;
  Vec3 v, bg, ba, r_ws;
};
ImuStateView imu_state_view(const ManifoldPoint& x);

inline constexpr int kImuStateDim = 15;
inline const Vec3 kGravityW(0.0, 0.0, -9.81);

// Continuous IMU kinematics:
//   q' = q * 1/2 [0; w_meas - b_g],  v' = R(q)(a_meas - b_a) + g_W,
//   b_g' = w_bg,  b_a' = w_ba,  r' = v.
class ImuDynamics final : public ContinuousDynamics {
 public:
  ImuDynamics(ImuNoiseSpec noise, Vec3 gravity = kGravityW)
      : noise_(noise), gravity_(gravity) {}

  VecX tangent_velocity(const ManifoldPoint& x, const ImuSample& u) const override;
  MatX error_jacobian(const ManifoldPoint& x, const ImuSample& u) const override;
  MatX noise_jacobian(const ManifoldPoint& x, const ImuSample& u) const override;
  MatX noise_density() const override;

  const Vec3& gravity() const { return gravity_; }

 private:
  ImuNoiseSpec noise_;
  Vec3 gravity_;
};

// Relative motion accumulated in the body frame at t0, gravity-free.
struct Preintegrated {
  Mat3 delta_r = Mat3::Identity();
  Vec3 delta_v = Vec3::Zero();
  Vec3 delta_p = Vec3::Zero();
  MatX covariance = MatX::Zero(9, 9);  // over (d_theta, d_v, d_p)
  Vec3 bias_gyro = Vec3::Zero();       // linearization point
  Vec3 bias_accel = Vec3::Zero();
  double dt_total = 0.0;
};

// Trapezoid accumulation of the samples under a constant bias estimate.
Preintegrated preintegrate(const std::vector<ImuSample>& samples, const Vec3& bias_gyro,
                           const Vec3& bias_accel, const ImuNoiseSpec& noise);

// Flow composition: first then second (second's frame is first's endpoint).
Preintegrated compose(const Preintegrated& a, const Preintegrated& b);

// Relative-motion factor: turns a preintegrated increment into a discrete
// transition on the 15-dim IMU state so the dynamics residual
// (x1 [-] g(x0)) is weighted by the preintegrated covariance.  Bias columns
// of Phi are zero (re-integrate when the bias estimate moves); the bias
// blocks of Sigma_w carry the random walk over the interval.
DiscreteTransition preintegrated_transition(const Preintegrated& pre, const ManifoldPoint& x0,
                                            const ImuNoiseSpec& noise,
                                            const Vec3& gravity = kGravityW);

// Simulator-side inverse of the dynamics: produce the measured (omega, accel)
// for a body with true body-frame rate omega_body and true world-frame
// acceleration accel_world at orientation q_ws.  Noise is white with the
// spec's densities sampled at interval dt (variance K/dt); deterministic
// given the rng state.
ImuSample imu_measurement_model(double t, const UnitQuaternion& q_ws, const Vec3& omega_body,
                                const Vec3& accel_world, const Vec3& gravity,
                                const Vec3& bias_gyro, const Vec3& bias_accel,
                                const ImuNoiseSpec& noise, double dt, Rng* rng);

}  // namespace filtopt
