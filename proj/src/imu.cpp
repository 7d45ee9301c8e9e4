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
#include "filtopt/imu.hpp"

#include <cmath>

namespace filtopt {

void ImuNoiseSpec::validate() const {
  if (gyro_density < 0 || accel_density < 0 || gyro_bias_walk < 0 || accel_bias_walk < 0) {
    throw StructureError("ImuNoiseSpec: densities must be nonnegative");
  }
}

ManifoldPoint DiscreteTransition::apply(const ManifoldPoint& x) const {
  return boxplus(x1, phi * boxminus(x, x0));
}

DiscreteTransition discretize(const ContinuousDynamics& dyn, const ManifoldPoint& x0,
                              const std::vector<ImuSample>& samples) {
  if (samples.empty()) throw StructureError("discretize: no samples");
  for (size_t i = 1; i < samples.size(); ++i) {
    if (!(samples[i].t > samples[i - 1].t)) {
      throw StructureError("discretize: non-monotone timestamps at index " + std::to_string(i));
    }
  }

  const int d = x0.tangent_dim();
  DiscreteTransition out;
  out.x0 = x0;
  out.t0 = samples.front().t;
  out.t1 = samples.back().t;
  out.phi = MatX::Identity(d, d);
  out.sigma_w = MatX::Zero(d, d);

  ManifoldPoint x = x0;
  for (size_t i = 0; i + 1 < samples.size(); ++i) {
    const ImuSample& u0 = samples[i];
    const ImuSample& u1 = samples[i + 1];
    const double dt = u1.t - u0.t;
    ImuSample um;
    um.t = u0.t + 0.5 * dt;
    um.omega_meas = 0.5 * (u0.omega_meas + u1.omega_meas);
    um.accel_meas = 0.5 * (u0.accel_meas + u1.accel_meas);

    // Chart RK4 on the nominal state; inputs linearly interpolated.
    const VecX k1 = dyn.tangent_velocity(x, u0);
    const VecX k2 = dyn.tangent_velocity(boxplus(x, 0.5 * dt * k1), um);
    const VecX k3 = dyn.tangent_velocity(boxplus(x, 0.5 * dt * k2), um);
    const VecX k4 = dyn.tangent_velocity(boxplus(x, dt * k3), u1);
    const VecX xi = (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;

    // First-order error-state transition about the interval midpoint input.
    const MatX a = dyn.error_jacobian(x, um);
    const MatX b = dyn.noise_jacobian(x, um);
    const MatX phi_dt = MatX::Identity(d, d) + a * dt;
    out.sigma_w = symmetrize(phi_dt * out.sigma_w * phi_dt.transpose() +
                             b * dyn.noise_density() * b.transpose() * dt);
    out.phi = phi_dt * out.phi;

    x = boxplus(x, dt * xi);
  }
  out.x1 = x;
  return out;
}

ManifoldPoint make_imu_state(const UnitQuaternion& q_ws, const Vec3& v, const Vec3& bg,
                             const Vec3& ba, const Vec3& r_ws) {
  return ManifoldPoint::product({
      ManifoldPoint::quaternion(q_ws),
      ManifoldPoint::euclidean(v),
      ManifoldPoint::euclidean(bg),
      ManifoldPoint::euclidean(ba),
      ManifoldPoint::euclidean(r_ws),
  });
}

ImuStateView imu_state_view(const ManifoldPoint& x) {
  const auto& p = x.parts();
  if (p.size() != 5) throw StructureError("imu_state_view: not an IMU state");
  return {p[0].quat_value(), Vec3(p[1].euclidean_value()), Vec3(p[2].euclidean_value()),
          Vec3(p[3].euclidean_value()), Vec3(p[4].euclidean_value())};
}

VecX ImuDynamics::tangent_velocity(const ManifoldPoint& x, const ImuSample& u) const {
  const auto s = imu_state_view(x);
  VecX xi(kImuStateDim);
  xi.segment<3>(0) = u.omega_meas - s.bg;
  xi.segment<3>(3) = s.q_ws.rotation() * (u.accel_meas - s.ba) + gravity_;
  xi.segment<3>(6).setZero();
  xi.segment<3>(9).setZero();
  xi.segment<3>(12) = s.v;
  return xi;
}

MatX ImuDynamics::error_jacobian(const ManifoldPoint& x, const ImuSample& u) const {
  const auto s = imu_state_view(x);
  const Mat3 r = s.q_ws.rotation();
  const Vec3 w = u.omega_meas - s.bg;
  const Vec3 a = u.accel_meas - s.ba;
  MatX m = MatX::Zero(kImuStateDim, kImuStateDim);
  m.block<3, 3>(0, 0) = -so3_hat(w);
  m.block<3, 3>(0, 6) = -Mat3::Identity();
  m.block<3, 3>(3, 0) = -r * so3_hat(a);
  m.block<3, 3>(3, 9) = -r;
  m.block<3, 3>(12, 3) = Mat3::Identity();
  return m;
}

MatX ImuDynamics::noise_jacobian(const ManifoldPoint& x, const ImuSample&) const {
  const auto s = imu_state_view(x);
  MatX b = MatX::Zero(kImuStateDim, 12);
  b.block<3, 3>(0, 0) = -Mat3::Identity();  // gyro white noise
  b.block<3, 3>(3, 3) = s.q_ws.rotation();  // accel white noise
  b.block<3, 3>(6, 6) = Mat3::Identity();   // gyro bias walk
  b.block<3, 3>(9, 9) = Mat3::Identity();   // accel bias walk
  return b;
}

MatX ImuDynamics::noise_density() const {
  VecX k(12);
  k.segment<3>(0).setConstant(noise_.gyro_density);
  k.segment<3>(3).setConstant(noise_.accel_density);
  k.segment<3>(6).setConstant(noise_.gyro_bias_walk);
  k.segment<3>(9).setConstant(noise_.accel_bias_walk);
  return MatX(k.asDiagonal());
}

Preintegrated preintegrate(const std::vector<ImuSample>& samples, const Vec3& bias_gyro,
                           const Vec3& bias_accel, const ImuNoiseSpec& noise) {
  if (samples.empty()) throw StructureError("preintegrate: no samples");
  noise.validate();

  Preintegrated out;
  out.bias_gyro = bias_gyro;
  out.bias_accel = bias_accel;

  MatX k6 = MatX::Zero(6, 6);
  k6.topLeftCorner<3, 3>() = noise.gyro_density * Mat3::Identity();
  k6.bottomRightCorner<3, 3>() = noise.accel_density * Mat3::Identity();

  for (size_t i = 0; i + 1 < samples.size(); ++i) {
    const double dt = samples[i + 1].t - samples[i].t;
    if (!(dt > 0)) {
      throw StructureError("preintegrate: non-monotone timestamps at index " + std::to_string(i));
    }
    const Vec3 w = 0.5 * (samples[i].omega_meas + samples[i + 1].omega_meas) - bias_gyro;
    const Vec3 a = 0.5 * (samples[i].accel_meas + samples[i + 1].accel_meas) - bias_accel;

    // Error state (d_theta, d_v, d_p), first order.
    MatX a_mat = MatX::Zero(9, 9);
    a_mat.block<3, 3>(0, 0) = -so3_hat(w);
    a_mat.block<3, 3>(3, 0) = -out.delta_r * so3_hat(a);
    a_mat.block<3, 3>(6, 3) = Mat3::Identity();
    MatX b_mat = MatX::Zero(9, 6);
    b_mat.block<3, 3>(0, 0) = -Mat3::Identity();
    b_mat.block<3, 3>(3, 3) = out.delta_r;
    const MatX phi = MatX::Identity(9, 9) + a_mat * dt;
    out.covariance = symmetrize(phi * out.covariance * phi.transpose() +
                                b_mat * k6 * b_mat.transpose() * dt);

    // Nominal increments, body frame at t0, gravity-free.
    out.delta_p += out.delta_v * dt + 0.5 * out.delta_r * a * dt * dt;
    out.delta_v += out.delta_r * a * dt;
    out.delta_r = out.delta_r * so3_exp(w * dt);
    out.dt_total += dt;
  }
  return out;
}

Preintegrated compose(const Preintegrated& a, const Preintegrated& b) {
  Preintegrated out;
  out.bias_gyro = a.bias_gyro;
  out.bias_accel = a.bias_accel;
  out.delta_p = a.delta_p + a.delta_v * b.dt_total + a.delta_r * b.delta_p;
  out.delta_v = a.delta_v + a.delta_r * b.delta_v;
  out.delta_r = a.delta_r * b.delta_r;
  out.dt_total = a.dt_total + b.dt_total;

  // Transport b's covariance into a's start frame; a's uncertainty propagates
  // through b's flow.
  MatX t = MatX::Identity(9, 9);
  t.block<3, 3>(0, 0) = b.delta_r.transpose();
  t.block<3, 3>(3, 0) = -a.delta_r * so3_hat(b.delta_v);
  t.block<3, 3>(6, 0) = -a.delta_r * so3_hat(b.delta_p);
  t.block<3, 3>(6, 3) = MatX::Identity(3, 3) * b.dt_total;
  MatX g = MatX::Identity(9, 9);
  g.block<3, 3>(3, 3) = a.delta_r;
  g.block<3, 3>(6, 6) = a.delta_r;
  out.covariance =
      symmetrize(t * a.covariance * t.transpose() + g * b.covariance * g.transpose());
  return out;
}

DiscreteTransition preintegrated_transition(const Preintegrated& pre, const ManifoldPoint& x0,
                                            const ImuNoiseSpec& noise, const Vec3& gravity) {
  const auto s = imu_state_view(x0);
  const Mat3 r0 = s.q_ws.rotation();
  const double T = pre.dt_total;

  DiscreteTransition out;
  out.x0 = x0;
  out.x1 = make_imu_state(s.q_ws * quat_from_matrix(pre.delta_r),
                          s.v + gravity * T + r0 * pre.delta_v, s.bg, s.ba,
                          s.r_ws + s.v * T + 0.5 * gravity * T * T + r0 * pre.delta_p);
  out.t1 = T;

  MatX phi = MatX::Identity(kImuStateDim, kImuStateDim);
  phi.block<3, 3>(0, 0) = pre.delta_r.transpose();
  phi.block<3, 3>(3, 0) = -r0 * so3_hat(pre.delta_v);
  phi.block<3, 3>(12, 0) = -r0 * so3_hat(pre.delta_p);
  phi.block<3, 3>(12, 3) = T * Mat3::Identity();
  out.phi = phi;

  // Preintegration noise maps through the start orientation; biases carry
  // their random walk.
  MatX g9 = MatX::Zero(kImuStateDim, 9);
  g9.block<3, 3>(0, 0) = Mat3::Identity();
  g9.block<3, 3>(3, 3) = r0;
  g9.block<3, 3>(12, 6) = r0;
  MatX sw = symmetrize(g9 * pre.covariance * g9.transpose());
  sw.block<3, 3>(6, 6) += noise.gyro_bias_walk * T * Mat3::Identity();
  sw.block<3, 3>(9, 9) += noise.accel_bias_walk * T * Mat3::Identity();
  out.sigma_w = sw;
  return out;
}

ImuSample imu_measurement_model(double t, const UnitQuaternion& q_ws, const Vec3& omega_body,
                                const Vec3& accel_world, const Vec3& gravity,
                                const Vec3& bias_gyro, const Vec3& bias_accel,
                                const ImuNoiseSpec& noise, double dt, Rng* rng) {
  ImuSample s;
  s.t = t;
  s.omega_meas = omega_body + bias_gyro;
  s.accel_meas = q_ws.rotation().transpose() * (accel_world - gravity) + bias_accel;
  if (rng != nullptr && dt > 0.0) {
    const double sg = std::sqrt(noise.gyro_density / dt);
    const double sa = std::sqrt(noise.accel_density / dt);
    s.omega_meas += sg * Vec3(rng->gaussian(), rng->gaussian(), rng->gaussian());
    s.accel_meas += sa * Vec3(rng->gaussian(), rng->gaussian(), rng->gaussian());
  }
  return s;
}

}  // namespace filtopt
