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
#include "filtopt/io/equiv.hpp"

#include <algorithm>
#include <cmath>

#include "filtopt/estimators/ekf.hpp"
#include "filtopt/estimators/msckf.hpp"
#include "filtopt/rng.hpp"

namespace filtopt::io {

namespace {

double rel_frobenius(const MatX& a, const MatX& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / scale;
}

MatX random_spd(Rng& rng, int n, double lo, double hi) {
  MatX g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = rng.gaussian();
  Eigen::HouseholderQR<MatX> qr(g);
  MatX q = qr.householderQ();
  VecX ev(n);
  for (int i = 0; i < n; ++i) ev[i] = rng.uniform(lo, hi);
  return symmetrize(q * ev.asDiagonal() * q.transpose());
}

// --- Planar EKF instances --------------------------------------------------

EkfBelief random_ekf_belief(Rng& rng, int p) {
  EkfBelief b;
  for (int i = 0; i < p; ++i) b.feature_ids.push_back(i);
  b.mean = rng.gaussian_vec(3 + 2 * p);
  b.cov = random_spd(rng, 3 + 2 * p, 0.05, 1.0);
  return b;
}

std::vector<EkfObservation> random_ekf_obs(Rng& rng, const EkfBelief& b, int count,
                                           long first_id) {
  std::vector<EkfObservation> obs;
  for (int k = 0; k < count; ++k) {
    EkfObservation o;
    o.feature_id = first_id + k;
    const int slot = b.slot_of(o.feature_id);
    const Vec2 truth = slot >= 0 ? b.feature(slot) : Vec2(b.mean.head<2>()) + rng.gaussian_vec(2);
    o.z = planar_measure(b.pose(), truth) + 0.1 * Vec2(rng.gaussian(), rng.gaussian());
    obs.push_back(o);
  }
  return obs;
}

struct Disc {
  double mean = 0.0, cov = 0.0;
};

Disc ekf_disc(const EkfBelief& a, const EkfBelief& b) {
  return {(a.mean - b.mean).norm(), rel_frobenius(a.cov, b.cov)};
}

Disc run_ekf_aug(Rng& rng) {
  const int p = 1 + static_cast<int>(rng.next_u64() % 3);
  const int pp = 1 + static_cast<int>(rng.next_u64() % 3);
  const EkfBelief b = random_ekf_belief(rng, p);
  const Mat2 sv = random_spd(rng, 2, 0.002, 0.02);
  const auto zs = random_ekf_obs(rng, b, pp, p);
  return ekf_disc(ekf_feature_augment_classical(b, zs, sv), ekf_feature_augment_opt(b, zs, sv));
}

Disc run_ekf_update(Rng& rng) {
  const int p = 1 + static_cast<int>(rng.next_u64() % 4);
  const EkfBelief b = random_ekf_belief(rng, p);
  const Mat2 sv = random_spd(rng, 2, 0.002, 0.02);
  const auto zs = random_ekf_obs(rng, b, p, 0);
  return ekf_disc(ekf_feature_update_classical(b, zs, sv),
                  ekf_feature_update_opt(b, zs, sv, 1));
}

Disc run_ekf_prop(Rng& rng) {
  const int p = 1 + static_cast<int>(rng.next_u64() % 4);
  const EkfBelief b = random_ekf_belief(rng, p);
  PlanarModel::Controls ctrl;
  ctrl.dt = 0.1;
  ctrl.v = {rng.uniform(0.2, 2.0)};
  ctrl.omega = {rng.uniform(-1.0, 1.0)};
  const Mat3 sw = random_spd(rng, 3, 1e-4, 1e-2);
  PlanarModel model(ctrl, sw, 0.01 * Mat2::Identity(), Vec3::Zero(), Mat3::Identity());

  const auto tr = model.propagate(ManifoldPoint::euclidean(b.pose()), 0);
  const EkfBelief classical =
      ekf_propagate_classical(b, Vec3(tr.x1.euclidean_value()), Mat3(tr.phi), sw);
  const EkfBelief opt = ekf_propagate_opt(b, model, 0);
  return ekf_disc(classical, opt);
}

// --- MSCKF instances ---------------------------------------------------------

// Geometry mirroring the stereo simulator: poses on a circle looking outward,
// features on an outer cylinder, so projections are always well-posed.
struct MsckfInstance {
  MsckfBelief belief;
  std::vector<MsckfBelief::Pair> pairs;
  FeatureEstimates estimates;
};

StereoImuModel make_equiv_model(const ImuNoiseSpec& noise, ManifoldPoint x0, const MatX& p0) {
  StereoIntrinsics intr;
  std::vector<ImuSample> imu;
  for (int k = 0; k <= 10; ++k) {
    ImuSample s;
    s.t = 0.05 * k / 10.0;
    s.omega_meas = Vec3(0.01, -0.3, 0.02);
    s.accel_meas = Vec3(0.1, 9.6, 0.4);
    imu.push_back(s);
  }
  return StereoImuModel(intr, Extrinsics{}, noise, imu, {0.0, 0.05}, 0.5, std::move(x0), p0);
}

ManifoldPoint random_imu_state(Rng& rng, double psi) {
  Mat3 rot;
  rot.col(0) = Vec3(std::sin(psi), -std::cos(psi), 0);
  rot.col(1) = Vec3(0, 0, -1);
  rot.col(2) = Vec3(std::cos(psi), std::sin(psi), 0);
  const UnitQuaternion q =
      quat_from_matrix(rot) * quat_exp(0.05 * Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian()));
  const Vec3 p = 5.0 * Vec3(std::cos(psi), std::sin(psi), 0) + 0.1 * Vec3(rng.gaussian_vec(3));
  return make_imu_state(q, 0.5 * Vec3(rng.gaussian_vec(3)), 0.01 * Vec3(rng.gaussian_vec(3)),
                        0.05 * Vec3(rng.gaussian_vec(3)), p);
}

ManifoldPoint random_camera_pose(Rng& rng, double psi) {
  Mat3 rot;
  rot.col(0) = Vec3(std::sin(psi), -std::cos(psi), 0);
  rot.col(1) = Vec3(0, 0, -1);
  rot.col(2) = Vec3(std::cos(psi), std::sin(psi), 0);
  CameraPose cp;
  cp.q_wc = quat_from_matrix(rot) *
            quat_exp(0.05 * Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian()));
  cp.r_wc = 5.0 * Vec3(std::cos(psi), std::sin(psi), 0) + 0.1 * Vec3(rng.gaussian_vec(3));
  return make_camera_pose(cp);
}

MsckfInstance random_msckf_instance(Rng& rng, const SlamModel& model, int n_poses, int n_feats,
                                    double cov_scale) {
  MsckfInstance out;
  out.belief.dyn = random_imu_state(rng, rng.uniform(0.0, 0.3));
  for (int i = 0; i < n_poses; ++i) {
    out.belief.pose_ids.push_back(i);
    out.belief.poses.push_back(random_camera_pose(rng, 0.1 + 0.12 * i));
  }
  const int d = kImuStateDim + 6 * n_poses;
  out.belief.cov = cov_scale * random_spd(rng, d, 0.2, 2.0);

  for (int f = 0; f < n_feats; ++f) {
    const double ang = rng.uniform(0.1, 0.5);
    const Vec3 truth =
        9.0 * Vec3(std::cos(ang), std::sin(ang), 0) + Vec3(0, 0, rng.uniform(-1.0, 1.0));
    for (int i = 0; i < n_poses; ++i) {
      MsckfBelief::Pair pr;
      pr.pose_id = i;
      pr.feature_id = f;
      pr.z = model.measure(out.belief.poses[i], VecX(truth)) +
             0.3 * VecX(rng.gaussian_vec(3));
      out.pairs.push_back(pr);
    }
    out.estimates[f] = VecX(truth + 0.02 * Vec3(rng.gaussian_vec(3)));
  }
  return out;
}

Disc msckf_disc(const MsckfBelief& a, const MsckfBelief& b) {
  VecX d(a.dim());
  d.head(a.dyn_dim()) = boxminus(a.dyn, b.dyn);
  for (int i = 0; i < a.n(); ++i) {
    d.segment(a.pose_offset(i), a.poses[i].tangent_dim()) = boxminus(a.poses[i], b.poses[i]);
  }
  return {d.norm(), rel_frobenius(a.cov, b.cov)};
}

Disc run_msckf_update(Rng& rng) {
  ImuNoiseSpec noise{1e-5, 1e-4, 1e-9, 1e-8};
  const ManifoldPoint x0 = random_imu_state(rng, 0.0);
  const MatX p0 = 1e-3 * random_spd(rng, kImuStateDim, 0.2, 2.0);
  const StereoImuModel model = make_equiv_model(noise, x0, p0);

  const int n_poses = 2 + static_cast<int>(rng.next_u64() % 3);
  const int n_feats = 1 + static_cast<int>(rng.next_u64() % 2);
  auto inst = random_msckf_instance(rng, model, n_poses, n_feats, 1e-3);
  const auto classical =
      msckf_feature_update_classical(inst.belief, model, inst.pairs, inst.estimates);
  const auto opt = msckf_feature_update_opt(inst.belief, model, inst.pairs, inst.estimates);
  return msckf_disc(classical, opt);
}

Disc run_msckf_prop(Rng& rng) {
  ImuNoiseSpec noise{1e-5, 1e-4, 1e-9, 1e-8};
  const ManifoldPoint x0 = random_imu_state(rng, 0.0);
  const MatX p0 = 1e-3 * random_spd(rng, kImuStateDim, 0.2, 2.0);
  const StereoImuModel model = make_equiv_model(noise, x0, p0);

  const int n_poses = 1 + static_cast<int>(rng.next_u64() % 3);
  auto inst = random_msckf_instance(rng, model, n_poses, 0, 1e-3);
  const DiscreteTransition tr = model.propagate(inst.belief.dyn, 0);
  return msckf_disc(msckf_propagate_classical(inst.belief, tr),
                    msckf_propagate_opt(inst.belief, tr));
}

Disc run_msckf_aug(Rng& rng, std::vector<std::pair<double, double>>* eps_study,
                   bool* monotone) {
  ImuNoiseSpec noise{1e-5, 1e-4, 1e-9, 1e-8};
  const ManifoldPoint x0 = random_imu_state(rng, 0.0);
  const MatX p0 = 1e-3 * random_spd(rng, kImuStateDim, 0.2, 2.0);
  const StereoImuModel model = make_equiv_model(noise, x0, p0);

  const int n_poses = static_cast<int>(rng.next_u64() % 3);
  auto inst = random_msckf_instance(rng, model, n_poses, 0, 1e-3);
  const auto limit = msckf_pose_augment(inst.belief, model, 100);

  Disc d{0.0, 0.0};
  double prev = 1e300;
  for (double eps : {1e-6, 1e-9, 1e-12}) {
    const auto gn = msckf_pose_augment_gn(inst.belief, model, 100, eps);
    const auto disc = msckf_disc(limit, gn);
    const double dist = (limit.cov - gn.cov).norm();
    if (eps_study) eps_study->push_back({eps, dist});
    if (monotone && dist > prev) *monotone = false;
    prev = dist;
    if (eps == 1e-12) d = disc;  // report the tightest epsilon
  }
  return d;
}

}  // namespace

std::vector<std::string> equiv_kinds() {
  return {"ekf_aug", "ekf_update", "ekf_prop", "msckf_aug", "msckf_update", "msckf_prop"};
}

EquivReport equiv_check(const std::string& kind, int trials, std::uint64_t seed) {
  if (trials < 1) throw StructureError("equiv_check: trials must be >= 1");
  const auto kinds = equiv_kinds();
  if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) {
    throw StructureError("equiv_check: unknown kind '" + kind + "'");
  }

  EquivReport rep;
  rep.kind = kind;
  rep.trials = trials;
  Rng root(seed);
  for (int t = 0; t < trials; ++t) {
    Rng rng = root.fork(static_cast<std::uint64_t>(t) + 1);
    Disc d;
    if (kind == "ekf_aug") {
      d = run_ekf_aug(rng);
    } else if (kind == "ekf_update") {
      d = run_ekf_update(rng);
    } else if (kind == "ekf_prop") {
      d = run_ekf_prop(rng);
    } else if (kind == "msckf_update") {
      d = run_msckf_update(rng);
    } else if (kind == "msckf_prop") {
      d = run_msckf_prop(rng);
    } else {
      std::vector<std::pair<double, double>>* study = t == 0 ? &rep.epsilon_study : nullptr;
      d = run_msckf_aug(rng, study, &rep.epsilon_monotone);
    }
    rep.max_mean_discrepancy = std::max(rep.max_mean_discrepancy, d.mean);
    rep.max_cov_discrepancy = std::max(rep.max_cov_discrepancy, d.cov);
  }
  rep.pass = rep.max_mean_discrepancy < kEquivThreshold &&
             rep.max_cov_discrepancy < kEquivThreshold && rep.epsilon_monotone;
  return rep;
}

}  // namespace filtopt::io
