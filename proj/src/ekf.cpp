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
#include "filtopt/estimators/ekf.hpp"

#include <algorithm>
#include <cmath>

namespace filtopt {

namespace {

constexpr int kPoseId = 0;
// Feature block ids offset so they never collide with pose ids.
int feat_block_id(int slot) { return 100 + slot; }

}  // namespace

int EkfBelief::slot_of(long feature_id) const {
  for (size_t i = 0; i < feature_ids.size(); ++i) {
    if (feature_ids[i] == feature_id) return static_cast<int>(i);
  }
  return -1;
}

void EkfBelief::check() const {
  if (mean.size() != dim() || cov.rows() != dim() || cov.cols() != dim()) {
    throw StructureError("EkfBelief: dimension mismatch");
  }
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
    throw NumericalError("EkfBelief: covariance not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<MatX> es(symmetrize(cov), Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-9) {
    throw NumericalError("EkfBelief: covariance not PSD");
  }
}

EkfBelief ekf_feature_augment_classical(const EkfBelief& b, const std::vector<EkfObservation>& zs,
                                        const Mat2& sigma_v) {
  if (zs.empty()) return b;
  const int pp = static_cast<int>(zs.size());
  const int d0 = b.dim();

  EkfBelief out;
  out.feature_ids = b.feature_ids;
  out.mean = VecX(d0 + 2 * pp);
  out.mean.head(d0) = b.mean;
  for (int k = 0; k < pp; ++k) {
    out.mean.segment<2>(d0 + 2 * k) = planar_inverse_measure(b.pose(), zs[k].z);
    out.feature_ids.push_back(zs[k].feature_id);
  }

  // L_x = d ell / d x = [I2 0] per feature, L_z = I2.
  MatX lx = MatX::Zero(2 * pp, 3);
  for (int k = 0; k < pp; ++k) lx.block<2, 2>(2 * k, 0) = Mat2::Identity();
  MatX lz = MatX::Identity(2 * pp, 2 * pp);
  MatX sv = MatX::Zero(2 * pp, 2 * pp);
  for (int k = 0; k < pp; ++k) sv.block<2, 2>(2 * k, 2 * k) = sigma_v;

  const MatX sxx = b.cov.topLeftCorner(3, 3);
  const MatX sx_all = b.cov.topRows(3);  // [Sxx Sxf]
  out.cov = MatX::Zero(d0 + 2 * pp, d0 + 2 * pp);
  out.cov.topLeftCorner(d0, d0) = b.cov;
  out.cov.block(d0, 0, 2 * pp, d0) = lx * sx_all;
  out.cov.block(0, d0, d0, 2 * pp) = (lx * sx_all).transpose();
  out.cov.block(d0, d0, 2 * pp, 2 * pp) = lx * sxx * lx.transpose() + lz * sv * lz.transpose();
  out.cov = symmetrize(out.cov);
  return out;
}

namespace {

// Stacked H for measurements of existing features: rows 2 per observation.
MatX ekf_measurement_matrix(const EkfBelief& b, const std::vector<EkfObservation>& zs) {
  MatX h = MatX::Zero(2 * zs.size(), b.dim());
  for (size_t i = 0; i < zs.size(); ++i) {
    const int slot = b.slot_of(zs[i].feature_id);
    if (slot < 0) throw StructureError("ekf update: unknown feature id");
    h.block<2, 2>(2 * i, 0) = -Mat2::Identity();
    h.block<2, 2>(2 * i, 3 + 2 * slot) = Mat2::Identity();
  }
  return h;
}

VecX ekf_innovation(const EkfBelief& b, const std::vector<EkfObservation>& zs) {
  VecX y(2 * zs.size());
  for (size_t i = 0; i < zs.size(); ++i) {
    const int slot = b.slot_of(zs[i].feature_id);
    y.segment<2>(2 * i) = zs[i].z - planar_measure(b.pose(), b.feature(slot));
  }
  return y;
}

}  // namespace

EkfBelief ekf_feature_update_classical(const EkfBelief& b, const std::vector<EkfObservation>& zs,
                                       const Mat2& sigma_v) {
  if (zs.empty()) return b;
  const MatX h = ekf_measurement_matrix(b, zs);
  const VecX y = ekf_innovation(b, zs);
  MatX sv = MatX::Zero(2 * zs.size(), 2 * zs.size());
  for (size_t k = 0; k < zs.size(); ++k) sv.block<2, 2>(2 * k, 2 * k) = sigma_v;

  const MatX s = h * b.cov * h.transpose() + sv;
  Eigen::LDLT<MatX> ldlt(s);
  if (ldlt.info() != Eigen::Success) {
    throw NumericalError("ekf update: innovation covariance not invertible");
  }
  const MatX k = b.cov * h.transpose() * ldlt.solve(MatX::Identity(s.rows(), s.cols()));

  EkfBelief out = b;
  out.mean = b.mean + k * y;
  out.cov = symmetrize(b.cov - k * h * b.cov);
  return out;
}

EkfBelief ekf_propagate_classical(const EkfBelief& b, const Vec3& g_of_mu, const Mat3& g_jac,
                                  const Mat3& sigma_w) {
  EkfBelief out = b;
  out.mean.head<3>() = g_of_mu;
  const int pf = 2 * b.p();
  out.cov.topLeftCorner(3, 3) = g_jac * b.cov.topLeftCorner(3, 3) * g_jac.transpose() + sigma_w;
  if (pf > 0) {
    out.cov.topRightCorner(3, pf) = g_jac * b.cov.topRightCorner(3, pf);
    out.cov.bottomLeftCorner(pf, 3) = out.cov.topRightCorner(3, pf).transpose();
  }
  out.cov = symmetrize(out.cov);
  return out;
}

namespace {

// FullState mirroring the belief layout: pose block then feature blocks.
FullState belief_state(const EkfBelief& b) {
  FullState s;
  s.add_block(kPoseId, BlockKind::pose, ManifoldPoint::euclidean(b.pose()));
  for (int i = 0; i < b.p(); ++i) {
    s.add_block(feat_block_id(i), BlockKind::feature, ManifoldPoint::euclidean(b.feature(i)));
  }
  return s;
}

EkfBelief belief_from(const FullState& mean, const MatX& cov, std::vector<long> feature_ids) {
  EkfBelief out;
  out.feature_ids = std::move(feature_ids);
  out.mean = VecX(3 + 2 * out.p());
  out.mean.head<3>() = mean.value(kPoseId).euclidean_value();
  for (int i = 0; i < out.p(); ++i) {
    out.mean.segment<2>(3 + 2 * i) = mean.value(feat_block_id(i)).euclidean_value();
  }
  out.cov = symmetrize(cov);
  return out;
}

ResidualBlock planar_measurement_residual(int pose_block, int feat_block, const Vec2& z,
                                          const Mat2& sqrt_info, long key2) {
  ResidualBlock r;
  r.kind = ResidualKind::measurement;
  r.block_ids = {pose_block, feat_block};
  r.sqrt_info = sqrt_info;
  r.residual_dim = 2;
  r.key1 = pose_block;
  r.key2 = key2;
  r.eval = [z](const BlockValues& v) {
    return VecX(z - planar_measure(Vec3(v[0].euclidean_value()), Vec2(v[1].euclidean_value())));
  };
  r.jac = [](const BlockValues&) {
    return std::vector<MatX>{-planar_measure_jac_state(), -planar_measure_jac_feat()};
  };
  return r;
}

}  // namespace

EkfBelief ekf_feature_augment_opt(const EkfBelief& b, const std::vector<EkfObservation>& zs,
                                  const Mat2& sigma_v) {
  if (zs.empty()) return b;
  FullState s = belief_state(b);
  // New feature blocks initialized at ell(mu_x, z): the linearization point.
  std::vector<long> ids = b.feature_ids;
  for (size_t k = 0; k < zs.size(); ++k) {
    const int slot = b.p() + static_cast<int>(k);
    s.add_block(feat_block_id(slot), BlockKind::feature,
                ManifoldPoint::euclidean(planar_inverse_measure(b.pose(), zs[k].z)));
    ids.push_back(zs[k].feature_id);
  }

  RunningCost cost(s);
  cost.add_prior({belief_state(b), b.cov});
  const Mat2 sv_sqrt = sqrt_information(sigma_v);
  for (size_t k = 0; k < zs.size(); ++k) {
    const int slot = b.p() + static_cast<int>(k);
    cost.add_residual(planar_measurement_residual(kPoseId, feat_block_id(slot), zs[k].z, sv_sqrt,
                                                  zs[k].feature_id));
  }

  const auto rep = gauss_newton_step(cost, s);
  if (rep.diverged) throw DivergenceError("ekf_feature_augment_opt: " + rep.note);
  return belief_from(rep.mean, rep.covariance, std::move(ids));
}

EkfBelief ekf_feature_update_opt(const EkfBelief& b, const std::vector<EkfObservation>& zs,
                                 const Mat2& sigma_v, int gn_iters, double tol, long* gn_steps) {
  if (zs.empty()) return b;
  FullState s = belief_state(b);
  RunningCost cost(s);
  cost.add_prior({s, b.cov});
  const Mat2 sv_sqrt = sqrt_information(sigma_v);
  for (const auto& o : zs) {
    const int slot = b.slot_of(o.feature_id);
    if (slot < 0) throw StructureError("ekf_feature_update_opt: unknown feature id");
    cost.add_residual(
        planar_measurement_residual(kPoseId, feat_block_id(slot), o.z, sv_sqrt, o.feature_id));
  }

  const auto rep = gauss_newton_solve(cost, s, gn_iters, tol);
  if (rep.diverged) throw DivergenceError("ekf_feature_update_opt: " + rep.note);
  if (gn_steps) *gn_steps += rep.iterations;
  return belief_from(rep.mean, rep.covariance, b.feature_ids);
}

EkfBelief ekf_propagate_opt(const EkfBelief& b, const PlanarModel& model, int frame_k) {
  const DiscreteTransition tr = model.propagate(ManifoldPoint::euclidean(b.pose()), frame_k);
  constexpr int kNewPoseId = 1;

  // Kept blocks first so the marginal covariance lands in belief layout.
  FullState s;
  s.add_block(kNewPoseId, BlockKind::pose, tr.x1);
  for (int i = 0; i < b.p(); ++i) {
    s.add_block(feat_block_id(i), BlockKind::feature, ManifoldPoint::euclidean(b.feature(i)));
  }
  s.add_block(kPoseId, BlockKind::pose, ManifoldPoint::euclidean(b.pose()));

  RunningCost cost(s);
  cost.add_prior({belief_state(b), b.cov});

  ResidualBlock dyn;
  dyn.kind = ResidualKind::dynamics;
  dyn.block_ids = {kPoseId, kNewPoseId};
  dyn.sqrt_info = sqrt_information(tr.sigma_w);
  dyn.residual_dim = 3;
  dyn.eval = [tr](const BlockValues& v) {
    return VecX(v[1].euclidean_value() - tr.apply(v[0]).euclidean_value());
  };
  dyn.jac = [tr](const BlockValues&) {
    return std::vector<MatX>{-tr.phi, Mat3::Identity()};
  };
  cost.add_residual(dyn);

  auto rep = marginalize(cost, s, {kPoseId});

  // Marginal covers (new pose, features) in state order.
  EkfBelief out;
  out.feature_ids = b.feature_ids;
  out.mean = VecX(b.dim());
  out.mean.head<3>() = rep.mean_K.value(kNewPoseId).euclidean_value();
  for (int i = 0; i < b.p(); ++i) {
    out.mean.segment<2>(3 + 2 * i) = rep.mean_K.value(feat_block_id(i)).euclidean_value();
  }
  out.cov = symmetrize(rep.covariance_K);
  return out;
}

EkfRunResult ekf_run(const PlanarModel& model, const FrameObservations& frames,
                     const EkfRunOptions& opts) {
  EkfRunResult out;
  EkfBelief belief;
  belief.mean = Vec3(model.initial_state().euclidean_value());
  belief.cov = model.initial_covariance();

  const Mat2 sigma_v(model.sigma_v());
  try {
  for (size_t t = 0; t < frames.size(); ++t) {
    if (t > 0) {
      if (opts.classical) {
        const Vec3 mu_x = belief.pose();
        const auto tr = model.propagate(ManifoldPoint::euclidean(mu_x), static_cast<int>(t) - 1);
        belief = ekf_propagate_classical(belief, Vec3(tr.x1.euclidean_value()), Mat3(tr.phi),
                                         model.sigma_w());
      } else {
        belief = ekf_propagate_opt(belief, model, static_cast<int>(t) - 1);
      }
      ++out.marginalizations;
    }

    std::vector<EkfObservation> new_feats, existing;
    for (const auto& o : frames[t]) {
      (belief.slot_of(o.feature_id) < 0 ? new_feats : existing).push_back(o);
    }
    std::sort(new_feats.begin(), new_feats.end(),
              [](const EkfObservation& a, const EkfObservation& b) {
                return a.feature_id < b.feature_id;
              });

    if (!new_feats.empty()) {
      belief = opts.classical ? ekf_feature_augment_classical(belief, new_feats, sigma_v)
                              : ekf_feature_augment_opt(belief, new_feats, sigma_v);
      ++out.gn_steps;
    }
    if (!existing.empty()) {
      if (opts.classical) {
        belief = ekf_feature_update_classical(belief, existing, sigma_v);
        ++out.gn_steps;
      } else {
        const int iters = opts.iterated ? opts.max_gn : 1;
        belief = ekf_feature_update_opt(belief, existing, sigma_v, iters, opts.tol,
                                        &out.gn_steps);
      }
    }
    if (!belief.mean.allFinite()) throw DivergenceError("ekf_run: non-finite mean");
    out.estimates.push_back(belief.pose());
  }
  } catch (const DivergenceError&) {
    out.diverged = true;
  }
  out.final_belief = belief;
  return out;
}

}  // namespace filtopt
