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
#include "filtopt/estimators/msckf.hpp"

#include <algorithm>
#include <cmath>

namespace filtopt {

namespace {

constexpr int kDynBlock = 0;
int pose_block_id(int idx) { return 1 + idx; }
int feat_block_id(int idx) { return 100000 + idx; }

bool pair_less(const MsckfBelief::Pair& a, const MsckfBelief::Pair& b) {
  if (a.pose_id != b.pose_id) return a.pose_id < b.pose_id;
  return a.feature_id < b.feature_id;
}

}  // namespace

int MsckfBelief::dim() const {
  int d = dyn.tangent_dim();
  for (const auto& p : poses) d += p.tangent_dim();
  return d;
}

int MsckfBelief::pose_offset(int idx) const {
  int off = dyn.tangent_dim();
  for (int i = 0; i < idx; ++i) off += poses[i].tangent_dim();
  return off;
}

int MsckfBelief::pose_index(long pose_id) const {
  for (size_t i = 0; i < pose_ids.size(); ++i) {
    if (pose_ids[i] == pose_id) return static_cast<int>(i);
  }
  throw StructureError("MsckfBelief: unknown pose id " + std::to_string(pose_id));
}

const ManifoldPoint& MsckfBelief::pose(long pose_id) const { return poses[pose_index(pose_id)]; }

void MsckfBelief::check() const {
  if (pose_ids.size() != poses.size()) throw StructureError("MsckfBelief: pose list mismatch");
  if (cov.rows() != dim() || cov.cols() != dim()) {
    throw StructureError("MsckfBelief: covariance dimension mismatch");
  }
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
    throw NumericalError("MsckfBelief: covariance not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<MatX> es(symmetrize(cov), Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-9) throw NumericalError("MsckfBelief: covariance not PSD");
  for (const auto& pr : s_z) {
    if (std::find(pose_ids.begin(), pose_ids.end(), pr.pose_id) == pose_ids.end()) {
      throw StructureError("MsckfBelief: S_z pair references dead pose");
    }
  }
}

std::vector<MsckfBelief::Pair> MsckfSets::processing_pairs() const {
  std::vector<MsckfBelief::Pair> out = s_z1;
  out.insert(out.end(), s_z2.begin(), s_z2.end());
  std::sort(out.begin(), out.end(), pair_less);
  out.erase(std::unique(out.begin(), out.end(),
                        [](const MsckfBelief::Pair& a, const MsckfBelief::Pair& b) {
                          return a.pose_id == b.pose_id && a.feature_id == b.feature_id;
                        }),
            out.end());
  return out;
}

namespace {

MsckfSets select_sets_impl(const MsckfBelief& b, const std::set<long>& seen_at_newest,
                           int window_count, int droppable_positions, int n_max) {
  MsckfSets out;
  std::set<long> sx_set;
  if (window_count >= n_max - 1) {
    // 1-based position i with i mod 3 == 2: the second oldest, then every third.
    for (int i = 1; i <= droppable_positions; ++i) {
      if (i % 3 == 2) {
        out.s_x.push_back(b.pose_ids[i - 1]);
        sx_set.insert(b.pose_ids[i - 1]);
      }
    }
  }

  // Poses in S_x at which each feature is observed.
  std::map<long, std::set<long>> feat_sx_poses;
  for (const auto& pr : b.s_z) {
    if (sx_set.count(pr.pose_id)) feat_sx_poses[pr.feature_id].insert(pr.pose_id);
  }

  std::set<long> sf;
  for (const auto& pr : b.s_z) {
    if (sx_set.count(pr.pose_id)) {
      auto it = feat_sx_poses.find(pr.feature_id);
      if (it != feat_sx_poses.end() && it->second.size() == sx_set.size()) {
        out.s_z1.push_back(pr);
        sf.insert(pr.feature_id);
      }
    }
    if (!seen_at_newest.count(pr.feature_id)) {
      out.s_z2.push_back(pr);
      sf.insert(pr.feature_id);
    }
  }
  out.s_f.assign(sf.begin(), sf.end());
  return out;
}

}  // namespace

MsckfSets msckf_select_sets(const MsckfBelief& b, int n_max) {
  if (b.n() == 0) return {};
  const long newest = b.pose_ids.back();
  std::set<long> seen_at_newest;
  for (const auto& pr : b.s_z) {
    if (pr.pose_id == newest) seen_at_newest.insert(pr.feature_id);
  }
  return select_sets_impl(b, seen_at_newest, b.n(), b.n(), n_max);
}

MsckfSets msckf_select_sets_pre_augment(const MsckfBelief& b, const std::set<long>& incoming,
                                        int n_max) {
  // The incoming frame counts toward the window size but cannot be dropped.
  return select_sets_impl(b, incoming, b.n() + 1, b.n(), n_max);
}

namespace {

// FullState mirroring the belief layout (dyn first, then poses in order).
FullState belief_state(const MsckfBelief& b) {
  FullState s;
  s.add_block(kDynBlock, BlockKind::imu_state, b.dyn);
  for (int i = 0; i < b.n(); ++i) {
    s.add_block(pose_block_id(i), BlockKind::pose, b.poses[i]);
  }
  return s;
}

// Full-state Jacobian of psi (nonzero only in the dyn columns).
MatX clone_jacobian_full(const MsckfBelief& b, const SlamModel& model) {
  MatX psi = MatX::Zero(model.pose_dim(), b.dim());
  psi.leftCols(b.dyn_dim()) = model.camera_pose_jacobian(b.dyn);
  return psi;
}

}  // namespace

MsckfBelief msckf_pose_augment(const MsckfBelief& b, const SlamModel& model, long new_pose_id) {
  const ManifoldPoint new_pose = model.camera_pose(b.dyn);
  const MatX psi = clone_jacobian_full(b, model);
  const int d = b.dim();
  const int dp = model.pose_dim();

  MsckfBelief out = b;
  out.pose_ids.push_back(new_pose_id);
  out.poses.push_back(new_pose);
  out.cov = MatX(d + dp, d + dp);
  out.cov.topLeftCorner(d, d) = b.cov;
  out.cov.topRightCorner(d, dp) = b.cov * psi.transpose();
  out.cov.bottomLeftCorner(dp, d) = psi * b.cov;
  out.cov.bottomRightCorner(dp, dp) = psi * b.cov * psi.transpose();
  out.cov = symmetrize(out.cov);
  return out;
}

MsckfBelief msckf_pose_augment_gn(const MsckfBelief& b, const SlamModel& model, long new_pose_id,
                                  double epsilon) {
  if (!(epsilon > 0)) throw StructureError("msckf_pose_augment_gn: epsilon must be positive");
  const ManifoldPoint new_pose = model.camera_pose(b.dyn);

  FullState s = belief_state(b);
  const int new_block = pose_block_id(b.n());
  s.add_block(new_block, BlockKind::pose, new_pose);

  RunningCost cost(s);
  cost.add_prior({belief_state(b), b.cov});

  // eps^{-1} |x_new [-] psi(dyn)|^2.
  ResidualBlock r;
  r.kind = ResidualKind::measurement;
  r.block_ids = {new_block, kDynBlock};
  const int dp = model.pose_dim();
  r.sqrt_info = (1.0 / std::sqrt(epsilon)) * MatX::Identity(dp, dp);
  r.residual_dim = dp;
  const SlamModel* m = &model;
  r.eval = [m](const BlockValues& v) { return boxminus(v[0], m->camera_pose(v[1])); };
  r.jac = [m](const BlockValues& v) {
    const ManifoldPoint psi_x = m->camera_pose(v[1]);
    return std::vector<MatX>{boxminus_jacobian(v[0], psi_x),
                             boxminus_jacobian_wrt_base(v[0], psi_x) *
                                 m->camera_pose_jacobian(v[1])};
  };
  cost.add_residual(r);

  const auto rep = gauss_newton_step(cost, s);
  if (rep.diverged) throw DivergenceError("msckf_pose_augment_gn: " + rep.note);

  MsckfBelief out = b;
  out.pose_ids.push_back(new_pose_id);
  out.poses.push_back(rep.mean.value(new_block));
  out.dyn = rep.mean.value(kDynBlock);
  for (int i = 0; i < b.n(); ++i) out.poses[i] = rep.mean.value(pose_block_id(i));
  out.cov = symmetrize(rep.covariance);
  return out;
}

namespace {

struct StackedMeasurement {
  VecX residual;  // z - h at (mu, f*)
  MatX h_x;       // w.r.t. full-state tangent
  MatX h_f;       // w.r.t. stacked feature positions (s_f order)
  MatX sigma_v;   // block diagonal
  std::vector<long> feat_order;
};

StackedMeasurement stack_pairs(const MsckfBelief& b, const SlamModel& model,
                               std::vector<MsckfBelief::Pair> pairs,
                               const FeatureEstimates& estimates) {
  std::sort(pairs.begin(), pairs.end(), pair_less);
  std::set<long> feats;
  for (const auto& pr : pairs) feats.insert(pr.feature_id);

  StackedMeasurement out;
  out.feat_order.assign(feats.begin(), feats.end());
  const int dz = model.dz();
  const int df = model.df();
  const int rows = dz * static_cast<int>(pairs.size());
  out.residual = VecX(rows);
  out.h_x = MatX::Zero(rows, b.dim());
  out.h_f = MatX::Zero(rows, df * static_cast<int>(out.feat_order.size()));
  out.sigma_v = MatX::Zero(rows, rows);

  for (size_t i = 0; i < pairs.size(); ++i) {
    const auto& pr = pairs[i];
    const int pidx = b.pose_index(pr.pose_id);
    const auto fit = estimates.find(pr.feature_id);
    if (fit == estimates.end()) {
      throw StructureError("msckf update: missing feature estimate for id " +
                           std::to_string(pr.feature_id));
    }
    const VecX& f = fit->second;
    const ManifoldPoint& pose = b.poses[pidx];
    out.residual.segment(i * dz, dz) = pr.z - model.measure(pose, f);
    out.h_x.block(i * dz, b.pose_offset(pidx), dz, pose.tangent_dim()) =
        model.measure_jac_pose(pose, f);
    const int fcol =
        df * static_cast<int>(std::distance(
                 out.feat_order.begin(),
                 std::find(out.feat_order.begin(), out.feat_order.end(), pr.feature_id)));
    out.h_f.block(i * dz, fcol, dz, df) = model.measure_jac_feat(pose, f);
    out.sigma_v.block(i * dz, i * dz, dz, dz) = model.sigma_v();
  }
  return out;
}

}  // namespace

MsckfBelief msckf_feature_update_classical(const MsckfBelief& b, const SlamModel& model,
                                           const std::vector<MsckfBelief::Pair>& pairs,
                                           const FeatureEstimates& estimates) {
  if (pairs.empty()) return b;
  const auto st = stack_pairs(b, model, pairs, estimates);
  const int rows = static_cast<int>(st.residual.size());
  const int fdim = static_cast<int>(st.h_f.cols());
  if (rows <= fdim) {
    throw NumericalError("msckf update: empty nullspace (too few observations)");
  }

  // Orthonormal basis A of N(H_f^T) from the full SVD of H_f.
  Eigen::JacobiSVD<MatX> svd(st.h_f, Eigen::ComputeFullU);
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i) {
    if (svd.singularValues()[i] > 1e-10 * svd.singularValues()[0]) ++rank;
  }
  if (rank < fdim) throw NumericalError("msckf update: H_f rank-deficient");
  const MatX a = svd.matrixU().rightCols(rows - fdim);

  // QR compression of A^T H_x.
  const MatX at_hx = a.transpose() * st.h_x;
  Eigen::HouseholderQR<MatX> qr(at_hx);
  const MatX q = qr.householderQ();
  const MatX t = MatX(qr.matrixQR().triangularView<Eigen::Upper>());

  const MatX mid = q.transpose() * a.transpose() * st.sigma_v * a * q;
  Eigen::LDLT<MatX> mid_ldlt(symmetrize(mid));
  if (mid_ldlt.info() != Eigen::Success) {
    throw NumericalError("msckf update: projected noise not invertible");
  }
  const MatX tw = t.transpose() * mid_ldlt.solve(MatX::Identity(mid.rows(), mid.cols()));

  Eigen::LLT<MatX> cov_llt(symmetrize(b.cov));
  if (cov_llt.info() != Eigen::Success) throw NumericalError("msckf update: covariance not SPD");
  const MatX info = cov_llt.solve(MatX::Identity(b.dim(), b.dim()));

  const MatX info_new = symmetrize(info + tw * t);
  Eigen::LLT<MatX> info_llt(info_new);
  if (info_llt.info() != Eigen::Success) {
    throw NumericalError("msckf update: posterior information not SPD");
  }
  const MatX cov_new = symmetrize(info_llt.solve(MatX::Identity(b.dim(), b.dim())));
  const VecX delta = cov_new * (tw * (q.transpose() * (a.transpose() * st.residual)));

  // Apply the tangent correction blockwise.
  MsckfBelief out = b;
  out.dyn = boxplus(b.dyn, delta.head(b.dyn_dim()));
  for (int i = 0; i < b.n(); ++i) {
    out.poses[i] = boxplus(b.poses[i], delta.segment(b.pose_offset(i), b.poses[i].tangent_dim()));
  }
  out.cov = cov_new;
  return out;
}

MsckfBelief msckf_feature_update_opt(const MsckfBelief& b, const SlamModel& model,
                                     const std::vector<MsckfBelief::Pair>& pairs,
                                     const FeatureEstimates& estimates, int gn_iters, double tol,
                                     long* gn_steps) {
  if (pairs.empty()) return b;
  auto sorted = pairs;
  std::sort(sorted.begin(), sorted.end(), pair_less);
  std::set<long> feats;
  for (const auto& pr : sorted) feats.insert(pr.feature_id);
  std::vector<long> feat_order(feats.begin(), feats.end());

  FullState s = belief_state(b);
  std::set<int> marg_ids;
  for (size_t i = 0; i < feat_order.size(); ++i) {
    const auto fit = estimates.find(feat_order[i]);
    if (fit == estimates.end()) {
      throw StructureError("msckf_feature_update_opt: missing feature estimate");
    }
    s.add_block(feat_block_id(static_cast<int>(i)), BlockKind::feature,
                ManifoldPoint::euclidean(fit->second));
    marg_ids.insert(feat_block_id(static_cast<int>(i)));
  }

  RunningCost cost(s);
  cost.add_prior({belief_state(b), b.cov});
  const MatX sv_sqrt = sqrt_information(model.sigma_v());
  const SlamModel* m = &model;
  for (const auto& pr : sorted) {
    const int pidx = b.pose_index(pr.pose_id);
    const int fidx = static_cast<int>(
        std::distance(feat_order.begin(), std::find(feat_order.begin(), feat_order.end(),
                                                    pr.feature_id)));
    ResidualBlock r;
    r.kind = ResidualKind::measurement;
    r.block_ids = {pose_block_id(pidx), feat_block_id(fidx)};
    r.sqrt_info = sv_sqrt;
    r.residual_dim = model.dz();
    r.key1 = pr.pose_id;
    r.key2 = pr.feature_id;
    const VecX z = pr.z;
    r.eval = [m, z](const BlockValues& v) {
      return VecX(z - m->measure(v[0], v[1].euclidean_value()));
    };
    r.jac = [m](const BlockValues& v) {
      return std::vector<MatX>{-m->measure_jac_pose(v[0], v[1].euclidean_value()),
                               -m->measure_jac_feat(v[0], v[1].euclidean_value())};
    };
    cost.add_residual(r);
  }

  // Iterated variant: refine the linearization point over (state, features)
  // before marginalizing.
  if (gn_iters > 1) {
    const auto solve = gauss_newton_solve(cost, s, gn_iters, tol);
    if (solve.diverged) throw DivergenceError("msckf_feature_update_opt: " + solve.note);
    if (gn_steps) *gn_steps += solve.iterations;
  }

  // Theorem-7 marginalization: the whole stack is C_2, so the report carries
  // the full posterior over (dyn, poses).
  FullState lin = cost.state();
  MarginalizeOptions mo;
  mo.whole_cost_as_c2 = true;
  const auto rep = marginalize(cost, lin, marg_ids, mo);

  MsckfBelief out = b;
  out.dyn = rep.mean_K.value(kDynBlock);
  for (int i = 0; i < b.n(); ++i) out.poses[i] = rep.mean_K.value(pose_block_id(i));
  out.cov = symmetrize(rep.covariance_K);
  return out;
}

MsckfBelief msckf_propagate_classical(const MsckfBelief& b, const DiscreteTransition& tr) {
  const int dd = b.dyn_dim();
  const int rest = b.dim() - dd;
  MsckfBelief out = b;
  out.dyn = tr.apply(b.dyn);
  out.cov.topLeftCorner(dd, dd) =
      tr.phi * b.cov.topLeftCorner(dd, dd) * tr.phi.transpose() + tr.sigma_w;
  if (rest > 0) {
    out.cov.topRightCorner(dd, rest) = tr.phi * b.cov.topRightCorner(dd, rest);
    out.cov.bottomLeftCorner(rest, dd) = out.cov.topRightCorner(dd, rest).transpose();
  }
  out.cov = symmetrize(out.cov);
  return out;
}

MsckfBelief msckf_propagate_opt(const MsckfBelief& b, const DiscreteTransition& tr) {
  // Kept blocks first (new dyn, poses), marginalized old dyn last.
  const int old_dyn = 90000;
  FullState s;
  s.add_block(kDynBlock, BlockKind::imu_state, tr.apply(b.dyn));
  for (int i = 0; i < b.n(); ++i) s.add_block(pose_block_id(i), BlockKind::pose, b.poses[i]);
  s.add_block(old_dyn, BlockKind::imu_state, b.dyn);

  // Prior over (old dyn, poses) in the belief's layout.
  FullState prior_mean;
  prior_mean.add_block(old_dyn, BlockKind::imu_state, b.dyn);
  for (int i = 0; i < b.n(); ++i) {
    prior_mean.add_block(pose_block_id(i), BlockKind::pose, b.poses[i]);
  }
  RunningCost cost(s);
  cost.add_prior({prior_mean, b.cov});

  ResidualBlock dyn;
  dyn.kind = ResidualKind::dynamics;
  dyn.block_ids = {old_dyn, kDynBlock};
  dyn.sqrt_info = sqrt_information(tr.sigma_w);
  dyn.residual_dim = b.dyn_dim();
  dyn.eval = [tr](const BlockValues& v) { return boxminus(v[1], tr.apply(v[0])); };
  dyn.jac = [tr](const BlockValues& v) {
    const ManifoldPoint g = tr.apply(v[0]);
    return std::vector<MatX>{boxminus_jacobian_wrt_base(v[1], g) * tr.phi,
                             boxminus_jacobian(v[1], g)};
  };
  cost.add_residual(dyn);

  FullState lin = s;
  auto rep = marginalize(cost, lin, {old_dyn});

  MsckfBelief out = b;
  out.dyn = rep.mean_K.value(kDynBlock);
  for (int i = 0; i < b.n(); ++i) out.poses[i] = rep.mean_K.value(pose_block_id(i));
  out.cov = symmetrize(rep.covariance_K);
  return out;
}

MsckfBelief msckf_drop_poses(const MsckfBelief& b, const std::vector<long>& pose_ids) {
  if (pose_ids.empty()) return b;
  std::set<long> drop(pose_ids.begin(), pose_ids.end());

  std::vector<int> keep_rows;
  for (int i = 0; i < b.dyn_dim(); ++i) keep_rows.push_back(i);
  MsckfBelief out;
  out.dyn = b.dyn;
  for (int i = 0; i < b.n(); ++i) {
    if (drop.count(b.pose_ids[i])) continue;
    out.pose_ids.push_back(b.pose_ids[i]);
    out.poses.push_back(b.poses[i]);
    const int off = b.pose_offset(i);
    for (int k = 0; k < b.poses[i].tangent_dim(); ++k) keep_rows.push_back(off + k);
  }
  out.cov = MatX(keep_rows.size(), keep_rows.size());
  for (size_t r = 0; r < keep_rows.size(); ++r) {
    for (size_t c = 0; c < keep_rows.size(); ++c) {
      out.cov(r, c) = b.cov(keep_rows[r], keep_rows[c]);
    }
  }
  for (const auto& pr : b.s_z) {
    if (!drop.count(pr.pose_id)) out.s_z.push_back(pr);
  }
  return out;
}

MsckfRunResult msckf_run(const SlamModel& model, const Frames& frames,
                         const MsckfRunOptions& opts) {
  auto log = [&](const std::string& msg) {
    if (opts.log) opts.log(msg);
  };

  MsckfRunResult out;
  MsckfBelief belief;
  belief.dyn = model.initial_state();
  belief.cov = model.initial_covariance();

  std::set<long> retired;

  try {
  for (size_t t = 0; t < frames.size(); ++t) {
    if (t > 0) {
      const DiscreteTransition tr = model.propagate(belief.dyn, static_cast<int>(t) - 1);
      // Covariance-form propagation: the joint covariance is exactly singular
      // here (the newest clone is a deterministic image of the dynamic
      // state), so the information-form route is ill-posed.  Theorem 8 makes
      // the two interchangeable; msckf_propagate_opt stays available and is
      // equivalence-tested on invertible instances.
      belief = msckf_propagate_classical(belief, tr);
      ++out.marginalizations;
    }

    std::set<long> incoming;
    for (const auto& o : frames[t]) {
      if (!retired.count(o.feature_id)) incoming.insert(o.feature_id);
    }

    // Select and run the feature update before cloning the incoming pose:
    // the processed pairs all live at existing poses, and the covariance is
    // still invertible (the last clone has been smeared by propagation).
    MsckfSets sets = msckf_select_sets_pre_augment(belief, incoming, opts.n_max);

    FeatureEstimates estimates;
    std::set<long> dropped;
    auto pairs = sets.processing_pairs();
    for (long fid : sets.s_f) {
      std::vector<PoseObservation> obs;
      for (const auto& pr : pairs) {
        if (pr.feature_id == fid) obs.push_back({belief.pose(pr.pose_id), pr.z});
      }
      // A feature that cannot be processed yet is only dropped when its track
      // has ended; a live track defers (losing just the pairs at dropped
      // poses) and is processed once it matures or leaves visibility.
      const bool track_ended = !incoming.count(fid);
      if (obs.size() < 2) {
        if (track_ended) {
          dropped.insert(fid);
          log("feature " + std::to_string(fid) + " dropped: fewer than 2 observations");
        }
        continue;
      }
      const auto tri = triangulate_feature(model, obs);
      if (!tri.ok) {
        if (track_ended) {
          dropped.insert(fid);
          log("feature " + std::to_string(fid) + " dropped: " + tri.reason);
        }
        continue;
      }
      estimates[fid] = tri.point;
    }
    out.features_dropped += static_cast<long>(dropped.size());

    std::vector<MsckfBelief::Pair> usable;
    for (const auto& pr : pairs) {
      if (!dropped.count(pr.feature_id) && estimates.count(pr.feature_id)) usable.push_back(pr);
    }

    bool updated = false;
    if (!usable.empty()) {
      const int rows = static_cast<int>(usable.size()) * model.dz();
      const int fdim = static_cast<int>(estimates.size()) * model.df();
      if (rows > fdim) {
        belief = opts.classical
                     ? msckf_feature_update_classical(belief, model, usable, estimates)
                     : msckf_feature_update_opt(belief, model, usable, estimates,
                                                opts.iterated ? opts.max_gn : 1, opts.tol,
                                                &out.gn_steps);
        ++out.gn_steps;
        out.features_processed += static_cast<long>(estimates.size());
        updated = true;
      }
    }
    if (!updated) estimates.clear();  // nullspace empty: defer to a later frame

    // Cleanup: processed/dropped features and dropped poses leave the sets.
    std::set<long> gone = dropped;
    for (const auto& kv : estimates) gone.insert(kv.first);
    for (long fid : gone) retired.insert(fid);
    std::set<long> sx(sets.s_x.begin(), sets.s_x.end());
    std::vector<MsckfBelief::Pair> remaining;
    for (const auto& pr : belief.s_z) {
      if (gone.count(pr.feature_id) || sx.count(pr.pose_id)) continue;
      remaining.push_back(pr);
    }
    belief.s_z = std::move(remaining);
    if (!sets.s_x.empty()) {
      belief = msckf_drop_poses(belief, sets.s_x);
      out.marginalizations += static_cast<long>(sets.s_x.size());
    }

    // Clone the incoming frame's pose and record its measurements.
    belief = msckf_pose_augment(belief, model, static_cast<long>(t));
    for (const auto& o : frames[t]) {
      if (retired.count(o.feature_id)) continue;
      belief.s_z.push_back({static_cast<long>(t), o.feature_id, o.z});
    }
    std::sort(belief.s_z.begin(), belief.s_z.end(), pair_less);

    if (!belief.cov.allFinite()) throw DivergenceError("msckf_run: non-finite covariance");
    out.max_pose_count = std::max(out.max_pose_count, belief.n());
    out.estimates.push_back(belief.dyn);
  }
  } catch (const DivergenceError&) {
    out.diverged = true;
  }
  out.final_belief = belief;
  return out;
}

}  // namespace filtopt
