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
#include "filtopt/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace filtopt {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Largest rotational sub-perturbation norm requested by delta.
double max_rotation_step(const FullState& x, const VecX& delta) {
  double worst = 0.0;
  std::function<void(const ManifoldPoint&, int)> visit = [&](const ManifoldPoint& p, int off) {
    using Kind = ManifoldPoint::Kind;
    switch (p.kind()) {
      case Kind::Quat:
      case Kind::Rot:
        worst = std::max(worst, delta.segment<3>(off).norm());
        break;
      case Kind::Product: {
        int o = off;
        for (const auto& part : p.parts()) {
          visit(part, o);
          o += part.tangent_dim();
        }
        break;
      }
      default:
        break;
    }
  };
  for (const auto& b : x.blocks()) {
    visit(b.value, x.span(b.id).first);
  }
  return worst;
}

}  // namespace

MatX pinv_psd(const MatX& m, int* rank) {
  if (m.rows() == 0) {
    if (rank) *rank = 0;
    return MatX::Zero(0, 0);
  }
  Eigen::SelfAdjointEigenSolver<MatX> es(symmetrize(m));
  if (es.info() != Eigen::Success) throw NumericalError("pinv_psd: eigendecomposition failed");
  const VecX& ev = es.eigenvalues();
  const double cutoff = kPinvCutoff * std::max(ev.cwiseAbs().maxCoeff(), 0.0);
  VecX inv = VecX::Zero(ev.size());
  int r = 0;
  for (int i = 0; i < ev.size(); ++i) {
    if (ev[i] > cutoff && ev[i] > 0.0) {
      inv[i] = 1.0 / ev[i];
      ++r;
    }
  }
  if (rank) *rank = r;
  return symmetrize(es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose());
}

MatX pinv_normal(const MatX& j) {
  // (J^T J)^+ via the SVD of J: same pseudoinverse as an SVD of J^T J with
  // the 1e-10 relative cutoff (sigma_i(J)^2 < 1e-10 sigma_max(J)^2 zeroed),
  // but conditioned like J instead of J^T J.
  Eigen::JacobiSVD<MatX> svd(j, Eigen::ComputeThinV);
  const VecX& s = svd.singularValues();
  if (s.size() == 0) return MatX::Zero(j.cols(), j.cols());
  const double smax2 = s[0] * s[0];
  VecX inv2 = VecX::Zero(s.size());
  for (int i = 0; i < s.size(); ++i) {
    if (s[i] * s[i] > kPinvCutoff * smax2) inv2[i] = 1.0 / (s[i] * s[i]);
  }
  return symmetrize(svd.matrixV() * inv2.asDiagonal() * svd.matrixV().transpose());
}

GaussNewtonReport gauss_newton_step(const RunningCost& cost, const FullState& x_star,
                                    const GaussNewtonOptions& opts) {
  GaussNewtonReport rep;
  const VecX c = cost.stack_residuals(x_star);
  const MatX j = cost.jacobian(x_star);
  rep.cost_before = c.squaredNorm();

  MatX sigma;
  VecX delta;
  if (opts.damping && opts.lambda_init > 0.0) {
    const MatX h = symmetrize(j.transpose() * j) +
                   opts.lambda_init * MatX::Identity(j.cols(), j.cols());
    sigma = pinv_psd(h);
    delta = -(sigma * (j.transpose() * c));
  } else {
    sigma = pinv_normal(j);
    delta = -(sigma * (j.transpose() * c));
  }

  rep.iterations = 1;
  rep.covariance = symmetrize(sigma);
  if (!delta.allFinite()) {
    rep.diverged = true;
    rep.mean = x_star;
    rep.cost_after = rep.cost_before;
    rep.note = "non-finite step";
    return rep;
  }
  if (max_rotation_step(x_star, delta) >= kPi) {
    rep.diverged = true;
    rep.mean = x_star;
    rep.cost_after = rep.cost_before;
    rep.note = "rotational step >= pi (chart violation)";
    return rep;
  }
  rep.mean = x_star.retract(delta);
  rep.cost_after = cost.eval_cost(rep.mean);
  return rep;
}

GaussNewtonReport gauss_newton_solve(RunningCost& cost, const FullState& x0, int max_iters,
                                     double tol, const GaussNewtonOptions& opts) {
  if (max_iters < 1) throw StructureError("gauss_newton_solve: max_iters must be >= 1");
  if (!cost.state().same_structure(x0)) {
    throw StructureError("gauss_newton_solve: x0 structure mismatch");
  }

  FullState x = x0;
  double lambda = opts.damping ? opts.lambda_init : 0.0;
  GaussNewtonReport last;
  last.mean = x;
  last.cost_before = cost.eval_cost(x);

  int iters = 0;
  for (; iters < max_iters; ++iters) {
    GaussNewtonOptions step_opts = opts;
    step_opts.lambda_init = lambda;
    GaussNewtonReport rep = gauss_newton_step(cost, x, step_opts);
    if (rep.diverged) {
      last = rep;
      last.iterations = iters + 1;
      break;
    }
    if (opts.damping && rep.cost_after > rep.cost_before) {
      lambda = (lambda == 0.0) ? 1e-6 : lambda * opts.lambda_growth;
      last.note = "damping increased";
      continue;
    }
    const double step_norm = x.local(rep.mean).norm();
    x = rep.mean;
    last = rep;
    last.iterations = iters + 1;
    if (step_norm < tol) {
      last.converged = true;
      break;
    }
  }
  last.iterations = std::max(last.iterations, 1);
  // Leave the cost linearized at the solution.
  for (int id : last.mean.ids()) cost.state().set_value(id, last.mean.value(id));
  return last;
}

MarginalizationReport marginalize(RunningCost& cost, const FullState& x_star,
                                  const std::set<int>& marg_ids,
                                  const MarginalizeOptions& opts) {
  if (!cost.state().same_structure(x_star)) {
    throw StructureError("marginalize: x_star structure mismatch");
  }
  for (int id : marg_ids) {
    if (!cost.state().has_block(id)) {
      throw StructureError("marginalize: unknown block " + std::to_string(id));
    }
  }

  MarginalizationReport rep;
  rep.marginalized_ids.assign(marg_ids.begin(), marg_ids.end());

  // Partition residuals.
  std::vector<const ResidualBlock*> c2;
  std::set<int> touched_marg;
  for (const auto& r : cost.residuals()) {
    const bool touches = std::any_of(r.block_ids.begin(), r.block_ids.end(),
                                     [&](int id) { return marg_ids.count(id) > 0; });
    if (touches || opts.whole_cost_as_c2) {
      c2.push_back(&r);
      rep.replaced_residual_ids.push_back(r.id);
      if (touches && r.kind != ResidualKind::prior) rep.linearized_nonlinear = true;
      for (int id : r.block_ids) {
        if (marg_ids.count(id)) touched_marg.insert(id);
      }
    }
  }
  for (int id : marg_ids) {
    if (!touched_marg.count(id)) {
      throw StructureError("marginalize: block " + std::to_string(id) +
                           " is not referenced by any residual");
    }
  }

  // Kept blocks connected to C_2, in state order.
  std::vector<int> connected;
  for (const auto& b : cost.state().blocks()) {
    if (marg_ids.count(b.id)) continue;
    for (const auto* r : c2) {
      if (std::find(r->block_ids.begin(), r->block_ids.end(), b.id) != r->block_ids.end()) {
        connected.push_back(b.id);
        break;
      }
    }
  }
  rep.connected_ids = connected;

  // Column layout [K | M] local to this marginalization.
  std::vector<int> cols;  // block id per column group
  cols.insert(cols.end(), connected.begin(), connected.end());
  std::vector<int> marg_order;
  for (const auto& b : cost.state().blocks()) {
    if (marg_ids.count(b.id)) marg_order.push_back(b.id);
  }
  cols.insert(cols.end(), marg_order.begin(), marg_order.end());

  int d_k = 0, d_m = 0;
  std::vector<int> offsets(cols.size());
  {
    int off = 0;
    for (size_t i = 0; i < cols.size(); ++i) {
      offsets[i] = off;
      off += x_star.value(cols[i]).tangent_dim();
    }
    for (int id : connected) d_k += x_star.value(id).tangent_dim();
    for (int id : marg_order) d_m += x_star.value(id).tangent_dim();
  }
  auto col_span = [&](int id) -> std::pair<int, int> {
    for (size_t i = 0; i < cols.size(); ++i) {
      if (cols[i] == id) return {offsets[i], x_star.value(cols[i]).tangent_dim()};
    }
    throw StructureError("marginalize: internal column lookup");
  };

  // Stack C_2 and its Jacobian at x_star.
  int rows = 0;
  for (const auto* r : c2) rows += static_cast<int>(r->sqrt_info.rows());
  VecX c2_val(rows);
  MatX j2 = MatX::Zero(rows, d_k + d_m);
  {
    int row = 0;
    for (const auto* r : c2) {
      BlockValues v;
      v.reserve(r->block_ids.size());
      for (int id : r->block_ids) v.push_back(x_star.value(id));
      const VecX raw = r->evaluate(v);
      const int nr = static_cast<int>(r->sqrt_info.rows());
      c2_val.segment(row, nr) = r->sqrt_info * raw;
      std::vector<MatX> raw_j = r->jac ? r->jac(v) : numeric_jacobian(r->eval, v);
      for (size_t b = 0; b < r->block_ids.size(); ++b) {
        const auto [off, dim] = col_span(r->block_ids[b]);
        j2.block(row, off, nr, dim) += r->sqrt_info * raw_j[b];
      }
      row += nr;
    }
  }
  if (!j2.allFinite() || !c2_val.allFinite()) {
    throw NumericalError("marginalize: non-finite C_2 stack");
  }

  const MatX j_k = j2.leftCols(d_k);
  const MatX j_m = j2.rightCols(d_m);

  // Full-column-rank check on J_M.
  {
    Eigen::JacobiSVD<MatX> svd(j_m);
    const VecX& s = svd.singularValues();
    const double smax = s.size() ? s[0] : 0.0;
    int rank = 0;
    for (int i = 0; i < s.size(); ++i) {
      if (s[i] > 1e-10 * smax && s[i] > 0.0) ++rank;
    }
    if (rank < d_m) {
      std::string who;
      for (int id : marg_order) {
        const auto [off, dim] = col_span(id);
        if (j_m.middleCols(off - d_k, dim).norm() < 1e-12 * std::max(1.0, smax)) {
          who += " " + std::to_string(id) + "(unreferenced)";
        } else {
          who += " " + std::to_string(id);
        }
      }
      throw NumericalError("marginalize: J_M rank-deficient; unobservable blocks:" + who);
    }
  }

  // Projector onto the orthogonal complement of range(J_M), applied via the
  // thin QR of J_M.
  Eigen::HouseholderQR<MatX> qr(j_m);
  const MatX q1 = MatX(qr.householderQ()).leftCols(d_m);
  const MatX pj_k = j_k - q1 * (q1.transpose() * j_k);
  const VecX pc2 = c2_val - q1 * (q1.transpose() * c2_val);

  MatX info_k = symmetrize(pj_k.transpose() * pj_k);
  MatX sigma_k = pinv_psd(info_k);
  VecX corr = d_k > 0 ? VecX(-(sigma_k * (pj_k.transpose() * pc2))) : VecX();

  // Mean over connected blocks (boxplus form).
  FullState mean_k;
  {
    int off = 0;
    for (int id : connected) {
      const ManifoldPoint& v = x_star.value(id);
      const int dim = v.tangent_dim();
      mean_k.add_block(id, cost.state().kind(id), boxplus(v, corr.segment(off, dim)));
      off += dim;
    }
  }
  rep.mean_K = mean_k;
  rep.covariance_K = sigma_k;
  rep.information_K = info_k;

  // Rewrite the cost: drop C_2, drop marg blocks, add the new prior.
  for (int id : rep.replaced_residual_ids) cost.remove_residual(id);
  for (int id : marg_order) cost.state().remove_block(id);
  if (d_k > 0) {
    // L with L^T L = info_k from the eigendecomposition (works when singular).
    Eigen::SelfAdjointEigenSolver<MatX> es(info_k);
    VecX lam = es.eigenvalues().cwiseMax(0.0);
    const MatX sqrt_info = lam.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
    rep.new_prior_id = cost.add_prior_sqrt_info(mean_k, sqrt_info);
  }
  rep.kept_ids = cost.state().ids();
  return rep;
}

void rewrite_as_prior(RunningCost& cost, const GaussianBelief& belief) {
  std::vector<int> ids;
  for (const auto& r : cost.residuals()) ids.push_back(r.id);
  for (int id : ids) cost.remove_residual(id);
  if (!cost.state().same_structure(belief.mean)) {
    throw StructureError("rewrite_as_prior: belief structure mismatch");
  }
  for (int id : belief.mean.ids()) cost.state().set_value(id, belief.mean.value(id));
  cost.add_prior(belief);
}

}  // namespace filtopt
