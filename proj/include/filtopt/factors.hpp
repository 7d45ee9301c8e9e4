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

#include <functional>
#include <optional>
#include <vector>

#include "filtopt/manifold.hpp"

namespace filtopt {

enum class BlockKind { imu_state, pose, feature, euclidean };

struct StateBlock {
  int id = -1;
  BlockKind kind = BlockKind::euclidean;
  ManifoldPoint value;
};

// Ordered collection of named manifold blocks.  The layout maps each block id
// to a contiguous tangent-coordinate range; ranges are disjoint and cover
// [0, tangent_dim) in block order.
class FullState {
 public:
  void add_block(int id, BlockKind kind, ManifoldPoint value);
  void remove_block(int id);
  bool has_block(int id) const;

  const ManifoldPoint& value(int id) const;
  void set_value(int id, ManifoldPoint value);
  BlockKind kind(int id) const;

  int tangent_dim() const { return total_dim_; }
  // (offset, dim) of the block's tangent coordinates.
  std::pair<int, int> span(int id) const;

  const std::vector<StateBlock>& blocks() const { return blocks_; }
  std::vector<int> ids() const;
  int block_count() const { return static_cast<int>(blocks_.size()); }

  // Structural equality (same ids, kinds, manifold signatures, order).
  bool same_structure(const FullState& o) const;

  FullState retract(const VecX& delta) const;
  VecX local(const FullState& other) const;  // other [-] this, stacked

 private:
  int index_of(int id) const;
  void rebuild_layout();

  std::vector<StateBlock> blocks_;
  std::vector<int> offsets_;
  int total_dim_ = 0;
};

enum class ResidualKind { prior, dynamics, measurement };

// Values of the connected blocks, in block_ids order.
using BlockValues = std::vector<ManifoldPoint>;
// Raw (unweighted) residual.
using ResidualEval = std::function<VecX(const BlockValues&)>;
// Raw Jacobians d r / d delta_b, one matrix per connected block.
using ResidualJac = std::function<std::vector<MatX>(const BlockValues&)>;

// One weighted residual term.  The evaluator returns the raw residual; the
// assembly multiplies by sqrt_info, so cost contribution is
// |sqrt_info * r|^2 = r^T (sqrt_info^T sqrt_info) r.
struct ResidualBlock {
  int id = -1;
  ResidualKind kind = ResidualKind::measurement;
  std::vector<int> block_ids;
  MatX sqrt_info;
  int residual_dim = 0;  // raw dimension (== sqrt_info.cols())
  ResidualEval eval;
  ResidualJac jac;  // empty -> central finite differences

  // Deterministic stacking order: priors, then dynamics by time, then
  // measurements by (pose id, feature id).
  long key1 = 0;
  long key2 = 0;

  VecX evaluate(const BlockValues& v) const;
};

struct GaussianBelief {
  FullState mean;
  MatX covariance;

  void validate(double tol = 1e-10) const;  // symmetric, eigenvalues >= -tol
};

// Square root of the information matrix: L such that L^T L = Sigma^{-1}.
// Sigma is inverted by Cholesky; throws NumericalError if not SPD.
MatX sqrt_information(const MatX& covariance);

// c(x) = C(x)^T C(x) over a block-structured state.
class RunningCost {
 public:
  explicit RunningCost(FullState state) : state_(std::move(state)) {}
  RunningCost() = default;

  FullState& state() { return state_; }
  const FullState& state() const { return state_; }

  // Inserts keeping the deterministic order; returns the residual id.
  int add_residual(ResidualBlock block);
  void remove_residual(int id);
  const std::vector<ResidualBlock>& residuals() const { return residuals_; }

  int residual_dim() const;

  // Stacked weighted residual vector at x (must match the state's structure).
  VecX stack_residuals(const FullState& x) const;
  VecX stack_residuals() const { return stack_residuals(state_); }

  double eval_cost(const FullState& x) const;
  double eval_cost() const { return eval_cost(state_); }

  // d_C x d Jacobian of the stacked residual w.r.t. tangent perturbations of
  // x (entering through boxplus), evaluated at x.  Analytic where the block
  // provides one, otherwise central finite differences with step 1e-6.
  MatX jacobian(const FullState& x) const;
  MatX jacobian() const { return jacobian(state_); }

  // Convenience builders -----------------------------------------------

  // Prior residual sqrt_info * (x [-] mean) over the belief's blocks.
  int add_prior(const GaussianBelief& belief, ResidualKind kind = ResidualKind::prior);
  // Same, but from an explicit (possibly rank-deficient) square-root
  // information matrix: cost contribution (x [-] mean)^T L^T L (x [-] mean).
  int add_prior_sqrt_info(const FullState& mean, const MatX& sqrt_info);

 private:
  void check_residual(const ResidualBlock& b) const;

  FullState state_;
  std::vector<ResidualBlock> residuals_;
  int next_id_ = 0;
};

// Finite-difference step for tangent-space Jacobians.
inline constexpr double kFdStep = 1e-6;

// Central-difference Jacobians of a residual at the given values.
std::vector<MatX> numeric_jacobian(const ResidualEval& eval, const BlockValues& values);

// Exact tangent Jacobian blocks of x [-] mu w.r.t. perturbations of x.  For
// Euclidean parts this is the identity; for rotational parts it is
// J_r^{-1}(x [-] mu).
MatX boxminus_jacobian(const ManifoldPoint& x, const ManifoldPoint& mu);

// Tangent Jacobian of y [-] (m [+] eps) w.r.t. eps at 0: -I on Euclidean
// parts, -J_l^{-1}(y [-] m) on rotational parts.
MatX boxminus_jacobian_wrt_base(const ManifoldPoint& y, const ManifoldPoint& m);

}  // namespace filtopt
