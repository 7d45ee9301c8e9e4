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

#include <set>
#include <string>

#include "filtopt/factors.hpp"

namespace filtopt {

// Relative cutoff for the Moore-Penrose pseudoinverse of J^T J: singular
// values below 1e-10 * sigma_max(J^T J) are zeroed.
inline constexpr double kPinvCutoff = 1e-10;

struct GaussNewtonOptions {
  // Levenberg damping: lambda starts at 0 and is multiplied by 10 on cost
  // increase (only used by gauss_newton_solve).
  bool damping = false;
  double lambda_init = 0.0;
  double lambda_growth = 10.0;
};

struct GaussNewtonReport {
  FullState mean;
  MatX covariance;  // (J^T J)^+ at the last linearization point
  double cost_before = 0.0;
  double cost_after = 0.0;
  int iterations = 0;
  bool converged = false;
  // A step asked for a rotational sub-perturbation of norm >= pi.
  bool diverged = false;
  std::string note;

  GaussianBelief belief() const { return {mean, covariance}; }
};

// One Gauss-Newton step about x_star:
//   Sigma = (J^T J)^+,  mu = x_star [+] ( -(J^T J)^+ J^T C(x_star) ).
GaussNewtonReport gauss_newton_step(const RunningCost& cost, const FullState& x_star,
                                    const GaussNewtonOptions& opts = {});

// Iterates Gauss-Newton steps from x0 until |delta| < tol or max_iters,
// updating the cost's state values (the linearization point) along the way.
GaussNewtonReport gauss_newton_solve(RunningCost& cost, const FullState& x0, int max_iters,
                                     double tol = 1e-9, const GaussNewtonOptions& opts = {});

struct MarginalizationReport {
  std::vector<int> kept_ids;          // all blocks remaining in the state
  std::vector<int> marginalized_ids;  // removed blocks
  std::vector<int> connected_ids;     // kept blocks the new prior connects
  FullState mean_K;                   // mean over connected_ids
  MatX covariance_K;                  // pseudoinverse of the marginal information
  MatX information_K;                 // J_K^T [I - P_M] J_K (may be singular)
  std::vector<int> replaced_residual_ids;
  int new_prior_id = -1;  // -1 when the new prior connects no blocks
  // True when C_2 contained non-prior residuals, i.e. the Theorem-2
  // linearity assumption was realized by first-order Taylor expansion.
  bool linearized_nonlinear = false;
};

struct MarginalizeOptions {
  // Treat the entire residual stack as C_2 even where a residual touches no
  // marginalized block (the Theorem-7 configuration: C_1 empty, so the
  // returned (mu_K, Sigma_K) is the full posterior over the kept blocks).
  bool whole_cost_as_c2 = false;
};

// Marginalization step about x_star: partitions residuals into C_1 (touching
// no marg block) and C_2 (touching at least one), replaces C_2 with a single
// Gaussian prior on the kept blocks it connects,
//   Sigma_K = (J_K^T [I - J_M (J_M^T J_M)^{-1} J_M^T] J_K)^{-1}
//   mu_K    = x_star_K [+] ( -Sigma_K J_K^T [I - ...] C_2(x_star) ),
// and removes the marginalized blocks from the state.  J_M must have full
// column rank, otherwise throws NumericalError naming the offending blocks.
MarginalizationReport marginalize(RunningCost& cost, const FullState& x_star,
                                  const std::set<int>& marg_ids,
                                  const MarginalizeOptions& opts = {});

// Replace the whole cost with the Gaussian surrogate of a solved step (the
// running cost returns to its |x [-] mu|^2_{Sigma^{-1}} form).
void rewrite_as_prior(RunningCost& cost, const GaussianBelief& belief);

// (J^T J)^+ with the spec cutoff, computed from the SVD of J for conditioning.
MatX pinv_normal(const MatX& j);
// Pseudoinverse of a symmetric PSD matrix with the same relative cutoff.
MatX pinv_psd(const MatX& m, int* rank = nullptr);

}  // namespace filtopt
