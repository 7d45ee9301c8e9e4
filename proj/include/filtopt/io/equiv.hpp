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

#include <string>
#include <vector>

#include "filtopt/common.hpp"

namespace filtopt::io {

// Classical-vs-optimization equivalence checks: one random instance per
// trial, discrepancies reported as max over trials.  Kinds: ekf_aug,
// ekf_update, ekf_prop, msckf_aug, msckf_update, msckf_prop.
struct EquivReport {
  std::string kind;
  int trials = 0;
  double max_mean_discrepancy = 0.0;  // tangent norm
  double max_cov_discrepancy = 0.0;   // relative Frobenius
  bool pass = false;                  // both below 1e-7
  // msckf_aug only: (epsilon, Frobenius distance to the analytic limit).
  std::vector<std::pair<double, double>> epsilon_study;
  bool epsilon_monotone = true;
};

inline constexpr double kEquivThreshold = 1e-7;

EquivReport equiv_check(const std::string& kind, int trials, std::uint64_t seed);

std::vector<std::string> equiv_kinds();

}  // namespace filtopt::io
