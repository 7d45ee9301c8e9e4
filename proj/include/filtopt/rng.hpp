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

#include <cstdint>

#include "filtopt/common.hpp"

namespace filtopt {

// Portable 64-bit PRNG: xoshiro256++ seeded through splitmix64.  Constants
// are the published ones (Blackman & Vigna), so the integer stream is
// reproducible across platforms and languages.  Gaussians come from the
// inverse normal CDF (Wichura's AS 241), which uses only +,-,*,/ and sqrt and
// therefore stays bit-stable under IEEE-754 double arithmetic.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Derive an independent, reproducible stream (seed mixed with the tag).
  Rng fork(std::uint64_t stream_tag) const;

  std::uint64_t next_u64();

  // Uniform on (0, 1), 53-bit mantissa, never exactly 0 or 1.
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal draw.
  double gaussian();
  VecX gaussian_vec(int n);

  // Zero-mean draw with the given covariance (Cholesky coloring).
  VecX gaussian_cov(const MatX& cov);

 private:
  std::uint64_t s_[4];
  std::uint64_t seed_;
};

// Inverse standard normal CDF (AS 241, double precision branch).
double inverse_normal_cdf(double p);

}  // namespace filtopt
