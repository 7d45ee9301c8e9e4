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
#include <cmath>

#include "doctest.h"
#include "filtopt/metrics.hpp"
#include "filtopt/rng.hpp"

using namespace filtopt;

namespace {

constexpr double kPi = 3.14159265358979323846;

Trajectory random_trajectory(Rng& rng, int n) {
  Trajectory out;
  Vec3 p = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    TrajectoryPose tp;
    tp.t = 0.1 * i;
    p += 0.3 * Vec3(rng.gaussian_vec(3));
    tp.p = p;
    tp.q = quat_exp(1.2 * Vec3(rng.gaussian_vec(3)).normalized() * rng.uniform(0, 1));
    out.push_back(tp);
  }
  return out;
}

Trajectory transform(const Trajectory& in, const Mat3& r, const Vec3& t) {
  Trajectory out = in;
  const UnitQuaternion qr = quat_from_matrix(r);
  for (auto& p : out) {
    p.p = r * p.p + t;
    p.q = qr * p.q;
  }
  return out;
}

double sse(const Trajectory& est, const Trajectory& gt) {
  double s = 0;
  for (const auto& [i, j] : associate(est, gt)) s += (est[i].p - gt[j].p).squaredNorm();
  return s;
}

}  // namespace

TEST_CASE("umeyama_align: identity and exact recovery") {
  Rng rng(211);
  const Trajectory gt = random_trajectory(rng, 40);

  // estimate == ground truth: identity transform, residual 0.
  const auto id = umeyama_align(gt, gt);
  CHECK((id.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(id.translation.norm() < 1e-12);

  // Known rigid transform is recovered to 1e-9 post-alignment RMSE.
  for (int trial = 0; trial < 20; ++trial) {
    const Mat3 r0 = so3_exp(2.5 * Vec3(rng.gaussian_vec(3)).normalized() * rng.uniform(0.1, 1));
    const Vec3 t0 = 5.0 * Vec3(rng.gaussian_vec(3));
    const Trajectory est = transform(gt, r0, t0);
    const auto a = umeyama_align(est, gt);
    CHECK(a.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-10));
    const auto res = rmse(apply_alignment(a, est), gt);
    CHECK(res.translation_m < 1e-9);
    CHECK(res.rotation_deg < 1e-7);
  }
}

TEST_CASE("umeyama_align: reflection-contaminated sets still give det(R) = +1") {
  // A mirrored point set (negated x) drives the raw SVD toward a reflection.
  Trajectory gt, est;
  Rng rng(223);
  for (int i = 0; i < 30; ++i) {
    TrajectoryPose g;
    g.t = i * 0.1;
    g.p = Vec3(rng.gaussian(), rng.gaussian(), 0.01 * rng.gaussian());
    gt.push_back(g);
    TrajectoryPose e = g;
    e.p.x() = -e.p.x();
    est.push_back(e);
  }
  const auto a = umeyama_align(est, gt);
  CHECK(a.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("umeyama_align: degenerate sets are rejected") {
  Trajectory gt;
  for (int i = 0; i < 10; ++i) {
    TrajectoryPose p;
    p.t = 0.1 * i;
    p.p = Vec3(i, 0, 0);  // collinear
    gt.push_back(p);
  }
  CHECK_THROWS_AS(umeyama_align(gt, gt), NumericalError);

  Trajectory two(gt.begin(), gt.begin() + 2);
  CHECK_THROWS_AS(umeyama_align(two, two), NumericalError);
}

TEST_CASE("rmse: hand cases") {
  Rng rng(227);
  const Trajectory gt = random_trajectory(rng, 25);
  const auto zero = rmse(gt, gt);
  CHECK(zero.translation_m == doctest::Approx(0.0));
  CHECK(zero.rotation_deg == doctest::Approx(0.0));

  // Constant 0.5 m offset with alignment skipped: 0.5 m.
  Trajectory off = gt;
  for (auto& p : off) p.p += Vec3(0.5, 0, 0);
  CHECK(rmse(off, gt).translation_m == doctest::Approx(0.5).epsilon(1e-12));

  // Hand-built 3-pose case with per-pose errors (1, 2, 2): RMSE = sqrt(3).
  Trajectory base(gt.begin(), gt.begin() + 3), est3 = base;
  est3[0].p += Vec3(1, 0, 0);
  est3[1].p += Vec3(0, 2, 0);
  est3[2].p += Vec3(0, 0, 2);
  CHECK(rmse(est3, base).translation_m == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));

  Trajectory empty;
  CHECK_THROWS_AS(rmse(empty, gt), NumericalError);
}

TEST_CASE("rmse: invariance under a common rigid transform and quaternion sign") {
  Rng rng(229);
  const Trajectory gt = random_trajectory(rng, 30);
  Trajectory est = gt;
  for (auto& p : est) {
    p.p += 0.05 * Vec3(rng.gaussian_vec(3));
    p.q = p.q * quat_exp(0.02 * Vec3(rng.gaussian_vec(3)));
  }
  const auto base = rmse(est, gt);

  const Mat3 r0 = so3_exp(Vec3(0.4, -0.2, 0.9));
  const Vec3 t0(1, -2, 3);
  const auto moved = rmse(transform(est, r0, t0), transform(gt, r0, t0));
  CHECK(std::abs(moved.translation_m - base.translation_m) < 1e-10);
  CHECK(std::abs(moved.rotation_deg - base.rotation_deg) < 1e-10);

  // Quaternion sign flips do not change the rotation error.
  Trajectory flipped = est;
  for (auto& p : flipped) {
    p.q.w = -p.q.w;
    p.q.vec = -p.q.vec;
  }
  CHECK(std::abs(rmse(flipped, gt).rotation_deg - base.rotation_deg) < 1e-10);
}

TEST_CASE("alignment optimality: random perturbations never decrease the SSE") {
  Rng rng(233);
  const Trajectory gt = random_trajectory(rng, 40);
  Trajectory est = transform(gt, so3_exp(Vec3(0.2, 0.1, -0.4)), Vec3(2, 1, -1));
  for (auto& p : est) p.p += 0.05 * Vec3(rng.gaussian_vec(3));

  const auto a = umeyama_align(est, gt);
  const Trajectory aligned = apply_alignment(a, est);
  const double best = sse(aligned, gt);
  for (int i = 0; i < 100; ++i) {
    AlignmentResult perturbed = a;
    perturbed.rotation = a.rotation * so3_exp(1e-4 * Vec3(rng.gaussian_vec(3)));
    perturbed.translation = a.translation + 1e-4 * Vec3(rng.gaussian_vec(3));
    CHECK(sse(apply_alignment(perturbed, est), gt) >= best - 1e-12);
  }
}

TEST_CASE("drift_curve: milestones and analytic error injection") {
  // Straight 12 m ground truth: milestones at 5 m and 10 m only.
  Trajectory gt;
  for (int i = 0; i <= 120; ++i) {
    TrajectoryPose p;
    p.t = 0.1 * i;
    p.p = Vec3(0.1 * i, 0, 0);
    gt.push_back(p);
  }
  const auto zero = drift_curve(gt, gt);
  REQUIRE(zero.size() == 2);
  CHECK(zero[0].distance_m == doctest::Approx(5.0));
  CHECK(zero[1].distance_m == doctest::Approx(10.0));
  CHECK(zero[0].drift_m == doctest::Approx(0.0));

  // Linearly growing error e(s) = 0.01 s: drifts 0.05 m and 0.10 m.
  Trajectory est = gt;
  for (auto& p : est) p.p.y() += 0.01 * p.p.x();
  const auto lin = drift_curve(est, gt);
  REQUIRE(lin.size() == 2);
  CHECK(lin[0].drift_m == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(lin[1].drift_m == doctest::Approx(0.10).epsilon(1e-9));

  // Trajectory shorter than one interval: empty curve.
  Trajectory shorty(gt.begin(), gt.begin() + 10);
  CHECK(drift_curve(shorty, shorty).empty());
}
