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
#include "filtopt/factors.hpp"
#include "filtopt/rng.hpp"

using namespace filtopt;

namespace {

ResidualBlock measurement_2d(int pose_id, int feat_id, const Vec2& z, const Mat2& sqrt_info) {
  // z = f - x_pos; raw residual z - h(x, f).
  ResidualBlock b;
  b.kind = ResidualKind::measurement;
  b.block_ids = {pose_id, feat_id};
  b.sqrt_info = sqrt_info;
  b.residual_dim = 2;
  b.key1 = pose_id;
  b.key2 = feat_id;
  b.eval = [z](const BlockValues& v) {
    const VecX& x = v[0].euclidean_value();
    const VecX& f = v[1].euclidean_value();
    return VecX(z - (f.head<2>() - x.head<2>()));
  };
  b.jac = [](const BlockValues& v) {
    MatX dx = MatX::Zero(2, v[0].tangent_dim());
    dx.leftCols<2>() = Mat2::Identity();
    MatX df = -Mat2::Identity();
    return std::vector<MatX>{dx, df};
  };
  return b;
}

FullState toy_state(Rng& rng) {
  FullState s;
  s.add_block(0, BlockKind::pose, ManifoldPoint::euclidean(rng.gaussian_vec(3)));
  s.add_block(1, BlockKind::pose, ManifoldPoint::euclidean(rng.gaussian_vec(3)));
  s.add_block(10, BlockKind::feature, ManifoldPoint::euclidean(rng.gaussian_vec(2)));
  return s;
}

}  // namespace

TEST_CASE("stack_residuals: hand cases") {
  FullState s;
  s.add_block(0, BlockKind::euclidean, ManifoldPoint::euclidean2(2, 0));
  RunningCost cost(s);

  FullState mean;
  mean.add_block(0, BlockKind::euclidean, ManifoldPoint::euclidean2(0, 0));
  cost.add_prior({mean, 4.0 * Mat2::Identity()});

  // Sigma = 4I, x - mu = (2, 0)  ->  C = (1, 0), c = 1.
  const VecX c = cost.stack_residuals();
  CHECK(c.size() == 2);
  CHECK(c[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c[1] == doctest::Approx(0.0));
  CHECK(cost.eval_cost() == doctest::Approx(1.0).epsilon(1e-12));

  // Prior at its own mean stacks to zero.
  CHECK(cost.stack_residuals(mean).norm() == doctest::Approx(0.0));
}

TEST_CASE("eval_cost: three-term SWF toy cost equals term-by-term oracle") {
  Rng rng(41);
  FullState s = toy_state(rng);
  RunningCost cost(s);

  // Prior on pose 0.
  FullState mu0;
  mu0.add_block(0, BlockKind::pose, ManifoldPoint::euclidean(rng.gaussian_vec(3)));
  const MatX sig0 = 0.5 * MatX::Identity(3, 3);
  cost.add_prior({mu0, sig0});

  // Dynamics between poses 0 and 1 (identity map).
  const Mat3 sw = (Vec3(0.1, 0.2, 0.4)).asDiagonal();
  ResidualBlock dyn;
  dyn.kind = ResidualKind::dynamics;
  dyn.block_ids = {0, 1};
  dyn.sqrt_info = sqrt_information(sw);
  dyn.residual_dim = 3;
  dyn.eval = [](const BlockValues& v) {
    return VecX(v[1].euclidean_value() - v[0].euclidean_value());
  };
  cost.add_residual(dyn);

  // One measurement from each pose.
  const Mat2 sv = sqrt_information(0.04 * Mat2::Identity());
  const Vec2 z0 = rng.gaussian_vec(2), z1 = rng.gaussian_vec(2);
  cost.add_residual(measurement_2d(0, 10, z0, sv));
  cost.add_residual(measurement_2d(1, 10, z1, sv));

  // Term-by-term oracle.
  const VecX x0 = s.value(0).euclidean_value();
  const VecX x1 = s.value(1).euclidean_value();
  const VecX f = s.value(10).euclidean_value();
  const VecX pr = x0 - mu0.value(0).euclidean_value();
  double expect = pr.dot(sig0.inverse() * pr);
  const VecX dr = x1 - x0;
  expect += dr.dot(sw.inverse() * dr);
  const Vec2 m0 = Vec2(z0) - Vec2(f.head<2>() - x0.head<2>());
  const Vec2 m1 = Vec2(z1) - Vec2(f.head<2>() - x1.head<2>());
  expect += m0.dot((0.04 * Mat2::Identity()).inverse() * m0);
  expect += m1.dot((0.04 * Mat2::Identity()).inverse() * m1);

  CHECK(cost.eval_cost() == doctest::Approx(expect).epsilon(1e-12));
  CHECK(cost.eval_cost() == cost.stack_residuals().squaredNorm());

  // Scaling sqrt_info by s scales the block contribution by s^2.
  RunningCost scaled(s);
  scaled.add_residual(measurement_2d(0, 10, z0, 3.0 * sv));
  RunningCost plain(s);
  plain.add_residual(measurement_2d(0, 10, z0, sv));
  CHECK(scaled.eval_cost() == doctest::Approx(9.0 * plain.eval_cost()).epsilon(1e-12));
}

TEST_CASE("deterministic stacking order and append-only invariance") {
  Rng rng(43);
  FullState s = toy_state(rng);

  const Mat2 sv = Mat2::Identity();
  auto build = [&](bool shuffled) {
    RunningCost cost(s);
    FullState mu0;
    mu0.add_block(0, BlockKind::pose, ManifoldPoint::euclidean3(0, 0, 0));
    std::vector<ResidualBlock> ms;
    ms.push_back(measurement_2d(0, 10, Vec2(1, 1), sv));
    ms.push_back(measurement_2d(1, 10, Vec2(2, 2), sv));
    if (shuffled) std::swap(ms[0], ms[1]);
    for (auto& m : ms) cost.add_residual(m);
    cost.add_prior({mu0, MatX::Identity(3, 3)});
    return cost.stack_residuals();
  };
  const VecX a = build(false), b = build(true);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);  // bit-identical

  // Adding a residual never changes existing rows.
  RunningCost cost(s);
  cost.add_residual(measurement_2d(0, 10, Vec2(1, 1), sv));
  const VecX before = cost.stack_residuals();
  cost.add_residual(measurement_2d(1, 10, Vec2(2, 2), sv));
  const VecX after = cost.stack_residuals();
  CHECK((after.head(before.size()) - before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("jacobian: prior rows equal sqrt_info in the Euclidean case") {
  Rng rng(47);
  FullState s;
  s.add_block(0, BlockKind::euclidean, ManifoldPoint::euclidean(rng.gaussian_vec(4)));
  RunningCost cost(s);
  FullState mean;
  mean.add_block(0, BlockKind::euclidean, ManifoldPoint::euclidean(rng.gaussian_vec(4)));
  MatX a = MatX::Random(4, 4);
  const MatX sigma = a * a.transpose() + 0.5 * MatX::Identity(4, 4);
  cost.add_prior({mean, sigma});
  const MatX j = cost.jacobian();
  CHECK((j - sqrt_information(sigma)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("jacobian: analytic 2D measurement matches the hand derivative") {
  Rng rng(53);
  FullState s = toy_state(rng);
  RunningCost cost(s);
  const Mat2 sv = sqrt_information(0.01 * Mat2::Identity());
  cost.add_residual(measurement_2d(0, 10, Vec2(0.5, -1), sv));
  const MatX j = cost.jacobian();
  // Raw residual z - h: d/dx_pos = +I2, d/df = -I2, both weighted.
  MatX expect = MatX::Zero(2, s.tangent_dim());
  expect.block<2, 2>(0, 0) = sv;
  expect.block<2, 2>(0, 6) = -sv;
  CHECK((j - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("jacobian: analytic vs central finite differences on random instances") {
  Rng rng(59);
  for (int trial = 0; trial < 100; ++trial) {
    FullState s;
    VecX w = rng.gaussian_vec(3);
    if (w.norm() > 2.5) w *= 2.5 / w.norm();
    s.add_block(0, BlockKind::pose,
                ManifoldPoint::product({ManifoldPoint::quaternion(quat_exp(w)),
                                        ManifoldPoint::euclidean(rng.gaussian_vec(3))}));
    s.add_block(1, BlockKind::feature, ManifoldPoint::euclidean(rng.gaussian_vec(2)));

    RunningCost cost(s);

    // prior kind (rotational block included, far from the mean).
    FullState mean;
    VecX wm = rng.gaussian_vec(3);
    if (wm.norm() > 2.5) wm *= 2.5 / wm.norm();
    mean.add_block(0, BlockKind::pose,
                   ManifoldPoint::product({ManifoldPoint::quaternion(quat_exp(wm)),
                                           ManifoldPoint::euclidean(rng.gaussian_vec(3))}));
    mean.add_block(1, BlockKind::feature, ManifoldPoint::euclidean(rng.gaussian_vec(2)));
    MatX a = MatX::Random(8, 8);
    cost.add_prior({mean, symmetrize(a * a.transpose()) + MatX::Identity(8, 8)});

    // dynamics kind: rotational boxminus against a fixed target.
    const ManifoldPoint target = ManifoldPoint::quaternion(quat_exp(0.3 * Vec3::Random()));
    ResidualBlock dyn;
    dyn.kind = ResidualKind::dynamics;
    dyn.block_ids = {0};
    dyn.sqrt_info = Mat3::Identity();
    dyn.residual_dim = 3;
    dyn.eval = [target](const BlockValues& v) {
      return VecX(boxminus(v[0].parts()[0], target));
    };
    dyn.jac = [target](const BlockValues& v) {
      MatX j = MatX::Zero(3, 6);
      j.leftCols<3>() = inv_jacobian_right(boxminus(v[0].parts()[0], target));
      return std::vector<MatX>{j};
    };
    cost.add_residual(dyn);

    // measurement kind (linear).
    cost.add_residual(
        measurement_2d(1, 1, Vec2(rng.gaussian(), rng.gaussian()), Mat2::Identity()));

    const MatX j_analytic = cost.jacobian();

    // Same rows with analytic Jacobians stripped -> pure finite differences.
    RunningCost fd_cost(s);
    for (const auto& r : cost.residuals()) {
      ResidualBlock copy = r;
      copy.jac = nullptr;
      fd_cost.add_residual(copy);
    }
    const MatX j_fd = fd_cost.jacobian();
    const double rel =
        (j_analytic - j_fd).cwiseAbs().maxCoeff() / std::max(1.0, j_fd.cwiseAbs().maxCoeff());
    CHECK(rel < 1e-5);
  }
}

TEST_CASE("GaussianBelief validation") {
  FullState mean;
  mean.add_block(0, BlockKind::euclidean, ManifoldPoint::euclidean2(0, 0));
  GaussianBelief ok{mean, Mat2::Identity()};
  CHECK_NOTHROW(ok.validate());

  MatX bad(2, 2);
  bad << 1.0, 0.5, -0.5, 1.0;
  CHECK_THROWS_AS((GaussianBelief{mean, bad}.validate()), NumericalError);

  MatX indef(2, 2);
  indef << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS((GaussianBelief{mean, indef}.validate()), NumericalError);

  CHECK_THROWS_AS(sqrt_information(indef), NumericalError);
}

TEST_CASE("structure mismatch is rejected") {
  Rng rng(61);
  FullState s = toy_state(rng);
  RunningCost cost(s);
  cost.add_residual(measurement_2d(0, 10, Vec2(0, 0), Mat2::Identity()));
  FullState other;
  other.add_block(0, BlockKind::pose, ManifoldPoint::euclidean2(0, 0));
  CHECK_THROWS_AS(cost.eval_cost(other), StructureError);
  CHECK_THROWS_AS(cost.stack_residuals(other), StructureError);
}
