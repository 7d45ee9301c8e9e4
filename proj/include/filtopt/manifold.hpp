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

#include <vector>

#include "filtopt/common.hpp"

namespace filtopt {

// Angle below which Exp/Log/inverse-Jacobian formulas switch to their
// second-order series.
inline constexpr double kSmallAngle = 1e-6;

// Scalar-first unit quaternion (q = (w, v)).  Composition renormalizes, so a
// long chain of products stays on the unit sphere.
struct UnitQuaternion {
  double w = 1.0;
  Vec3 vec = Vec3::Zero();

  UnitQuaternion() = default;
  UnitQuaternion(double w_, const Vec3& v_) : w(w_), vec(v_) {}

  static UnitQuaternion identity() { return {}; }

  double norm() const { return std::sqrt(w * w + vec.squaredNorm()); }
  UnitQuaternion normalized() const {
    const double n = norm();
    return {w / n, vec / n};
  }
  UnitQuaternion conjugate() const { return {w, -vec}; }

  // Group composition; R(a * b) = R(a) R(b).
  UnitQuaternion operator*(const UnitQuaternion& o) const {
    UnitQuaternion r(w * o.w - vec.dot(o.vec), w * o.vec + o.w * vec + vec.cross(o.vec));
    return r.normalized();
  }

  // Direction cosine matrix; x_world = R(q_world_body) x_body.
  Mat3 rotation() const;

  Vec3 rotate(const Vec3& x) const { return rotation() * x; }
};

Mat3 so3_hat(const Vec3& w);

// Exp: B_pi(0) -> H_u, omega = theta * axis.  Rejects |omega| >= pi.
UnitQuaternion quat_exp(const Vec3& omega);

// Log: H_u -> B_pi(0); sign-canonicalizes (w >= 0) first.  Rejects angle pi.
Vec3 quat_log(const UnitQuaternion& q);

// Rodrigues formula and its inverse on SO(3), same chart domain as above.
Mat3 so3_exp(const Vec3& omega);
Vec3 so3_log(const Mat3& r);

UnitQuaternion quat_from_matrix(const Mat3& r);

// Inverse left/right Jacobians of Exp on SO(3):
//   J_l^{-1} = I - 1/2 w^ + c(|w|) (w^)^2,  J_r^{-1} = J_l^{-1}(-w),
//   c(t) = 1/t^2 - (1 + cos t) / (2 t sin t).
Mat3 inv_jacobian_left(const Vec3& theta);
Mat3 inv_jacobian_right(const Vec3& theta);

// Point on R^n, H_u, SO(3), or a fixed-order product of those.
class ManifoldPoint {
 public:
  enum class Kind { Euclidean, Quat, Rot, Product };

  ManifoldPoint() : kind_(Kind::Euclidean), vec_(VecX::Zero(0)) {}

  static ManifoldPoint euclidean(VecX v);
  static ManifoldPoint euclidean2(double a, double b);
  static ManifoldPoint euclidean3(double a, double b, double c);
  static ManifoldPoint quaternion(const UnitQuaternion& q);
  static ManifoldPoint rotation(const Mat3& r);
  static ManifoldPoint product(std::vector<ManifoldPoint> parts);

  Kind kind() const { return kind_; }
  int tangent_dim() const;

  const VecX& euclidean_value() const;
  const UnitQuaternion& quat_value() const;
  const Mat3& rot_value() const;
  const std::vector<ManifoldPoint>& parts() const;
  std::vector<ManifoldPoint>& parts();

  bool same_structure(const ManifoldPoint& o) const;

 private:
  Kind kind_;
  VecX vec_;
  UnitQuaternion quat_;
  Mat3 rot_ = Mat3::Identity();
  std::vector<ManifoldPoint> parts_;
};

// x [+] delta.  Euclidean adds, rotations right-compose with Exp, products
// recurse in component order.  Throws StructureError on dimension mismatch and
// DomainError if a rotational sub-perturbation has norm >= pi.
ManifoldPoint boxplus(const ManifoldPoint& x, const VecX& delta);

// y [-] x, the chart inverse: x [+] (y [-] x) == y.
VecX boxminus(const ManifoldPoint& y, const ManifoldPoint& x);

// Tangent-space distance |y [-] x|.
double geodesic_distance(const ManifoldPoint& y, const ManifoldPoint& x);

}  // namespace filtopt
