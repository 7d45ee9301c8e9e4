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
#include "filtopt/manifold.hpp"

#include <cmath>
#include <utility>

namespace filtopt {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Gram-Schmidt re-orthonormalization; keeps det = +1 for near-rotations.
Mat3 reorthonormalize(const Mat3& r) {
  Mat3 out;
  Vec3 c0 = r.col(0).normalized();
  Vec3 c1 = (r.col(1) - c0.dot(r.col(1)) * c0).normalized();
  Vec3 c2 = c0.cross(c1);
  out.col(0) = c0;
  out.col(1) = c1;
  out.col(2) = c2;
  return out;
}

}  // namespace

Mat3 so3_hat(const Vec3& w) {
  Mat3 m;
  m << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return m;
}

Mat3 UnitQuaternion::rotation() const {
  const Mat3 vx = so3_hat(vec);
  return Mat3::Identity() + 2.0 * w * vx + 2.0 * vx * vx;
}

UnitQuaternion quat_exp(const Vec3& omega) {
  const double theta = omega.norm();
  if (theta >= kPi) {
    throw DomainError("quat_exp: |omega| >= pi (outside chart domain)");
  }
  double w, k;
  if (theta < kSmallAngle) {
    // cos(t/2) and sin(t/2)/t to second order.
    w = 1.0 - theta * theta / 8.0;
    k = 0.5 - theta * theta / 48.0;
  } else {
    w = std::cos(0.5 * theta);
    k = std::sin(0.5 * theta) / theta;
  }
  return UnitQuaternion(w, k * omega).normalized();
}

Vec3 quat_log(const UnitQuaternion& q_in) {
  if (q_in.w == -1.0 && q_in.vec.isZero(0.0)) {
    throw DomainError("quat_log: q == (-1, 0, 0, 0)");
  }
  // q and -q are the same rotation; canonicalize to w >= 0 so theta lands in
  // [0, pi).
  UnitQuaternion q = q_in.normalized();
  if (q.w < 0.0) {
    q.w = -q.w;
    q.vec = -q.vec;
  }
  const double nv = q.vec.norm();
  const double theta = 2.0 * std::atan2(nv, q.w);
  if (theta >= kPi - 1e-12) {
    throw DomainError("quat_log: rotation angle at pi (chart boundary)");
  }
  double k;
  if (theta < kSmallAngle) {
    k = 2.0 / q.w * (1.0 - nv * nv / (3.0 * q.w * q.w));
  } else {
    k = theta / nv;
  }
  return k * q.vec;
}

Mat3 so3_exp(const Vec3& omega) {
  const double theta = omega.norm();
  if (theta >= kPi) {
    throw DomainError("so3_exp: |omega| >= pi (outside chart domain)");
  }
  const Mat3 wx = so3_hat(omega);
  double a, b;
  if (theta < kSmallAngle) {
    a = 1.0 - theta * theta / 6.0;
    b = 0.5 - theta * theta / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / (theta * theta);
  }
  return Mat3::Identity() + a * wx + b * wx * wx;
}

Vec3 so3_log(const Mat3& r) { return quat_log(quat_from_matrix(r)); }

UnitQuaternion quat_from_matrix(const Mat3& r) {
  // Shepperd's method: pick the largest diagonal combination for stability.
  const double t = r.trace();
  UnitQuaternion q;
  if (t > 0.0) {
    double s = std::sqrt(t + 1.0) * 2.0;
    q.w = 0.25 * s;
    q.vec = Vec3(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1)) / s;
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2.0;
    q.w = (r(2, 1) - r(1, 2)) / s;
    q.vec = Vec3(0.25 * s, (r(0, 1) + r(1, 0)) / s, (r(0, 2) + r(2, 0)) / s);
  } else if (r(1, 1) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2.0;
    q.w = (r(0, 2) - r(2, 0)) / s;
    q.vec = Vec3((r(0, 1) + r(1, 0)) / s, 0.25 * s, (r(1, 2) + r(2, 1)) / s);
  } else {
    double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2.0;
    q.w = (r(1, 0) - r(0, 1)) / s;
    q.vec = Vec3((r(0, 2) + r(2, 0)) / s, (r(1, 2) + r(2, 1)) / s, 0.25 * s);
  }
  return q.normalized();
}

namespace {

Mat3 inv_jacobian_impl(const Vec3& theta, double half_sign) {
  const double t = theta.norm();
  if (t >= kPi - 1e-12) {
    throw DomainError("inv_jacobian: |theta| at pi");
  }
  const Mat3 wx = so3_hat(theta);
  double c;
  if (t < kSmallAngle) {
    c = 1.0 / 12.0 + t * t / 720.0;
  } else {
    c = 1.0 / (t * t) - (1.0 + std::cos(t)) / (2.0 * t * std::sin(t));
  }
  return Mat3::Identity() + half_sign * 0.5 * wx + c * wx * wx;
}

}  // namespace

Mat3 inv_jacobian_left(const Vec3& theta) { return inv_jacobian_impl(theta, -1.0); }
Mat3 inv_jacobian_right(const Vec3& theta) { return inv_jacobian_impl(theta, +1.0); }

ManifoldPoint ManifoldPoint::euclidean(VecX v) {
  ManifoldPoint p;
  p.kind_ = Kind::Euclidean;
  p.vec_ = std::move(v);
  return p;
}

ManifoldPoint ManifoldPoint::euclidean2(double a, double b) {
  return euclidean((VecX(2) << a, b).finished());
}

ManifoldPoint ManifoldPoint::euclidean3(double a, double b, double c) {
  return euclidean((VecX(3) << a, b, c).finished());
}

ManifoldPoint ManifoldPoint::quaternion(const UnitQuaternion& q) {
  ManifoldPoint p;
  p.kind_ = Kind::Quat;
  p.quat_ = q.normalized();
  return p;
}

ManifoldPoint ManifoldPoint::rotation(const Mat3& r) {
  ManifoldPoint p;
  p.kind_ = Kind::Rot;
  p.rot_ = reorthonormalize(r);
  return p;
}

ManifoldPoint ManifoldPoint::product(std::vector<ManifoldPoint> parts) {
  ManifoldPoint p;
  p.kind_ = Kind::Product;
  p.parts_ = std::move(parts);
  return p;
}

int ManifoldPoint::tangent_dim() const {
  switch (kind_) {
    case Kind::Euclidean:
      return static_cast<int>(vec_.size());
    case Kind::Quat:
    case Kind::Rot:
      return 3;
    case Kind::Product: {
      int d = 0;
      for (const auto& p : parts_) d += p.tangent_dim();
      return d;
    }
  }
  return 0;
}

const VecX& ManifoldPoint::euclidean_value() const {
  if (kind_ != Kind::Euclidean) throw StructureError("ManifoldPoint: not Euclidean");
  return vec_;
}

const UnitQuaternion& ManifoldPoint::quat_value() const {
  if (kind_ != Kind::Quat) throw StructureError("ManifoldPoint: not a quaternion");
  return quat_;
}

const Mat3& ManifoldPoint::rot_value() const {
  if (kind_ != Kind::Rot) throw StructureError("ManifoldPoint: not a rotation");
  return rot_;
}

const std::vector<ManifoldPoint>& ManifoldPoint::parts() const {
  if (kind_ != Kind::Product) throw StructureError("ManifoldPoint: not a product");
  return parts_;
}

std::vector<ManifoldPoint>& ManifoldPoint::parts() {
  if (kind_ != Kind::Product) throw StructureError("ManifoldPoint: not a product");
  return parts_;
}

bool ManifoldPoint::same_structure(const ManifoldPoint& o) const {
  if (kind_ != o.kind_) return false;
  switch (kind_) {
    case Kind::Euclidean:
      return vec_.size() == o.vec_.size();
    case Kind::Quat:
    case Kind::Rot:
      return true;
    case Kind::Product: {
      if (parts_.size() != o.parts_.size()) return false;
      for (size_t i = 0; i < parts_.size(); ++i) {
        if (!parts_[i].same_structure(o.parts_[i])) return false;
      }
      return true;
    }
  }
  return false;
}

ManifoldPoint boxplus(const ManifoldPoint& x, const VecX& delta) {
  if (delta.size() != x.tangent_dim()) {
    throw StructureError("boxplus: delta dimension mismatch");
  }
  using Kind = ManifoldPoint::Kind;
  switch (x.kind()) {
    case Kind::Euclidean:
      return ManifoldPoint::euclidean(x.euclidean_value() + delta);
    case Kind::Quat:
      return ManifoldPoint::quaternion(x.quat_value() * quat_exp(delta));
    case Kind::Rot:
      return ManifoldPoint::rotation(x.rot_value() * so3_exp(delta));
    case Kind::Product: {
      std::vector<ManifoldPoint> out;
      out.reserve(x.parts().size());
      int off = 0;
      for (const auto& p : x.parts()) {
        const int d = p.tangent_dim();
        out.push_back(boxplus(p, delta.segment(off, d)));
        off += d;
      }
      return ManifoldPoint::product(std::move(out));
    }
  }
  throw StructureError("boxplus: unknown kind");
}

VecX boxminus(const ManifoldPoint& y, const ManifoldPoint& x) {
  if (!y.same_structure(x)) throw StructureError("boxminus: structure mismatch");
  using Kind = ManifoldPoint::Kind;
  switch (x.kind()) {
    case Kind::Euclidean:
      return y.euclidean_value() - x.euclidean_value();
    case Kind::Quat:
      return quat_log(x.quat_value().conjugate() * y.quat_value());
    case Kind::Rot:
      return so3_log(x.rot_value().transpose() * y.rot_value());
    case Kind::Product: {
      VecX out(x.tangent_dim());
      int off = 0;
      for (size_t i = 0; i < x.parts().size(); ++i) {
        const int d = x.parts()[i].tangent_dim();
        out.segment(off, d) = boxminus(y.parts()[i], x.parts()[i]);
        off += d;
      }
      return out;
    }
  }
  throw StructureError("boxminus: unknown kind");
}

double geodesic_distance(const ManifoldPoint& y, const ManifoldPoint& x) {
  return boxminus(y, x).norm();
}

}  // namespace filtopt
