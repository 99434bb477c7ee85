// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

#include "splatar/common.hpp"

namespace splatar {

/// Rodrigues' formula. Small angles fall back to the second-order series so
/// that a zero vector yields the exact identity.
template <typename Derived>
Mat3<typename Derived::Scalar> axis_angle_to_matrix(const Eigen::MatrixBase<Derived>& aa) {
  using Scalar = typename Derived::Scalar;
  const Vec3<Scalar> w = aa;
  const Scalar angle2 = w.squaredNorm();
  Mat3<Scalar> K;
  K << Scalar(0), -w.z(), w.y(),
       w.z(), Scalar(0), -w.x(),
       -w.y(), w.x(), Scalar(0);
  Scalar a, b;
  if (angle2 < Scalar(1e-12)) {
    a = Scalar(1) - angle2 / Scalar(6);
    b = Scalar(0.5) - angle2 / Scalar(24);
  } else {
    const Scalar angle = std::sqrt(angle2);
    a = std::sin(angle) / angle;
    b = (Scalar(1) - std::cos(angle)) / angle2;
  }
  return Mat3<Scalar>::Identity() + a * K + b * K * K;
}

/// Rotation matrix to unit quaternion (w, x, y, z), Shepperd's method.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 4, 1> matrix_to_quaternion(const Eigen::MatrixBase<Derived>& R) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, 4, 1> q;
  const Scalar trace = R(0, 0) + R(1, 1) + R(2, 2);
  if (trace > Scalar(0)) {
    const Scalar s = std::sqrt(trace + Scalar(1)) * Scalar(2);
    q << Scalar(0.25) * s, (R(2, 1) - R(1, 2)) / s, (R(0, 2) - R(2, 0)) / s, (R(1, 0) - R(0, 1)) / s;
  } else if (R(0, 0) > R(1, 1) && R(0, 0) > R(2, 2)) {
    const Scalar s = std::sqrt(Scalar(1) + R(0, 0) - R(1, 1) - R(2, 2)) * Scalar(2);
    q << (R(2, 1) - R(1, 2)) / s, Scalar(0.25) * s, (R(0, 1) + R(1, 0)) / s, (R(0, 2) + R(2, 0)) / s;
  } else if (R(1, 1) > R(2, 2)) {
    const Scalar s = std::sqrt(Scalar(1) + R(1, 1) - R(0, 0) - R(2, 2)) * Scalar(2);
    q << (R(0, 2) - R(2, 0)) / s, (R(0, 1) + R(1, 0)) / s, Scalar(0.25) * s, (R(1, 2) + R(2, 1)) / s;
  } else {
    const Scalar s = std::sqrt(Scalar(1) + R(2, 2) - R(0, 0) - R(1, 1)) * Scalar(2);
    q << (R(1, 0) - R(0, 1)) / s, (R(0, 2) + R(2, 0)) / s, (R(1, 2) + R(2, 1)) / s, Scalar(0.25) * s;
  }
  return q.normalized();
}

/// Unit quaternion (w, x, y, z) to rotation matrix.
template <typename Derived>
Mat3<typename Derived::Scalar> quaternion_to_matrix(const Eigen::MatrixBase<Derived>& q) {
  using Scalar = typename Derived::Scalar;
  const Scalar w = q(0), x = q(1), y = q(2), z = q(3);
  Mat3<Scalar> R;
  R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return R;
}

/// Hamilton product a * b, both (w, x, y, z).
template <typename DA, typename DB>
Eigen::Matrix<typename DA::Scalar, 4, 1> quaternion_multiply(const Eigen::MatrixBase<DA>& a,
                                                             const Eigen::MatrixBase<DB>& b) {
  Eigen::Matrix<typename DA::Scalar, 4, 1> r;
  r << a(0) * b(0) - a(1) * b(1) - a(2) * b(2) - a(3) * b(3),
       a(0) * b(1) + a(1) * b(0) + a(2) * b(3) - a(3) * b(2),
       a(0) * b(2) - a(1) * b(3) + a(2) * b(0) + a(3) * b(1),
       a(0) * b(3) + a(1) * b(2) - a(2) * b(1) + a(3) * b(0);
  return r;
}

/// Gram-Schmidt on the columns of a 3x3 block: x is normalized, y is made
/// orthogonal to x, z = x cross y. Exact on rotation inputs.
template <typename Derived>
Mat3<typename Derived::Scalar> orthonormalize(const Eigen::MatrixBase<Derived>& M) {
  using Scalar = typename Derived::Scalar;
  Vec3<Scalar> x = M.col(0);
  x.normalize();
  Vec3<Scalar> y = M.col(1);
  y -= x * x.dot(y);
  y.normalize();
  Mat3<Scalar> R;
  R.col(0) = x;
  R.col(1) = y;
  R.col(2) = x.cross(y);
  return R;
}

}  // namespace splatar
