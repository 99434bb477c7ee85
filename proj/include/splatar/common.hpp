// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace splatar {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Row-major dynamic matrix. Used for every per-point array so that one point's
// data is contiguous and a file section maps onto it byte for byte.
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// [N x 3] point list.
template <typename Scalar>
using Points = Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;

// [N x 4] quaternion list, (w, x, y, z).
template <typename Scalar>
using Quaternions = Eigen::Matrix<Scalar, Eigen::Dynamic, 4, Eigen::RowMajor>;

using Faces = Eigen::Matrix<std::int32_t, Eigen::Dynamic, 3, Eigen::RowMajor>;

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Mat34 = Eigen::Matrix<Scalar, 3, 4>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument widths or shapes disagree with the data they are applied to.
class InvalidParams : public Error {
 public:
  using Error::Error;
};

/// A structural invariant of an input object does not hold.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// API misuse that is not a data problem (e.g. backward without forward).
class UsageError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace splatar
