// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "splatar/common.hpp"

namespace splatar {

/// Read-only view of a Gaussian set as consumed by the renderer.
template <typename Scalar>
struct GaussianView {
  Eigen::Ref<const Points<Scalar>> positions;
  Eigen::Ref<const Quaternions<Scalar>> rotations;
  Eigen::Ref<const Points<Scalar>> scales;
  Eigen::Ref<const Points<Scalar>> colors;
  Eigen::Ref<const Vector<Scalar>> opacities;

  Eigen::Index size() const { return positions.rows(); }
};

/// Owning Gaussian set, for scenes that do not come from an avatar.
template <typename Scalar>
struct GaussianCloud {
  Points<Scalar> positions;
  Quaternions<Scalar> rotations;
  Points<Scalar> scales;
  Points<Scalar> colors;
  Vector<Scalar> opacities;

  explicit GaussianCloud(Eigen::Index n = 0)
      : positions(n, 3), rotations(n, 4), scales(n, 3), colors(n, 3), opacities(n) {}

  Eigen::Index size() const { return positions.rows(); }
  GaussianView<Scalar> view() const { return {positions, rotations, scales, colors, opacities}; }

  template <typename Other>
  GaussianCloud<Other> cast() const {
    GaussianCloud<Other> c(size());
    c.positions = positions.template cast<Other>();
    c.rotations = rotations.template cast<Other>();
    c.scales = scales.template cast<Other>();
    c.colors = colors.template cast<Other>();
    c.opacities = opacities.template cast<Other>();
    return c;
  }
};

}  // namespace splatar
