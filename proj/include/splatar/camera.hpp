// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "splatar/common.hpp"

namespace splatar {

/// Pinhole camera. Pixel (x, y) is sampled at image coordinate (x, y), so a
/// point on the optical axis lands exactly on pixel (cx, cy) when those are
/// integers.
struct Camera {
  double fx = 1, fy = 1, cx = 0, cy = 0;
  int width = 0, height = 0;
  Eigen::Matrix4d world_to_camera = Eigen::Matrix4d::Identity();  // rigid

  Mat3<double> rotation() const { return world_to_camera.topLeftCorner<3, 3>(); }
  Vec3<double> translation() const { return world_to_camera.topRightCorner<3, 1>(); }

  /// Throws InvalidParams unless fx, fy, width, height are positive and the
  /// transform's last row is (0, 0, 0, 1).
  void validate() const {
    if (!(fx > 0) || !(fy > 0)) throw InvalidParams("camera focal lengths must be positive");
    if (width <= 0 || height <= 0) throw InvalidParams("camera resolution must be positive");
    if (!world_to_camera.allFinite() || world_to_camera.row(3) != Eigen::RowVector4d(0, 0, 0, 1))
      throw InvalidParams("camera world_to_camera must be a finite rigid transform");
  }
};

}  // namespace splatar
