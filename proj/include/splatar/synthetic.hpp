// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "splatar/avatar_asset.hpp"
#include "splatar/camera.hpp"
#include "splatar/gaussians.hpp"
#include "splatar/rig_model.hpp"
#include "splatar/subdivision.hpp"

// Seeded synthetic data: closed meshes, mini-rigs, random assets, scenes and
// driving streams. Used by the CLI helpers, tests and benchmarks.

namespace splatar {

/// Closed genus-0 mesh: two poles plus rings x segments vertices.
AttributedMesh uv_sphere(int rings, int segments, double radius);

/// Closed genus-1 mesh on a major x minor grid.
AttributedMesh torus(int major, int minor, double major_radius, double minor_radius);

struct SyntheticRigOptions {
  int rings = 6;
  int segments = 8;
  int shape = 8;
  int expr = 6;
  int joints = 5;
  double radius = 0.1;
  double basis_scale = 1e-2;
};

/// Rig on a jittered UV sphere with random bases, a random sparse joint
/// regressor, random sparse skinning weights and a random joint tree.
RigTemplate synthetic_rig(const SyntheticRigOptions& options, std::uint64_t seed);

/// Valid asset with random attributes; points lie near a head-sized sphere.
CanonicalGaussianAvatar random_avatar(Eigen::Index points, int joints, int expr, std::uint64_t seed);

/// Identity-rotation camera at (0, 0, -distance) looking along +z, principal
/// point at the image center.
Camera front_camera(int width, int height, double distance, double focal_scale = 1.2);

/// `count` Gaussians inside the frustum of `camera` at depths [near, far].
GaussianCloud<double> random_scene(int count, const Camera& camera, double near, double far, std::uint64_t seed);

/// Frames with theta ~ N(0, pose_sigma) and phi ~ N(0, expr_sigma).
std::vector<DrivingFrame> random_stream(const CanonicalGaussianAvatar& avatar, std::size_t frames,
                                        const Camera& camera, double pose_sigma, double expr_sigma,
                                        std::uint64_t seed);

}  // namespace splatar
