// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

#include "splatar/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace splatar {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
double normal(Rng& rng, double sigma) { return std::normal_distribution<double>(0.0, sigma)(rng); }

Eigen::Vector4d random_quaternion(Rng& rng) {
  Eigen::Vector4d q;
  do {
    for (int i = 0; i < 4; ++i) q(i) = normal(rng, 1.0);
  } while (q.norm() < 1e-3);
  return q.normalized();
}

// Random convex weights on `k` of `n` slots.
Eigen::RowVectorXd sparse_simplex(Rng& rng, Eigen::Index n, int k) {
  Eigen::RowVectorXd w = Eigen::RowVectorXd::Zero(n);
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  for (int i = 0; i < k; ++i) w(pick(rng)) += uniform(rng, 0.1, 1.0);
  return w / w.sum();
}

std::vector<int> random_parents(Rng& rng, int joints) {
  std::vector<int> parents(static_cast<std::size_t>(joints), -1);
  for (int j = 1; j < joints; ++j) parents[static_cast<std::size_t>(j)] = std::uniform_int_distribution<int>(0, j - 1)(rng);
  return parents;
}

}  // namespace

AttributedMesh uv_sphere(int rings, int segments, double radius) {
  if (rings < 1 || segments < 3) throw InvalidParams("uv_sphere needs rings >= 1 and segments >= 3");
  AttributedMesh m;
  const int V = 2 + rings * segments;
  m.vertices.resize(V, 3);
  m.vertices.row(0) << 0, radius, 0;
  m.vertices.row(V - 1) << 0, -radius, 0;
  for (int r = 0; r < rings; ++r) {
    const double polar = std::numbers::pi * (r + 1) / (rings + 1);
    for (int s = 0; s < segments; ++s) {
      const double az = 2 * std::numbers::pi * s / segments;
      m.vertices.row(1 + r * segments + s) << radius * std::sin(polar) * std::cos(az), radius * std::cos(polar),
          radius * std::sin(polar) * std::sin(az);
    }
  }
  auto idx = [&](int r, int s) { return 1 + r * segments + (s % segments); };
  std::vector<Eigen::Vector3i> faces;
  for (int s = 0; s < segments; ++s) faces.emplace_back(0, idx(0, s + 1), idx(0, s));
  for (int r = 0; r + 1 < rings; ++r)
    for (int s = 0; s < segments; ++s) {
      faces.emplace_back(idx(r, s), idx(r, s + 1), idx(r + 1, s));
      faces.emplace_back(idx(r, s + 1), idx(r + 1, s + 1), idx(r + 1, s));
    }
  for (int s = 0; s < segments; ++s) faces.emplace_back(V - 1, idx(rings - 1, s), idx(rings - 1, s + 1));
  m.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
  for (std::size_t f = 0; f < faces.size(); ++f) m.faces.row(static_cast<Eigen::Index>(f)) = faces[f].transpose();
  return m;
}

AttributedMesh torus(int major, int minor, double major_radius, double minor_radius) {
  if (major < 3 || minor < 3) throw InvalidParams("torus needs at least 3x3 grid");
  AttributedMesh m;
  m.vertices.resize(major * minor, 3);
  m.faces.resize(2 * major * minor, 3);
  auto idx = [&](int i, int j) { return (i % major) * minor + (j % minor); };
  for (int i = 0; i < major; ++i)
    for (int j = 0; j < minor; ++j) {
      const double u = 2 * std::numbers::pi * i / major, v = 2 * std::numbers::pi * j / minor;
      const double ring = major_radius + minor_radius * std::cos(v);
      m.vertices.row(idx(i, j)) << ring * std::cos(u), minor_radius * std::sin(v), ring * std::sin(u);
      const int f = 2 * idx(i, j);
      m.faces.row(f) << idx(i, j), idx(i + 1, j), idx(i, j + 1);
      m.faces.row(f + 1) << idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1);
    }
  return m;
}

RigTemplate synthetic_rig(const SyntheticRigOptions& o, std::uint64_t seed) {
  if (o.joints < 1) throw InvalidParams("synthetic_rig needs at least one joint");
  Rng rng(seed);
  const AttributedMesh sphere = uv_sphere(o.rings, o.segments, o.radius);
  RigTemplate rig;
  rig.vertices = sphere.vertices;
  for (Eigen::Index v = 0; v < rig.vertices.rows(); ++v)
    for (int c = 0; c < 3; ++c) rig.vertices(v, c) += normal(rng, 0.05 * o.radius);
  rig.faces = sphere.faces;
  const Eigen::Index V = rig.vertices.rows();
  auto basis = [&](Eigen::Index cols) {
    return RowMatrix<double>(RowMatrix<double>::NullaryExpr(3 * V, cols, [&] { return normal(rng, o.basis_scale); }));
  };
  rig.shape_basis = basis(o.shape);
  rig.expr_basis = basis(o.expr);
  rig.pose_basis = basis(9 * (o.joints - 1));

  std::vector<Eigen::Triplet<double>> triplets;
  for (int j = 0; j < o.joints; ++j) {
    const Eigen::RowVectorXd w = sparse_simplex(rng, V, 4);
    for (Eigen::Index v = 0; v < V; ++v)
      if (w(v) != 0) triplets.emplace_back(j, static_cast<int>(v), w(v));
  }
  rig.joint_regressor.resize(o.joints, V);
  rig.joint_regressor.setFromTriplets(triplets.begin(), triplets.end());
  rig.skinning_weights.resize(V, o.joints);
  for (Eigen::Index v = 0; v < V; ++v) rig.skinning_weights.row(v) = sparse_simplex(rng, o.joints, 3);
  rig.parents = random_parents(rng, o.joints);
  return rig;
}

CanonicalGaussianAvatar random_avatar(Eigen::Index points, int joints, int expr, std::uint64_t seed) {
  if (points < 0 || joints < 1 || expr < 0) throw InvalidParams("random_avatar: bad sizes");
  Rng rng(seed);
  CanonicalGaussianAvatar a;
  const Eigen::Index M = points;
  a.positions.resize(M, 3);
  a.colors.resize(M, 3);
  a.opacities.resize(M);
  a.scales.resize(M, 3);
  a.rotations.resize(M, 4);
  a.skinning_weights.resize(M, joints);
  for (Eigen::Index k = 0; k < M; ++k) {
    Eigen::Vector3d dir(normal(rng, 1), normal(rng, 1), normal(rng, 1));
    dir /= std::max(dir.norm(), 1e-9);
    a.positions.row(k) = (dir * (0.1 + normal(rng, 0.005))).transpose().cast<float>();
    for (int c = 0; c < 3; ++c) {
      a.colors(k, c) = static_cast<float>(uniform(rng, 0, 1));
      a.scales(k, c) = static_cast<float>(uniform(rng, 0.001, 0.004));
    }
    a.opacities(k) = static_cast<float>(uniform(rng, 0.05, 0.95));
    a.rotations.row(k) = random_quaternion(rng).transpose().cast<float>();
    a.skinning_weights.row(k) = sparse_simplex(rng, joints, std::min(joints, 3)).cast<float>();
  }
  a.expr_basis = RowMatrix<float>::NullaryExpr(3 * M, expr, [&] { return static_cast<float>(normal(rng, 1e-3)); });
  a.pose_basis =
      RowMatrix<float>::NullaryExpr(3 * M, 9 * (joints - 1), [&] { return static_cast<float>(normal(rng, 1e-3)); });
  a.joints.resize(joints, 3);
  for (int j = 0; j < joints; ++j)
    for (int c = 0; c < 3; ++c) a.joints(j, c) = static_cast<float>(normal(rng, 0.03));
  a.parents = random_parents(rng, joints);
  return a;
}

Camera front_camera(int width, int height, double distance, double focal_scale) {
  Camera cam;
  cam.width = width;
  cam.height = height;
  cam.fx = cam.fy = focal_scale * std::max(width, height);
  cam.cx = width / 2.0;
  cam.cy = height / 2.0;
  cam.world_to_camera(2, 3) = distance;
  return cam;
}

GaussianCloud<double> random_scene(int count, const Camera& camera, double near, double far, std::uint64_t seed) {
  Rng rng(seed);
  GaussianCloud<double> g(count);
  const Eigen::Matrix3d Rt = camera.rotation().transpose();
  const Eigen::Vector3d t = camera.translation();
  for (int k = 0; k < count; ++k) {
    const double z = uniform(rng, near, far);
    const double x = (uniform(rng, -0.1, camera.width + 0.1) - camera.cx) * z / camera.fx;
    const double y = (uniform(rng, -0.1, camera.height + 0.1) - camera.cy) * z / camera.fy;
    g.positions.row(k) = (Rt * (Eigen::Vector3d(x, y, z) - t)).transpose();
    g.rotations.row(k) = random_quaternion(rng).transpose();
    // Footprints of roughly 1 to 12 pixels.
    for (int c = 0; c < 3; ++c) {
      g.scales(k, c) = uniform(rng, 0.5, 6.0) * z / camera.fx;
      g.colors(k, c) = uniform(rng, 0, 1);
    }
    g.opacities(k) = uniform(rng, 0.05, 0.99);
  }
  return g;
}

std::vector<DrivingFrame> random_stream(const CanonicalGaussianAvatar& avatar, std::size_t frames, const Camera& camera,
                                        double pose_sigma, double expr_sigma, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<DrivingFrame> out(frames);
  for (auto& f : out) {
    f.theta = Vector<float>::NullaryExpr(3 * avatar.joint_count(), [&] { return float(normal(rng, pose_sigma)); });
    f.phi = Vector<float>::NullaryExpr(avatar.expr_count(), [&] { return float(normal(rng, expr_sigma)); });
    f.camera = camera;
  }
  return out;
}

}  // namespace splatar
