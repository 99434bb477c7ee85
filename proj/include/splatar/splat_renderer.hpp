// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "splatar/camera.hpp"
#include "splatar/gaussians.hpp"
#include "splatar/image.hpp"
#include "splatar/parallel.hpp"

namespace splatar {

inline constexpr double kNearPlane = 1e-4;
inline constexpr double kCovarianceLowPass = 0.3;  // px^2 added to the 2D covariance diagonal
inline constexpr double kMaxAlpha = 0.99;
inline constexpr double kMinAlpha = 1.0 / 255.0;
inline constexpr int kTileSize = 16;

template <typename Scalar>
struct RenderTarget {
  Image<Scalar> rgb;    // 3 channels
  Image<Scalar> alpha;  // 1 channel, silhouette
  Vec3<Scalar> background = Vec3<Scalar>::Zero();

  RenderTarget() = default;
  RenderTarget(int width, int height) { resize(width, height); }

  void resize(int width, int height) {
    if (rgb.width != width || rgb.height != height) {
      rgb = Image<Scalar>(width, height, 3);
      alpha = Image<Scalar>(width, height, 1);
    }
  }
  int width() const { return rgb.width; }
  int height() const { return rgb.height; }
};

/// Screen-space footprint of one Gaussian.
template <typename Scalar>
struct ProjectedGaussian {
  Eigen::Matrix<Scalar, 2, 1> mean;  // pixels
  Eigen::Matrix<Scalar, 2, 2> cov;   // pixels^2, low-pass included
  Scalar depth;                      // camera-space z
};

/// R diag(s^2) R^T.
template <typename Scalar>
Mat3<Scalar> covariance_3d(const Eigen::Matrix<Scalar, 4, 1>& quaternion, const Vec3<Scalar>& scale);

/// EWA projection. Returns nullopt when the point is not in front of the near
/// plane (culled).
template <typename Scalar>
std::optional<ProjectedGaussian<Scalar>> project(const Vec3<Scalar>& position,
                                                 const Eigen::Matrix<Scalar, 4, 1>& rotation,
                                                 const Vec3<Scalar>& scale, const Camera& camera);

/// One pixel's contribution from splat `index`: alpha_k and the weight
/// alpha_k * T_k with which its color entered the pixel.
template <typename Scalar>
struct Contribution {
  std::uint32_t index;
  Scalar alpha;
  Scalar weight;
};

/// Per-pixel compositing records retained by a forward pass for backward.
template <typename Scalar>
struct ForwardRecord {
  int width = 0, height = 0;
  Eigen::Index gaussian_count = 0;
  std::vector<std::vector<Contribution<Scalar>>> pixels;

  bool retained() const { return !pixels.empty(); }
};

/// Tile-based rasterizer: 16x16 tiles, splats binned in global (depth, index)
/// order, tiles composited in parallel. Output is identical for any thread
/// count. Holds scratch buffers reused across frames.
template <typename Scalar>
class SplatRenderer {
 public:
  explicit SplatRenderer(ThreadPool* pool = nullptr) : pool_(pool) {}

  /// Resizes `target` to the camera and composites front to back. If
  /// `record` is given, per-pixel contributions are kept for color_backward.
  void render(const GaussianView<Scalar>& gaussians, const Camera& camera, RenderTarget<Scalar>& target,
              ForwardRecord<Scalar>* record = nullptr);

 private:
  struct Splat {
    Scalar mean_x, mean_y;
    Scalar conic_a, conic_b, conic_c;
    Scalar opacity;
    Scalar color[3];
    Scalar depth;
    int px0, py0, px1, py1;          // pixel bounding box, inclusive
    int tile_x0, tile_y0, tile_x1, tile_y1;  // half-open tile range
  };

  ThreadPool* pool_;
  std::vector<Splat> projected_;
  std::vector<std::uint8_t> visible_;
  std::vector<std::uint32_t> order_;
  std::vector<std::uint32_t> tile_offsets_;
  std::vector<std::uint32_t> tile_cursor_;
  std::vector<std::uint32_t> tile_entries_;
};

template <typename Scalar>
void render(const GaussianView<Scalar>& gaussians, const Camera& camera, RenderTarget<Scalar>& target,
            ThreadPool* pool = nullptr, ForwardRecord<Scalar>* record = nullptr) {
  SplatRenderer<Scalar>(pool).render(gaussians, camera, target, record);
}

/// Reference compositor: every pixel walks every Gaussian in global
/// (depth, index) order. No tiling and no footprint culling.
template <typename Scalar>
void render_oracle(const GaussianView<Scalar>& gaussians, const Camera& camera, RenderTarget<Scalar>& target);

/// dL/dc_k for a pixel-wise loss, given dL/dC per pixel (3 channels):
/// sum over pixels of alpha_k T_k dL/dC. Throws UsageError without a
/// retained forward record.
template <typename Scalar>
Points<Scalar> color_backward(const ForwardRecord<Scalar>& record, const Image<Scalar>& target_grad);

}  // namespace splatar
