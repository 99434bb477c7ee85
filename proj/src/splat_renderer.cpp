// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

#include "splatar/splat_renderer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "splatar/rotation.hpp"

namespace splatar {

namespace {

template <typename Scalar>
struct Conic {
  Scalar a, b, c;
};

// Inverse of a 2x2 symmetric covariance; nullopt when not positive definite.
template <typename Scalar>
std::optional<Conic<Scalar>> make_conic(const Eigen::Matrix<Scalar, 2, 2>& cov) {
  const Scalar det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(0, 1);
  if (!(det > Scalar(0)) || !std::isfinite(det)) return std::nullopt;
  const Scalar inv = Scalar(1) / det;
  return Conic<Scalar>{cov(1, 1) * inv, -cov(0, 1) * inv, cov(0, 0) * inv};
}

// Shared by the tiled path and the oracle so both see the same alpha bits.
template <typename Scalar>
inline Scalar splat_alpha(Scalar mean_x, Scalar mean_y, const Conic<Scalar>& conic, Scalar opacity, Scalar px,
                          Scalar py) {
  const Scalar dx = px - mean_x;
  const Scalar dy = py - mean_y;
  const Scalar power = Scalar(-0.5) * (conic.a * dx * dx + conic.c * dy * dy) - conic.b * dx * dy;
  if (power > Scalar(0)) return Scalar(0);
  const Scalar alpha = std::min(Scalar(kMaxAlpha), opacity * std::exp(power));
  return alpha < Scalar(kMinAlpha) ? Scalar(0) : alpha;
}

template <typename Scalar>
Camera check_target(const Camera& camera, RenderTarget<Scalar>& target) {
  camera.validate();
  target.resize(camera.width, camera.height);
  return camera;
}

template <typename Scalar>
void finish_pixel(RenderTarget<Scalar>& target, Eigen::Index pixel, const Vec3<Scalar>& color, Scalar transmittance) {
  target.rgb.data.row(pixel) = (color + transmittance * target.background).transpose().array();
  target.alpha.data(pixel, 0) = Scalar(1) - transmittance;
}

}  // namespace

template <typename Scalar>
Mat3<Scalar> covariance_3d(const Eigen::Matrix<Scalar, 4, 1>& quaternion, const Vec3<Scalar>& scale) {
  const Mat3<Scalar> R = quaternion_to_matrix(quaternion.normalized());
  return R * scale.array().square().matrix().asDiagonal() * R.transpose();
}

template <typename Scalar>
std::optional<ProjectedGaussian<Scalar>> project(const Vec3<Scalar>& position,
                                                 const Eigen::Matrix<Scalar, 4, 1>& rotation,
                                                 const Vec3<Scalar>& scale, const Camera& camera) {
  const Mat3<Scalar> W = camera.rotation().cast<Scalar>();
  const Vec3<Scalar> p = W * position + camera.translation().cast<Scalar>();
  if (!(p.z() > Scalar(kNearPlane))) return std::nullopt;
  const Scalar fx = Scalar(camera.fx), fy = Scalar(camera.fy);
  const Scalar inv_z = Scalar(1) / p.z();
  Eigen::Matrix<Scalar, 2, 3> Jac;
  Jac << fx * inv_z, Scalar(0), -fx * p.x() * inv_z * inv_z,
         Scalar(0), fy * inv_z, -fy * p.y() * inv_z * inv_z;
  const Eigen::Matrix<Scalar, 2, 3> T = Jac * W;
  ProjectedGaussian<Scalar> out;
  out.cov = T * covariance_3d(rotation, scale) * T.transpose();
  out.cov(0, 0) += Scalar(kCovarianceLowPass);
  out.cov(1, 1) += Scalar(kCovarianceLowPass);
  out.mean << fx * p.x() * inv_z + Scalar(camera.cx), fy * p.y() * inv_z + Scalar(camera.cy);
  out.depth = p.z();
  return out;
}

template <typename Scalar>
void SplatRenderer<Scalar>::render(const GaussianView<Scalar>& g, const Camera& camera_in,
                                   RenderTarget<Scalar>& target, ForwardRecord<Scalar>* record) {
  const Camera camera = check_target(camera_in, target);
  const int W = camera.width, H = camera.height;
  const int tiles_x = (W + kTileSize - 1) / kTileSize;
  const int tiles_y = (H + kTileSize - 1) / kTileSize;
  const auto tile_count = static_cast<std::size_t>(tiles_x) * static_cast<std::size_t>(tiles_y);
  const Eigen::Index M = g.size();
  if (M > Eigen::Index(std::numeric_limits<std::uint32_t>::max())) throw InvalidParams("too many Gaussians");

  projected_.resize(static_cast<std::size_t>(M));
  visible_.assign(static_cast<std::size_t>(M), 0);

  constexpr Eigen::Index kChunk = 4096;
  parallel_for(pool_, static_cast<std::size_t>((M + kChunk - 1) / kChunk), [&](std::size_t chunk) {
    const Eigen::Index begin = static_cast<Eigen::Index>(chunk) * kChunk;
    const Eigen::Index end = std::min(M, begin + kChunk);
    for (Eigen::Index k = begin; k < end; ++k) {
      const Scalar opacity = g.opacities(k);
      // Largest alpha is min(0.99, o); below the cutoff the splat never shows.
      if (!(std::min(Scalar(kMaxAlpha), opacity) >= Scalar(kMinAlpha))) continue;
      const auto proj = project<Scalar>(g.positions.row(k).transpose(), g.rotations.row(k).transpose(),
                                        g.scales.row(k).transpose(), camera);
      if (!proj) continue;
      const auto conic = make_conic(proj->cov);
      if (!conic) continue;
      // alpha >= 1/255 requires d^T cov^-1 d <= 2 ln(255 o); bound that ellipse
      // by its axis-aligned box plus one pixel.
      const double r2 = 2.0 * std::log(255.0 * double(opacity));
      if (!(r2 >= 0)) continue;
      const double ex = std::sqrt(r2 * double(proj->cov(0, 0))) + 1.0;
      const double ey = std::sqrt(r2 * double(proj->cov(1, 1))) + 1.0;
      const double mx = double(proj->mean.x()), my = double(proj->mean.y());
      const double x0 = std::ceil(mx - ex), x1 = std::floor(mx + ex);
      const double y0 = std::ceil(my - ey), y1 = std::floor(my + ey);
      if (!(x1 >= 0 && y1 >= 0 && x0 <= W - 1 && y0 <= H - 1)) continue;
      Splat& s = projected_[static_cast<std::size_t>(k)];
      s.mean_x = proj->mean.x();
      s.mean_y = proj->mean.y();
      s.conic_a = conic->a;
      s.conic_b = conic->b;
      s.conic_c = conic->c;
      s.opacity = opacity;
      for (int c = 0; c < 3; ++c) s.color[c] = g.colors(k, c);
      s.depth = proj->depth;
      s.px0 = static_cast<int>(std::max(0.0, x0));
      s.py0 = static_cast<int>(std::max(0.0, y0));
      s.px1 = static_cast<int>(std::min<double>(W - 1, x1));
      s.py1 = static_cast<int>(std::min<double>(H - 1, y1));
      s.tile_x0 = s.px0 / kTileSize;
      s.tile_y0 = s.py0 / kTileSize;
      s.tile_x1 = s.px1 / kTileSize + 1;
      s.tile_y1 = s.py1 / kTileSize + 1;
      visible_[static_cast<std::size_t>(k)] = 1;
    }
  });

  order_.clear();
  for (Eigen::Index k = 0; k < M; ++k)
    if (visible_[static_cast<std::size_t>(k)]) order_.push_back(static_cast<std::uint32_t>(k));
  std::sort(order_.begin(), order_.end(), [&](std::uint32_t a, std::uint32_t b) {
    const Scalar da = projected_[a].depth, db = projected_[b].depth;
    return da < db || (da == db && a < b);
  });

  // Bin into tiles, preserving global order within every tile.
  tile_offsets_.assign(tile_count + 1, 0);
  for (std::uint32_t k : order_) {
    const Splat& s = projected_[k];
    for (int ty = s.tile_y0; ty < s.tile_y1; ++ty)
      for (int tx = s.tile_x0; tx < s.tile_x1; ++tx) ++tile_offsets_[static_cast<std::size_t>(ty * tiles_x + tx) + 1];
  }
  std::partial_sum(tile_offsets_.begin(), tile_offsets_.end(), tile_offsets_.begin());
  tile_cursor_.assign(tile_offsets_.begin(), tile_offsets_.end() - 1);
  tile_entries_.resize(tile_offsets_.back());
  for (std::uint32_t k : order_) {
    const Splat& s = projected_[k];
    for (int ty = s.tile_y0; ty < s.tile_y1; ++ty)
      for (int tx = s.tile_x0; tx < s.tile_x1; ++tx)
        tile_entries_[tile_cursor_[static_cast<std::size_t>(ty * tiles_x + tx)]++] = k;
  }

  if (record != nullptr) {
    record->width = W;
    record->height = H;
    record->gaussian_count = M;
    record->pixels.assign(static_cast<std::size_t>(W) * static_cast<std::size_t>(H), {});
  }

  parallel_for(pool_, tile_count, [&](std::size_t tile) {
    const int tx = static_cast<int>(tile % static_cast<std::size_t>(tiles_x));
    const int ty = static_cast<int>(tile / static_cast<std::size_t>(tiles_x));
    const int x_begin = tx * kTileSize, y_begin = ty * kTileSize;
    const int x_end = std::min(W, x_begin + kTileSize), y_end = std::min(H, y_begin + kTileSize);
    const int tw = x_end - x_begin;

    Scalar color[kTileSize * kTileSize][3] = {};
    Scalar trans[kTileSize * kTileSize];
    std::fill(std::begin(trans), std::end(trans), Scalar(1));

    // Splat-major over the tile; each pixel still sees splats in depth order.
    for (std::uint32_t e = tile_offsets_[tile]; e < tile_offsets_[tile + 1]; ++e) {
      const std::uint32_t k = tile_entries_[e];
      const Splat& s = projected_[k];
      const Conic<Scalar> conic{s.conic_a, s.conic_b, s.conic_c};
      const int sx0 = std::max(x_begin, s.px0), sx1 = std::min(x_end - 1, s.px1);
      const int sy0 = std::max(y_begin, s.py0), sy1 = std::min(y_end - 1, s.py1);
      for (int y = sy0; y <= sy1; ++y)
        for (int x = sx0; x <= sx1; ++x) {
          const Scalar alpha = splat_alpha(s.mean_x, s.mean_y, conic, s.opacity, Scalar(x), Scalar(y));
          if (alpha == Scalar(0)) continue;
          const int local = (y - y_begin) * tw + (x - x_begin);
          const Scalar weight = alpha * trans[local];
          for (int c = 0; c < 3; ++c) color[local][c] += weight * s.color[c];
          trans[local] *= Scalar(1) - alpha;
          if (record != nullptr)
            record->pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(W) + static_cast<std::size_t>(x)]
                .push_back({k, alpha, weight});
        }
    }

    for (int y = y_begin; y < y_end; ++y)
      for (int x = x_begin; x < x_end; ++x) {
        const int local = (y - y_begin) * tw + (x - x_begin);
        finish_pixel(target, Eigen::Index(y) * W + x, Vec3<Scalar>(color[local][0], color[local][1], color[local][2]),
                     trans[local]);
      }
  });
}

template <typename Scalar>
void render_oracle(const GaussianView<Scalar>& g, const Camera& camera_in, RenderTarget<Scalar>& target) {
  const Camera camera = check_target(camera_in, target);
  struct Entry {
    Scalar depth;
    Eigen::Index index;
    Eigen::Matrix<Scalar, 2, 1> mean;
    Conic<Scalar> conic;
  };
  std::vector<Entry> entries;
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    const auto proj = project<Scalar>(g.positions.row(k).transpose(), g.rotations.row(k).transpose(),
                                      g.scales.row(k).transpose(), camera);
    if (!proj) continue;
    const auto conic = make_conic(proj->cov);
    if (!conic) continue;
    entries.push_back({proj->depth, k, proj->mean, *conic});
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.depth < b.depth; });

  for (int y = 0; y < camera.height; ++y)
    for (int x = 0; x < camera.width; ++x) {
      Vec3<Scalar> color = Vec3<Scalar>::Zero();
      Scalar trans = Scalar(1);
      for (const Entry& e : entries) {
        const Scalar alpha =
            splat_alpha(e.mean.x(), e.mean.y(), e.conic, g.opacities(e.index), Scalar(x), Scalar(y));
        if (alpha == Scalar(0)) continue;
        for (int c = 0; c < 3; ++c) color(c) += alpha * trans * g.colors(e.index, c);
        trans *= Scalar(1) - alpha;
      }
      finish_pixel(target, Eigen::Index(y) * camera.width + x, color, trans);
    }
}

template <typename Scalar>
Points<Scalar> color_backward(const ForwardRecord<Scalar>& record, const Image<Scalar>& grad) {
  if (!record.retained()) throw UsageError("color_backward needs a forward pass rendered with a record");
  if (grad.width != record.width || grad.height != record.height || grad.channels() != 3)
    throw InvalidParams("color_backward: gradient image does not match the recorded render");
  Points<Scalar> out = Points<Scalar>::Zero(record.gaussian_count, 3);
  for (std::size_t p = 0; p < record.pixels.size(); ++p)
    for (const auto& c : record.pixels[p])
      out.row(c.index) += c.weight * grad.data.row(static_cast<Eigen::Index>(p)).matrix();
  return out;
}

#define SPLATAR_INSTANTIATE(S)                                                                                    \
  template Mat3<S> covariance_3d<S>(const Eigen::Matrix<S, 4, 1>&, const Vec3<S>&);                               \
  template std::optional<ProjectedGaussian<S>> project<S>(const Vec3<S>&, const Eigen::Matrix<S, 4, 1>&,          \
                                                          const Vec3<S>&, const Camera&);                         \
  template class SplatRenderer<S>;                                                                                \
  template void render_oracle<S>(const GaussianView<S>&, const Camera&, RenderTarget<S>&);                        \
  template Points<S> color_backward<S>(const ForwardRecord<S>&, const Image<S>&);

SPLATAR_INSTANTIATE(float)
SPLATAR_INSTANTIATE(double)

#undef SPLATAR_INSTANTIATE

}  // namespace splatar
