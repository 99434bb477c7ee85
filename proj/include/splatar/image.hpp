// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "splatar/common.hpp"

namespace splatar {

/// Interleaved image: row y*width + x of `data` holds the channels of pixel (x, y).
template <typename Scalar>
struct Image {
  int width = 0;
  int height = 0;
  Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> data;

  Image() = default;
  Image(int w, int h, int channels) : width(w), height(h), data(Eigen::Index(w) * h, channels) { data.setZero(); }

  int channels() const { return static_cast<int>(data.cols()); }
  Eigen::Index pixel_count() const { return Eigen::Index(width) * height; }
  Scalar& at(int x, int y, int c) { return data(Eigen::Index(y) * width + x, c); }
  Scalar at(int x, int y, int c) const { return data(Eigen::Index(y) * width + x, c); }

  template <typename Other>
  Image<Other> cast() const {
    Image<Other> out;
    out.width = width;
    out.height = height;
    out.data = data.template cast<Other>();
    return out;
  }
};

/// round(clamp(v, 0, 1) * 255), interleaved.
std::vector<std::uint8_t> quantize(const Image<float>& image);

/// Binary PPM (P6) for 3-channel images, PGM (P5) for 1-channel.
void write_pnm(const Image<float>& image, const std::filesystem::path& path);
/// 8-bit RGB or grayscale PNG, chosen by channel count.
void write_png(const Image<float>& image, const std::filesystem::path& path);

/// Reads 8-bit PNG (gray/RGB/RGBA, alpha dropped) or P5/P6 into [0,1].
Image<float> read_image(const std::filesystem::path& path);

}  // namespace splatar
