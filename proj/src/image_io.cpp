// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include "splatar/image.hpp"

namespace splatar {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

std::vector<std::uint8_t> quantize(const Image<float>& image) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(image.data.size()));
  const Eigen::Index C = image.data.cols();
  for (Eigen::Index p = 0; p < image.data.rows(); ++p)
    for (Eigen::Index c = 0; c < C; ++c) {
      const float v = std::clamp(image.data(p, c), 0.f, 1.f);
      out[static_cast<std::size_t>(p * C + c)] = static_cast<std::uint8_t>(std::lround(v * 255.f));
    }
  return out;
}

void write_pnm(const Image<float>& image, const std::filesystem::path& path) {
  const int C = image.channels();
  if (C != 1 && C != 3) throw InvalidParams("PNM output needs 1 or 3 channels");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f << (C == 3 ? "P6\n" : "P5\n") << image.width << ' ' << image.height << "\n255\n";
  const auto bytes = quantize(image);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

void write_png(const Image<float>& image, const std::filesystem::path& path) {
  const int C = image.channels();
  if (C != 1 && C != 3) throw InvalidParams("PNG output needs 1 or 3 channels");
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot open for writing: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialization failed");
  }
  const auto bytes = quantize(image);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encoding failed: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               C == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y)
    png_write_row(png, bytes.data() + static_cast<std::size_t>(y) * image.width * C);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

namespace {

Image<float> read_png(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) throw IoError("cannot read PNG: " + path.string());
  const bool gray = (img.format & PNG_FORMAT_FLAG_COLOR) == 0;
  img.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  const int C = gray ? 1 : 3;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw IoError("cannot decode PNG: " + path.string());
  }
  Image<float> out(static_cast<int>(img.width), static_cast<int>(img.height), C);
  for (Eigen::Index i = 0; i < out.data.size(); ++i)
    out.data(i / C, i % C) = static_cast<float>(buf[static_cast<std::size_t>(i)]) / 255.f;
  return out;
}

Image<float> read_pnm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  f >> magic >> w >> h >> maxval;
  f.get();
  if ((magic != "P6" && magic != "P5") || w <= 0 || h <= 0 || maxval != 255)
    throw IoError("unsupported PNM file: " + path.string());
  const int C = magic == "P6" ? 3 : 1;
  Image<float> out(w, h, C);
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(out.data.size()));
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!f) throw IoError("truncated PNM file: " + path.string());
  for (Eigen::Index i = 0; i < out.data.size(); ++i)
    out.data(i / C, i % C) = static_cast<float>(buf[static_cast<std::size_t>(i)]) / 255.f;
  return out;
}

}  // namespace

Image<float> read_image(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  char head[2] = {};
  f.read(head, 2);
  if (!f) throw IoError("cannot read image: " + path.string());
  return head[0] == 'P' ? read_pnm(path) : read_png(path);
}

}  // namespace splatar
