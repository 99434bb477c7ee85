// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

#include "splatar/losses.hpp"

#include <array>
#include <atomic>
#include <cmath>
#include <iostream>

namespace splatar {

namespace {

template <typename Scalar>
void check_same(const Image<Scalar>& a, const Image<Scalar>& b, const char* op) {
  if (a.width != b.width || a.height != b.height || a.channels() != b.channels())
    throw InvalidParams(std::string(op) + ": image dimensions differ");
  if (a.data.size() == 0) throw InvalidParams(std::string(op) + ": empty image");
}

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

std::array<double, kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow> w{};
  double sum = 0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2 * kSsimSigma * kSsimSigma));
    sum += w[static_cast<std::size_t>(i)];
  }
  for (auto& v : w) v /= sum;
  return w;
}

// Separable valid-mode filter of a single-channel plane.
Eigen::ArrayXXd filter_valid(const Eigen::ArrayXXd& plane, const std::array<double, kSsimWindow>& w) {
  const Eigen::Index H = plane.rows(), W = plane.cols();
  const Eigen::Index oh = H - kSsimWindow + 1, ow = W - kSsimWindow + 1;
  Eigen::ArrayXXd rows = Eigen::ArrayXXd::Zero(H, ow);
  for (int k = 0; k < kSsimWindow; ++k) rows += w[static_cast<std::size_t>(k)] * plane.middleCols(k, ow);
  Eigen::ArrayXXd out = Eigen::ArrayXXd::Zero(oh, ow);
  for (int k = 0; k < kSsimWindow; ++k) out += w[static_cast<std::size_t>(k)] * rows.middleRows(k, oh);
  return out;
}

}  // namespace

void LossWeights::validate() const {
  for (double v : {l1, lpips, mask, offset})
    if (!(v >= 0) || !std::isfinite(v)) throw InvalidParams("loss weights must be finite and non-negative");
  if (!std::isfinite(epsilon)) throw InvalidParams("epsilon must be finite");
}

template <typename Scalar>
double l1_loss(const Image<Scalar>& a, const Image<Scalar>& b) {
  check_same(a, b, "l1_loss");
  return (a.data.template cast<double>() - b.data.template cast<double>()).abs().mean();
}

template <typename Scalar>
double mask_loss(const Image<Scalar>& alpha, const Image<Scalar>& gt_mask) {
  if (alpha.channels() != 1 || gt_mask.channels() != 1) throw InvalidParams("mask_loss: expected 1-channel images");
  return l1_loss(alpha, gt_mask);
}

template <typename Scalar>
double offset_reg(const Eigen::Ref<const Points<Scalar>>& offsets, double eps) {
  if (offsets.rows() == 0) return 0;
  const Eigen::ArrayXd dev = offsets.template cast<double>().rowwise().norm().array() - eps;
  return dev.square().mean();
}

template <typename Scalar>
Points<Scalar> offset_reg_gradient(const Eigen::Ref<const Points<Scalar>>& offsets, double eps) {
  const Eigen::Index M = offsets.rows();
  Points<Scalar> grad = Points<Scalar>::Zero(M, 3);
  for (Eigen::Index k = 0; k < M; ++k) {
    const Vec3<double> o = offsets.row(k).transpose().template cast<double>();
    const double norm = o.norm();
    if (norm > 0) grad.row(k) = (2.0 * (norm - eps) / (norm * double(M)) * o).transpose().template cast<Scalar>();
  }
  return grad;
}

double total_loss(const LossParts& parts, const LossWeights& weights) {
  weights.validate();
  return weights.l1 * parts.l1 + weights.lpips * parts.lpips + weights.mask * parts.mask +
         weights.offset * parts.offset;
}

LossParts evaluate_losses(const Image<float>& rendered, const Image<float>& target, const Image<float>& alpha,
                          const Image<float>& gt_mask, const Eigen::Ref<const Points<float>>& offsets, double eps,
                          const PerceptualLoss& perceptual) {
  static std::atomic<bool> noticed{false};
  LossParts parts;
  parts.l1 = l1_loss(rendered, target);
  parts.mask = mask_loss(alpha, gt_mask);
  parts.offset = offset_reg<float>(offsets, eps);
  if (perceptual) {
    parts.lpips = perceptual(rendered, target);
  } else if (!noticed.exchange(true)) {
    std::cerr << "splatar: no perceptual loss plug-in; LPIPS term is 0\n";
  }
  return parts;
}

template <typename Scalar>
double psnr(const Image<Scalar>& a, const Image<Scalar>& b) {
  check_same(a, b, "psnr");
  return psnr_from_mse((a.data.template cast<double>() - b.data.template cast<double>()).square().mean());
}

double psnr_from_mse(double mse) {
  if (std::isnan(mse) || mse < 0) throw InvalidParams("psnr: invalid MSE");
  if (mse == 0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

template <typename Scalar>
double ssim(const Image<Scalar>& a, const Image<Scalar>& b) {
  check_same(a, b, "ssim");
  if (a.width < kSsimWindow || a.height < kSsimWindow) throw InvalidParams("ssim: image smaller than 11x11 window");
  const auto w = gaussian_window();
  double total = 0;
  for (int c = 0; c < a.channels(); ++c) {
    // Planes laid out [H x W].
    Eigen::ArrayXXd x(a.height, a.width), y(a.height, a.width);
    for (int r = 0; r < a.height; ++r)
      for (int q = 0; q < a.width; ++q) {
        x(r, q) = double(a.at(q, r, c));
        y(r, q) = double(b.at(q, r, c));
      }
    const Eigen::ArrayXXd mx = filter_valid(x, w), my = filter_valid(y, w);
    const Eigen::ArrayXXd sxx = filter_valid(x * x, w) - mx * mx;
    const Eigen::ArrayXXd syy = filter_valid(y * y, w) - my * my;
    const Eigen::ArrayXXd sxy = filter_valid(x * y, w) - mx * my;
    const Eigen::ArrayXXd map = ((2 * mx * my + kSsimC1) * (2 * sxy + kSsimC2)) /
                                ((mx * mx + my * my + kSsimC1) * (sxx + syy + kSsimC2));
    total += map.mean();
  }
  return total / a.channels();
}

#define SPLATAR_INSTANTIATE(S)                                                              \
  template double l1_loss<S>(const Image<S>&, const Image<S>&);                             \
  template double mask_loss<S>(const Image<S>&, const Image<S>&);                           \
  template double offset_reg<S>(const Eigen::Ref<const Points<S>>&, double);                \
  template Points<S> offset_reg_gradient<S>(const Eigen::Ref<const Points<S>>&, double);    \
  template double psnr<S>(const Image<S>&, const Image<S>&);                                \
  template double ssim<S>(const Image<S>&, const Image<S>&);

SPLATAR_INSTANTIATE(float)
SPLATAR_INSTANTIATE(double)

#undef SPLATAR_INSTANTIATE

}  // namespace splatar
