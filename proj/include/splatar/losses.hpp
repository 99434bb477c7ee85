// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>

#include "splatar/common.hpp"
#include "splatar/image.hpp"

namespace splatar {

/// Training loss weights. Defaults are lambda1 = lambda2 = lambda3 = 1,
/// lambda4 = 0.1, epsilon = 1e-4 m.
struct LossWeights {
  double l1 = 1.0;
  double lpips = 1.0;
  double mask = 1.0;
  double offset = 0.1;
  double epsilon = 1e-4;

  /// Throws InvalidParams if any weight is negative or non-finite.
  void validate() const;
};

struct LossParts {
  double l1 = 0;
  double lpips = 0;
  double mask = 0;
  double offset = 0;
};

/// Mean absolute difference over every pixel and channel.
template <typename Scalar>
double l1_loss(const Image<Scalar>& a, const Image<Scalar>& b);

/// L1 between a rendered alpha channel and a ground-truth mask (1 channel).
template <typename Scalar>
double mask_loss(const Image<Scalar>& alpha, const Image<Scalar>& gt_mask);

/// mean_k (|O_k| - eps)^2 over the rows of O.
template <typename Scalar>
double offset_reg(const Eigen::Ref<const Points<Scalar>>& offsets, double eps);

/// d offset_reg / d O. Rows with |O_k| = 0 get a zero (sub)gradient.
template <typename Scalar>
Points<Scalar> offset_reg_gradient(const Eigen::Ref<const Points<Scalar>>& offsets, double eps);

/// Optional perceptual-loss plug-in; without one the LPIPS term is 0.
using PerceptualLoss = std::function<double(const Image<float>&, const Image<float>&)>;

double total_loss(const LossParts& parts, const LossWeights& weights);

/// Every loss term for one rendered frame. The LPIPS term comes from
/// `perceptual` when supplied; otherwise it is 0 and a one-time notice is
/// written to stderr.
LossParts evaluate_losses(const Image<float>& rendered, const Image<float>& target, const Image<float>& alpha,
                          const Image<float>& gt_mask, const Eigen::Ref<const Points<float>>& offsets, double eps,
                          const PerceptualLoss& perceptual = {});

/// Reported instead of +inf when the images are identical.
inline constexpr double kPsnrCap = 100.0;

/// 10 log10(1 / mse), capped at kPsnrCap.
double psnr_from_mse(double mse);

/// 10 log10(1 / MSE) for [0,1] images; kPsnrCap when MSE is 0.
template <typename Scalar>
double psnr(const Image<Scalar>& a, const Image<Scalar>& b);

/// Mean SSIM over channels: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, dynamic range 1, valid windows only.
template <typename Scalar>
double ssim(const Image<Scalar>& a, const Image<Scalar>& b);

}  // namespace splatar
