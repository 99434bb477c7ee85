// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

#include "splatar/animator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "splatar/rig_model.hpp"
#include "splatar/rotation.hpp"

namespace splatar {

namespace {

constexpr Eigen::Index kChunk = 2048;

using Clock = std::chrono::steady_clock;

SequenceStats summarize(std::vector<double>& ms) {
  SequenceStats s;
  s.frames = ms.size();
  if (ms.empty()) return s;
  double total = 0;
  for (double t : ms) total += t;
  s.mean_ms = total / static_cast<double>(ms.size());
  std::sort(ms.begin(), ms.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(ms.size()))) - 1;
  s.p95_ms = ms[std::min(rank, ms.size() - 1)];
  s.steps_per_sec = total > 0 ? 1000.0 * static_cast<double>(ms.size()) / total : 0;
  return s;
}

}  // namespace

void PosedGaussianSet::resize_for(const CanonicalGaussianAvatar& avatar) {
  source_ = &avatar;
  positions.resize(avatar.point_count(), 3);
  rotations.resize(avatar.point_count(), 4);
  transforms_.resize(static_cast<std::size_t>(avatar.joint_count()));
  pose_feature_.resize(avatar.posecorr_count());
}

GaussianView<float> PosedGaussianSet::view() const {
  if (source_ == nullptr) throw UsageError("PosedGaussianSet has no source avatar");
  return {positions, rotations, source_->scales, source_->colors, source_->opacities};
}

void animate(const CanonicalGaussianAvatar& avatar, const Eigen::Ref<const Vector<float>>& theta,
             const Eigen::Ref<const Vector<float>>& phi, PosedGaussianSet& out, ThreadPool* pool) {
  const Eigen::Index M = avatar.point_count();
  const Eigen::Index J = avatar.joint_count();
  if (theta.size() != 3 * J)
    throw InvalidParams("theta has " + std::to_string(theta.size()) + " values, avatar needs " +
                        std::to_string(3 * J));
  if (phi.size() != avatar.expr_count())
    throw InvalidParams("phi has " + std::to_string(phi.size()) + " values, avatar needs " +
                        std::to_string(avatar.expr_count()));
  if (out.source_ != &avatar || out.positions.rows() != M || out.rotations.rows() != M ||
      out.transforms_.size() != static_cast<std::size_t>(J) || out.pose_feature_.size() != avatar.posecorr_count())
    throw InvalidParams("output set is not sized for this avatar (call resize_for)");

  pose_feature<float>(theta, J, out.pose_feature_.data());
  skinning_transforms<float>(avatar.joints, theta, avatar.parents, std::span<Mat34<float>>(out.transforms_));

  const Vector<float>& feature = out.pose_feature_;
  const std::span<const Mat34<float>> transforms(out.transforms_);
  float* positions = out.positions.data();
  float* rotations = out.rotations.data();

  const auto chunks = static_cast<std::size_t>((M + kChunk - 1) / kChunk);
  parallel_for(pool, chunks, [&](std::size_t chunk) {
    const Eigen::Index begin = static_cast<Eigen::Index>(chunk) * kChunk;
    const Eigen::Index n = std::min(kChunk, M - begin);

    // Blendshape offsets for the whole chunk, written straight into the output.
    Eigen::Map<Vector<float>> offsets(positions + 3 * begin, 3 * n);
    offsets.noalias() = avatar.expr_basis.middleRows(3 * begin, 3 * n) * phi;
    offsets.noalias() += avatar.pose_basis.middleRows(3 * begin, 3 * n) * feature;

    for (Eigen::Index k = begin; k < begin + n; ++k) {
      Mat34<float> blended = Mat34<float>::Zero();
      for (Eigen::Index j = 0; j < J; ++j) {
        const float w = avatar.skinning_weights(k, j);
        if (w != 0.f) blended += w * transforms[static_cast<std::size_t>(j)];
      }
      Eigen::Map<Vec3<float>> pos(positions + 3 * k);
      const Vec3<float> rest = avatar.positions.row(k).transpose() + pos;
      pos = blended.leftCols<3>() * rest + blended.col(3);

      const Eigen::Vector4f q_skin = matrix_to_quaternion(orthonormalize(blended.leftCols<3>()));
      const Eigen::Vector4f q = quaternion_multiply(q_skin, avatar.rotations.row(k).transpose());
      Eigen::Map<Eigen::Vector4f>(rotations + 4 * k) = q.normalized();
    }
  });
}

SequenceStats animate_sequence(const CanonicalGaussianAvatar& avatar, std::span<const DrivingFrame> frames,
                               const FrameSink& sink, ThreadPool* pool) {
  PosedGaussianSet out(avatar);
  std::vector<double> ms;
  ms.reserve(frames.size());
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto t0 = Clock::now();
    animate(avatar, frames[f].theta, frames[f].phi, out, pool);
    ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
    if (sink) sink(f, frames[f], out);
  }
  return summarize(ms);
}

SequenceStats animate_sequence(const CanonicalGaussianAvatar& avatar, std::istream& stream, const FrameSink& sink,
                               ThreadPool* pool) {
  PosedGaussianSet out(avatar);
  std::vector<double> ms;
  std::string line;
  std::size_t number = 0, index = 0;
  while (std::getline(stream, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const DrivingFrame frame = parse_driving_frame(line, number);
    const auto t0 = Clock::now();
    try {
      animate(avatar, frame.theta, frame.phi, out, pool);
    } catch (const InvalidParams& e) {
      throw StreamError(number, e.what());
    }
    ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
    if (sink) sink(index, frame, out);
    ++index;
  }
  return summarize(ms);
}

}  // namespace splatar
