// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <istream>
#include <span>
#include <vector>

#include "splatar/avatar_asset.hpp"
#include "splatar/gaussians.hpp"
#include "splatar/parallel.hpp"

namespace splatar {

/// Posed (world-space) Gaussians. Positions and rotations are owned and
/// rewritten every frame; scales, colors and opacities are read from the
/// source avatar. Also holds the per-frame scratch so animate() needs no heap.
class PosedGaussianSet {
 public:
  PosedGaussianSet() = default;
  explicit PosedGaussianSet(const CanonicalGaussianAvatar& avatar) { resize_for(avatar); }

  /// Sizes every buffer for `avatar` and binds it as the attribute source.
  void resize_for(const CanonicalGaussianAvatar& avatar);

  const CanonicalGaussianAvatar* source() const { return source_; }
  Eigen::Index size() const { return positions.rows(); }

  GaussianView<float> view() const;

  Points<float> positions;
  Quaternions<float> rotations;

 private:
  friend void animate(const CanonicalGaussianAvatar&, const Eigen::Ref<const Vector<float>>&,
                      const Eigen::Ref<const Vector<float>>&, PosedGaussianSet&, ThreadPool*);

  const CanonicalGaussianAvatar* source_ = nullptr;
  std::vector<Mat34<float>> transforms_;
  Vector<float> pose_feature_;
};

/// One frame: positions = LBS(G + pose_basis * vec(R(theta) - I) + expr_basis * phi)
/// and rotations = orthonormalized blended skinning rotation * canonical
/// rotation. `out` must have been sized for `avatar`; nothing is allocated.
void animate(const CanonicalGaussianAvatar& avatar, const Eigen::Ref<const Vector<float>>& theta,
             const Eigen::Ref<const Vector<float>>& phi, PosedGaussianSet& out, ThreadPool* pool = nullptr);

struct SequenceStats {
  std::size_t frames = 0;
  double mean_ms = 0;
  double p95_ms = 0;
  double steps_per_sec = 0;
};

using FrameSink = std::function<void(std::size_t frame_index, const DrivingFrame&, const PosedGaussianSet&)>;

/// Animates every frame into one reused output set and hands it to `sink`.
/// Timing covers animate() only.
SequenceStats animate_sequence(const CanonicalGaussianAvatar& avatar, std::span<const DrivingFrame> frames,
                               const FrameSink& sink, ThreadPool* pool = nullptr);

/// Same, reading a JSON Lines stream incrementally; a malformed line throws
/// StreamError carrying its line number.
SequenceStats animate_sequence(const CanonicalGaussianAvatar& avatar, std::istream& stream, const FrameSink& sink,
                               ThreadPool* pool = nullptr);

}  // namespace splatar
