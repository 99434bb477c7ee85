// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "splatar/avatar_asset.hpp"
#include "splatar/common.hpp"
#include "splatar/image.hpp"

namespace splatar {

/// Transformer stack shape. Full scale is 10 layers, 16 heads, width 1024;
/// tests run tiny configurations.
struct AttnStackConfig {
  int layers = 2;
  int heads = 2;
  int width = 16;
  int ffn_width = 32;
  int pe_frequencies = 4;

  void validate() const;
  static AttnStackConfig full_scale() { return {10, 16, 1024, 4096, 8}; }
};

struct ReconstructorConfig {
  AttnStackConfig stack;
  int feature_width = 16;      // channel count of incoming image features
  int patch_size = 16;         // built-in extractor
  int extractor_layers = 2;    // built-in extractor
  double offset_max = 0.05;    // m, |O| bound per component
  double scale_max = 0.05;     // m
  double scale_min_ratio = 1e-3;

  void validate() const;
};

/// Image features F_I: one row per grid cell, row-major over the grid.
struct ImageFeatureGrid {
  RowMatrix<double> features;  // [grid_h * grid_w x D]
  int grid_h = 0, grid_w = 0;
  int image_w = 0, image_h = 0;

  void validate() const;
};

/// Feature dump container ("GFEA": features [H_f, W_f, D] f64, image_size i32[2]).
ImageFeatureGrid load_feature_grid(const std::filesystem::path& path);
void save_feature_grid(const ImageFeatureGrid& grid, const std::filesystem::path& path);

// --- layers -----------------------------------------------------------------

/// y = x W^T + b on row vectors.
struct Linear {
  Matrix<double> weight;  // [out x in]
  Vector<double> bias;    // [out]

  Matrix<double> operator()(const Eigen::Ref<const Matrix<double>>& x) const;
};

struct LayerNorm {
  Vector<double> gamma, beta;
  static constexpr double kEps = 1e-5;

  Matrix<double> operator()(const Eigen::Ref<const Matrix<double>>& x) const;
};

struct MultiHeadAttention {
  Linear q, k, v, o;
};

/// Pre-norm block: self-attention among queries, optional cross-attention
/// to the image features, feed-forward; each sub-layer residual.
struct AttnBlock {
  LayerNorm self_norm;
  MultiHeadAttention self_attn;
  LayerNorm cross_norm;
  LayerNorm context_norm;
  MultiHeadAttention cross_attn;
  LayerNorm ffn_norm;
  Linear ffn_in, ffn_out;
};

struct DecodeHeads {
  Linear color, opacity, scale, rotation, offset;
};

struct ReconstructorWeights {
  ReconstructorConfig config;
  Linear query_in, query_out;  // PE -> D MLP
  Linear feature_proj;         // feature_width -> D
  std::vector<AttnBlock> blocks;
  LayerNorm final_norm;
  DecodeHeads heads;
  // Built-in patch-embedding extractor.
  Linear patch_embed;  // 3 p^2 -> feature_width
  std::vector<AttnBlock> extractor_blocks;  // cross-attention unused

  /// Gaussian(0, 1/fan_in) weights, zero biases, unit layer-norm gains; the
  /// rotation head bias is (1, 0, 0, 0).
  static ReconstructorWeights random(const ReconstructorConfig& config, std::uint64_t seed);

  /// Sets every decode-head weight (and all head biases except rotation) to 0.
  void zero_heads();

  void save(const std::filesystem::path& path) const;
  static ReconstructorWeights load(const std::filesystem::path& path);
};

// --- operations -------------------------------------------------------------

/// Running check on attention softmax rows.
struct AttentionStats {
  std::size_t rows = 0;
  double max_row_sum_error = 0;
};

/// [M x 6F]: band i holds sin(2^i pi x), sin(2^i pi y), sin(2^i pi z), then
/// the three cosines.
Matrix<double> positional_encode(const Eigen::Ref<const Points<double>>& points, int frequencies);

/// Two-layer MLP (GELU) from the encoding to the model width: F_P.
Matrix<double> point_queries(const Eigen::Ref<const Matrix<double>>& encoding, const ReconstructorWeights& w);

/// softmax(Q K^T / sqrt(d)) V per head; Q, K, V already projected,
/// [rows x heads*d]. Throws on non-finite input.
Matrix<double> attention(const Eigen::Ref<const Matrix<double>>& q, const Eigen::Ref<const Matrix<double>>& k,
                         const Eigen::Ref<const Matrix<double>>& v, int heads, AttentionStats* stats = nullptr);

/// Projected multi-head attention of `queries` over `context`.
Matrix<double> multi_head_attention(const MultiHeadAttention& mha, const Eigen::Ref<const Matrix<double>>& queries,
                                    const Eigen::Ref<const Matrix<double>>& context, int heads,
                                    AttentionStats* stats = nullptr);

/// L blocks of [self-attention, cross-attention to the flattened features,
/// feed-forward] followed by the final layer norm.
Matrix<double> cross_attention_stack(const Eigen::Ref<const Matrix<double>>& point_features,
                                     const ImageFeatureGrid& image_features, const ReconstructorWeights& w,
                                     AttentionStats* stats = nullptr);

struct DecodedAttributes {
  Points<double> colors;
  Vector<double> opacities;
  Points<double> scales;
  Quaternions<double> rotations;
  Points<double> offsets;
};

/// color = sigmoid, opacity = sigmoid clamped into (0,1), scale =
/// s_max exp(k (tanh(z) - 1)) in [s_min, s_max], rotation = normalized
/// 4-vector, offset = offset_max tanh(z).
DecodedAttributes decode_attributes(const Eigen::Ref<const Matrix<double>>& features, const ReconstructorWeights& w);

/// Image-to-features stage. The built-in extractor is a linear patch
/// embedding with a 2D sine-cosine position code and self-attention blocks;
/// imported features from another backbone can be used instead.
class ImageFeatureExtractor {
 public:
  virtual ~ImageFeatureExtractor() = default;
  virtual ImageFeatureGrid extract(const Image<float>& image) const = 0;
};

class PatchEmbeddingExtractor : public ImageFeatureExtractor {
 public:
  explicit PatchEmbeddingExtractor(const ReconstructorWeights& weights) : weights_(weights) {}
  ImageFeatureGrid extract(const Image<float>& image) const override;

 private:
  const ReconstructorWeights& weights_;
};

/// Queries from the canonical (shaped, subdivided) points, attention stack,
/// attribute decoding, then bake with the decoded offsets.
CanonicalGaussianAvatar reconstruct(const ImageFeatureGrid& features, const CanonicalMesh& canonical,
                                    const ReconstructorWeights& weights, AttentionStats* stats = nullptr,
                                    DecodedAttributes* decoded = nullptr);

}  // namespace splatar
