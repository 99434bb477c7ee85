// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

#include "splatar/reconstructor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "splatar/container.hpp"

namespace splatar {

namespace {

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr double kOpacityFloor = 1e-6;

void require_finite(const Eigen::Ref<const Matrix<double>>& m, const char* what) {
  if (!m.allFinite()) throw InvalidParams(std::string(what) + ": non-finite input");
}

Matrix<double> residual_block(const AttnBlock& b, const Matrix<double>& x, const Matrix<double>* context, int heads,
                              AttentionStats* stats) {
  Matrix<double> h = x;
  const Matrix<double> s = b.self_norm(h);
  h += multi_head_attention(b.self_attn, s, s, heads, stats);
  if (context != nullptr) {
    const Matrix<double> ctx = b.context_norm(*context);
    h += multi_head_attention(b.cross_attn, b.cross_norm(h), ctx, heads, stats);
  }
  Matrix<double> f = b.ffn_in(b.ffn_norm(h));
  f = f.unaryExpr(&gelu);
  h += b.ffn_out(f);
  return h;
}

// 2D sine-cosine code for a grid cell, width D.
Vector<double> grid_position_code(int row, int col, int width) {
  Vector<double> code = Vector<double>::Zero(width);
  const int quarter = width / 4;
  for (int i = 0; i < quarter; ++i) {
    const double freq = 1.0 / std::pow(10000.0, double(i) / std::max(quarter, 1));
    code(i) = std::sin(row * freq);
    code(quarter + i) = std::cos(row * freq);
    code(2 * quarter + i) = std::sin(col * freq);
    code(3 * quarter + i) = std::cos(col * freq);
  }
  return code;
}

}  // namespace

void AttnStackConfig::validate() const {
  if (layers < 0 || heads <= 0 || width <= 0 || ffn_width <= 0 || pe_frequencies <= 0)
    throw InvalidParams("attention stack sizes must be positive");
  if (width % heads != 0) throw InvalidParams("width must be divisible by heads");
}

void ReconstructorConfig::validate() const {
  stack.validate();
  if (feature_width <= 0 || patch_size <= 0 || extractor_layers < 0) throw InvalidParams("bad extractor config");
  if (feature_width % stack.heads != 0) throw InvalidParams("feature_width must be divisible by heads");
  if (!(offset_max > 0) || !(scale_max > 0) || !(scale_min_ratio > 0 && scale_min_ratio < 1))
    throw InvalidParams("bad decode bounds");
}

void ImageFeatureGrid::validate() const {
  if (features.rows() != Eigen::Index(grid_h) * grid_w) throw InvalidParams("feature grid row count mismatch");
  if (!features.allFinite()) throw InvalidParams("image features: non-finite values");
}

Matrix<double> Linear::operator()(const Eigen::Ref<const Matrix<double>>& x) const {
  if (x.cols() != weight.cols())
    throw InvalidParams("linear layer expects width " + std::to_string(weight.cols()) + ", got " +
                        std::to_string(x.cols()));
  // Row by row, so a row's result does not depend on its position in the batch.
  Matrix<double> y(x.rows(), weight.rows());
  Vector<double> in(x.cols()), out(weight.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    in = x.row(r).transpose();
    out.noalias() = weight * in;
    y.row(r) = (out + bias).transpose();
  }
  return y;
}

Matrix<double> LayerNorm::operator()(const Eigen::Ref<const Matrix<double>>& x) const {
  Matrix<double> y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    y.row(r) = ((x.row(r).array() - mean) / std::sqrt(var + kEps)).matrix();
  }
  y = (y.array().rowwise() * gamma.transpose().array()).rowwise() + beta.transpose().array();
  return y;
}

Matrix<double> positional_encode(const Eigen::Ref<const Points<double>>& points, int frequencies) {
  if (!points.allFinite()) throw InvalidParams("positional_encode: non-finite coordinates");
  Matrix<double> pe(points.rows(), 6 * frequencies);
  for (Eigen::Index r = 0; r < points.rows(); ++r)
    for (int i = 0; i < frequencies; ++i) {
      const double f = std::ldexp(std::numbers::pi, i);
      for (int a = 0; a < 3; ++a) {
        pe(r, 6 * i + a) = std::sin(f * points(r, a));
        pe(r, 6 * i + 3 + a) = std::cos(f * points(r, a));
      }
    }
  return pe;
}

Matrix<double> point_queries(const Eigen::Ref<const Matrix<double>>& encoding, const ReconstructorWeights& w) {
  return w.query_out(w.query_in(encoding).unaryExpr(&gelu));
}

Matrix<double> attention(const Eigen::Ref<const Matrix<double>>& q, const Eigen::Ref<const Matrix<double>>& k,
                         const Eigen::Ref<const Matrix<double>>& v, int heads, AttentionStats* stats) {
  require_finite(q, "attention queries");
  require_finite(k, "attention keys");
  require_finite(v, "attention values");
  if (k.rows() != v.rows() || q.cols() != k.cols() || heads <= 0 || q.cols() % heads != 0 || v.cols() % heads != 0)
    throw InvalidParams("attention: incompatible shapes");
  const Eigen::Index d = q.cols() / heads;
  const Eigen::Index dv = v.cols() / heads;
  const double scale = 1.0 / std::sqrt(double(d));
  const Eigen::Index n = k.rows();
  Matrix<double> out(q.rows(), v.cols());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::vector<double> weights(static_cast<std::size_t>(n));
  for (int h = 0; h < heads; ++h) {
    const auto kh = k.middleCols(h * d, d);
    const auto vh = v.middleCols(h * dv, dv);
    // Keys are visited in content order so the result does not depend on row order.
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      for (Eigen::Index t = 0; t < d; ++t)
        if (kh(a, t) != kh(b, t)) return kh(a, t) < kh(b, t);
      for (Eigen::Index t = 0; t < dv; ++t)
        if (vh(a, t) != vh(b, t)) return vh(a, t) < vh(b, t);
      return false;
    });
    for (Eigen::Index r = 0; r < q.rows(); ++r) {
      double max = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j) {
        double s = 0;
        for (Eigen::Index t = 0; t < d; ++t) s += q(r, h * d + t) * kh(j, t);
        weights[static_cast<std::size_t>(j)] = s * scale;
        max = std::max(max, s * scale);
      }
      double total = 0;
      for (const Eigen::Index j : order) {
        auto& w = weights[static_cast<std::size_t>(j)];
        w = std::exp(w - max);
        total += w;
      }
      double check = 0;
      for (Eigen::Index t = 0; t < dv; ++t) out(r, h * dv + t) = 0;
      for (const Eigen::Index j : order) {
        const double p = weights[static_cast<std::size_t>(j)] / total;
        check += p;
        for (Eigen::Index t = 0; t < dv; ++t) out(r, h * dv + t) += p * vh(j, t);
      }
      if (stats != nullptr) {
        ++stats->rows;
        stats->max_row_sum_error = std::max(stats->max_row_sum_error, std::abs(check - 1.0));
      }
    }
  }
  return out;
}

Matrix<double> multi_head_attention(const MultiHeadAttention& mha, const Eigen::Ref<const Matrix<double>>& queries,
                                    const Eigen::Ref<const Matrix<double>>& context, int heads, AttentionStats* stats) {
  return mha.o(attention(mha.q(queries), mha.k(context), mha.v(context), heads, stats));
}

Matrix<double> cross_attention_stack(const Eigen::Ref<const Matrix<double>>& point_features,
                                     const ImageFeatureGrid& image_features, const ReconstructorWeights& w,
                                     AttentionStats* stats) {
  require_finite(point_features, "point features");
  image_features.validate();
  const int heads = w.config.stack.heads;
  const Matrix<double> context = w.feature_proj(image_features.features);
  Matrix<double> x = point_features;
  for (const auto& block : w.blocks) x = residual_block(block, x, &context, heads, stats);
  return w.final_norm(x);
}

DecodedAttributes decode_attributes(const Eigen::Ref<const Matrix<double>>& features, const ReconstructorWeights& w) {
  const auto& cfg = w.config;
  const Eigen::Index M = features.rows();
  DecodedAttributes d;
  d.colors = w.heads.color(features).unaryExpr(&sigmoid);
  d.opacities = w.heads.opacity(features).col(0).unaryExpr([](double z) {
    return std::clamp(sigmoid(z), kOpacityFloor, 1.0 - kOpacityFloor);
  });
  // tanh keeps the exponent in [-2k, 0]: scales in [s_max * ratio, s_max].
  const double k = -0.5 * std::log(cfg.scale_min_ratio);
  d.scales = w.heads.scale(features).unaryExpr([&](double z) { return cfg.scale_max * std::exp(k * (std::tanh(z) - 1.0)); });
  const Matrix<double> raw_rot = w.heads.rotation(features);
  d.rotations.resize(M, 4);
  for (Eigen::Index r = 0; r < M; ++r) {
    const double n = raw_rot.row(r).norm();
    if (n > 1e-12 && std::isfinite(n))
      d.rotations.row(r) = raw_rot.row(r) / n;
    else
      d.rotations.row(r) << 1, 0, 0, 0;
  }
  d.offsets = w.heads.offset(features).unaryExpr([&](double z) { return cfg.offset_max * std::tanh(z); });
  return d;
}

ImageFeatureGrid PatchEmbeddingExtractor::extract(const Image<float>& image) const {
  const int p = weights_.config.patch_size;
  if (image.channels() != 3) throw InvalidParams("extractor expects an RGB image");
  if (image.width < p || image.height < p) throw InvalidParams("image smaller than one patch");
  ImageFeatureGrid grid;
  grid.grid_h = image.height / p;
  grid.grid_w = image.width / p;
  grid.image_w = image.width;
  grid.image_h = image.height;
  Matrix<double> patches(Eigen::Index(grid.grid_h) * grid.grid_w, 3 * p * p);
  for (int gy = 0; gy < grid.grid_h; ++gy)
    for (int gx = 0; gx < grid.grid_w; ++gx) {
      const Eigen::Index row = Eigen::Index(gy) * grid.grid_w + gx;
      for (int y = 0; y < p; ++y)
        for (int x = 0; x < p; ++x)
          for (int c = 0; c < 3; ++c)
            patches(row, (y * p + x) * 3 + c) = double(image.at(gx * p + x, gy * p + y, c));
    }
  Matrix<double> tokens = weights_.patch_embed(patches);
  for (int gy = 0; gy < grid.grid_h; ++gy)
    for (int gx = 0; gx < grid.grid_w; ++gx)
      tokens.row(Eigen::Index(gy) * grid.grid_w + gx) += grid_position_code(gy, gx, int(tokens.cols())).transpose();
  for (const auto& block : weights_.extractor_blocks)
    tokens = residual_block(block, tokens, nullptr, weights_.config.stack.heads, nullptr);
  grid.features = tokens;
  return grid;
}

CanonicalGaussianAvatar reconstruct(const ImageFeatureGrid& features, const CanonicalMesh& canonical,
                                    const ReconstructorWeights& weights, AttentionStats* stats,
                                    DecodedAttributes* decoded) {
  const Matrix<double> pe = positional_encode(canonical.mesh.vertices, weights.config.stack.pe_frequencies);
  const Matrix<double> queries = point_queries(pe, weights);
  const Matrix<double> refined = cross_attention_stack(queries, features, weights, stats);
  DecodedAttributes d = decode_attributes(refined, weights);
  GaussianAttributes attrs;
  attrs.offsets = d.offsets;
  attrs.colors = d.colors;
  attrs.opacities = d.opacities;
  attrs.scales = RowMatrix<double>(d.scales);
  attrs.rotations = d.rotations;
  if (decoded != nullptr) *decoded = std::move(d);
  return finalize_bake(canonical, attrs);
}

// --- weights ----------------------------------------------------------------

namespace {

class Init {
 public:
  explicit Init(std::uint64_t seed) : rng_(seed) {}

  Linear linear(int in, int out) {
    Linear l;
    std::normal_distribution<double> n(0.0, 1.0 / std::sqrt(double(in)));
    l.weight = Matrix<double>::NullaryExpr(out, in, [&] { return n(rng_); });
    l.bias = Vector<double>::Zero(out);
    return l;
  }

  static LayerNorm norm(int width) { return {Vector<double>::Ones(width), Vector<double>::Zero(width)}; }

  MultiHeadAttention mha(int width, int context_width) {
    return {linear(width, width), linear(context_width, width), linear(context_width, width), linear(width, width)};
  }

  AttnBlock block(int width, int ffn, int context_width) {
    AttnBlock b;
    b.self_norm = norm(width);
    b.self_attn = mha(width, width);
    b.cross_norm = norm(width);
    b.context_norm = norm(context_width);
    b.cross_attn = mha(width, context_width);
    b.ffn_norm = norm(width);
    b.ffn_in = linear(width, ffn);
    b.ffn_out = linear(ffn, width);
    return b;
  }

 private:
  std::mt19937_64 rng_;
};

void put_linear(Container& c, const std::string& name, const Linear& l) {
  c.add_matrix(name + ".w", l.weight);
  c.add_matrix(name + ".b", l.bias, {static_cast<std::uint64_t>(l.bias.size())});
}

void put_norm(Container& c, const std::string& name, const LayerNorm& n) {
  c.add_matrix(name + ".g", n.gamma, {static_cast<std::uint64_t>(n.gamma.size())});
  c.add_matrix(name + ".b", n.beta, {static_cast<std::uint64_t>(n.beta.size())});
}

void put_block(Container& c, const std::string& p, const AttnBlock& b) {
  put_norm(c, p + ".sn", b.self_norm);
  put_linear(c, p + ".sq", b.self_attn.q);
  put_linear(c, p + ".sk", b.self_attn.k);
  put_linear(c, p + ".sv", b.self_attn.v);
  put_linear(c, p + ".so", b.self_attn.o);
  put_norm(c, p + ".cn", b.cross_norm);
  put_norm(c, p + ".xn", b.context_norm);
  put_linear(c, p + ".cq", b.cross_attn.q);
  put_linear(c, p + ".ck", b.cross_attn.k);
  put_linear(c, p + ".cv", b.cross_attn.v);
  put_linear(c, p + ".co", b.cross_attn.o);
  put_norm(c, p + ".fn", b.ffn_norm);
  put_linear(c, p + ".f1", b.ffn_in);
  put_linear(c, p + ".f2", b.ffn_out);
}

Linear get_linear(const Container& c, const std::string& name, Eigen::Index in, Eigen::Index out) {
  Linear l;
  l.weight = c.matrix<double>(name + ".w", out, in);
  l.bias = c.matrix<double>(name + ".b", out, 1);
  return l;
}

LayerNorm get_norm(const Container& c, const std::string& name, Eigen::Index width) {
  return {c.matrix<double>(name + ".g", width, 1), c.matrix<double>(name + ".b", width, 1)};
}

AttnBlock get_block(const Container& c, const std::string& p, int width, int ffn, int context_width) {
  AttnBlock b;
  b.self_norm = get_norm(c, p + ".sn", width);
  b.self_attn = {get_linear(c, p + ".sq", width, width), get_linear(c, p + ".sk", width, width),
                 get_linear(c, p + ".sv", width, width), get_linear(c, p + ".so", width, width)};
  b.cross_norm = get_norm(c, p + ".cn", width);
  b.context_norm = get_norm(c, p + ".xn", context_width);
  b.cross_attn = {get_linear(c, p + ".cq", width, width), get_linear(c, p + ".ck", context_width, width),
                  get_linear(c, p + ".cv", context_width, width), get_linear(c, p + ".co", width, width)};
  b.ffn_norm = get_norm(c, p + ".fn", width);
  b.ffn_in = get_linear(c, p + ".f1", width, ffn);
  b.ffn_out = get_linear(c, p + ".f2", ffn, width);
  return b;
}

}  // namespace

ReconstructorWeights ReconstructorWeights::random(const ReconstructorConfig& config, std::uint64_t seed) {
  config.validate();
  const auto& s = config.stack;
  Init init(seed);
  ReconstructorWeights w;
  w.config = config;
  w.query_in = init.linear(6 * s.pe_frequencies, s.width);
  w.query_out = init.linear(s.width, s.width);
  w.feature_proj = init.linear(config.feature_width, s.width);
  for (int l = 0; l < s.layers; ++l) w.blocks.push_back(init.block(s.width, s.ffn_width, s.width));
  w.final_norm = Init::norm(s.width);
  w.heads = {init.linear(s.width, 3), init.linear(s.width, 1), init.linear(s.width, 3), init.linear(s.width, 4),
             init.linear(s.width, 3)};
  w.heads.rotation.bias << 1, 0, 0, 0;
  w.patch_embed = init.linear(3 * config.patch_size * config.patch_size, config.feature_width);
  for (int l = 0; l < config.extractor_layers; ++l)
    w.extractor_blocks.push_back(init.block(config.feature_width, 2 * config.feature_width, config.feature_width));
  return w;
}

void ReconstructorWeights::zero_heads() {
  for (Linear* l : {&heads.color, &heads.opacity, &heads.scale, &heads.rotation, &heads.offset}) {
    l->weight.setZero();
    if (l != &heads.rotation) l->bias.setZero();
  }
}

void ReconstructorWeights::save(const std::filesystem::path& path) const {
  Container c("GWTS");
  const auto& s = config.stack;
  const std::vector<std::int32_t> ints{s.layers, s.heads, s.width, s.ffn_width, s.pe_frequencies,
                                       config.feature_width, config.patch_size, config.extractor_layers};
  c.add<std::int32_t>("config.i", {ints.size()}, ints);
  const std::vector<double> reals{config.offset_max, config.scale_max, config.scale_min_ratio};
  c.add<double>("config.f", {reals.size()}, reals);
  put_linear(c, "query.in", query_in);
  put_linear(c, "query.out", query_out);
  put_linear(c, "feature_proj", feature_proj);
  for (std::size_t l = 0; l < blocks.size(); ++l) put_block(c, "blk" + std::to_string(l), blocks[l]);
  put_norm(c, "final_norm", final_norm);
  put_linear(c, "head.color", heads.color);
  put_linear(c, "head.opacity", heads.opacity);
  put_linear(c, "head.scale", heads.scale);
  put_linear(c, "head.rotation", heads.rotation);
  put_linear(c, "head.offset", heads.offset);
  put_linear(c, "patch_embed", patch_embed);
  for (std::size_t l = 0; l < extractor_blocks.size(); ++l) put_block(c, "ext" + std::to_string(l), extractor_blocks[l]);
  c.write(path);
}

ReconstructorWeights ReconstructorWeights::load(const std::filesystem::path& path) {
  const Container c = Container::read(path, "GWTS");
  const auto ints = c.values<std::int32_t>("config.i");
  const auto reals = c.values<double>("config.f");
  if (ints.size() != 8 || reals.size() != 3) throw FormatError(FormatError::Kind::BadShape, "config.i", "bad config");
  ReconstructorWeights w;
  auto& cfg = w.config;
  cfg.stack = {ints[0], ints[1], ints[2], ints[3], ints[4]};
  cfg.feature_width = ints[5];
  cfg.patch_size = ints[6];
  cfg.extractor_layers = ints[7];
  cfg.offset_max = reals[0];
  cfg.scale_max = reals[1];
  cfg.scale_min_ratio = reals[2];
  cfg.validate();
  const auto& s = cfg.stack;
  w.query_in = get_linear(c, "query.in", 6 * s.pe_frequencies, s.width);
  w.query_out = get_linear(c, "query.out", s.width, s.width);
  w.feature_proj = get_linear(c, "feature_proj", cfg.feature_width, s.width);
  for (int l = 0; l < s.layers; ++l) w.blocks.push_back(get_block(c, "blk" + std::to_string(l), s.width, s.ffn_width, s.width));
  w.final_norm = get_norm(c, "final_norm", s.width);
  w.heads = {get_linear(c, "head.color", s.width, 3), get_linear(c, "head.opacity", s.width, 1),
             get_linear(c, "head.scale", s.width, 3), get_linear(c, "head.rotation", s.width, 4),
             get_linear(c, "head.offset", s.width, 3)};
  w.patch_embed = get_linear(c, "patch_embed", 3 * cfg.patch_size * cfg.patch_size, cfg.feature_width);
  for (int l = 0; l < cfg.extractor_layers; ++l)
    w.extractor_blocks.push_back(
        get_block(c, "ext" + std::to_string(l), cfg.feature_width, 2 * cfg.feature_width, cfg.feature_width));
  return w;
}

ImageFeatureGrid load_feature_grid(const std::filesystem::path& path) {
  const Container c = Container::read(path, "GFEA");
  const Section& s = c.get("features");
  if (s.shape.size() != 3) throw FormatError(FormatError::Kind::BadShape, "features", "expected [H_f, W_f, D]");
  ImageFeatureGrid g;
  g.grid_h = static_cast<int>(s.shape[0]);
  g.grid_w = static_cast<int>(s.shape[1]);
  g.features = c.matrix<double>("features", Eigen::Index(g.grid_h) * g.grid_w, static_cast<Eigen::Index>(s.shape[2]));
  const auto size = c.values<std::int32_t>("image_size");
  if (size.size() != 2) throw FormatError(FormatError::Kind::BadShape, "image_size", "expected 2 values");
  g.image_w = size[0];
  g.image_h = size[1];
  g.validate();
  return g;
}

void save_feature_grid(const ImageFeatureGrid& grid, const std::filesystem::path& path) {
  Container c("GFEA");
  c.add_matrix("features", grid.features,
               {static_cast<std::uint64_t>(grid.grid_h), static_cast<std::uint64_t>(grid.grid_w),
                static_cast<std::uint64_t>(grid.features.cols())});
  const std::vector<std::int32_t> size{grid.image_w, grid.image_h};
  c.add<std::int32_t>("image_size", {2}, size);
  c.write(path);
}

}  // namespace splatar
