// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstring>
#include <random>

#include "splatar/splat_renderer.hpp"
#include "splatar/synthetic.hpp"
#include "oracles.hpp"

using namespace splatar;

namespace {

GaussianCloud<double> single(const Eigen::Vector3d& pos, double scale, double opacity, const Eigen::Vector3d& color) {
  GaussianCloud<double> g(1);
  g.positions.row(0) = pos.transpose();
  g.rotations.row(0) << 1, 0, 0, 0;
  g.scales.row(0).setConstant(scale);
  g.colors.row(0) = color.transpose();
  g.opacities(0) = opacity;
  return g;
}

Camera square_camera(int size) {
  Camera cam;
  cam.width = cam.height = size;
  cam.fx = cam.fy = size;
  cam.cx = cam.cy = size / 2;
  return cam;
}

template <typename S>
double max_diff(const RenderTarget<S>& a, const RenderTarget<S>& b) {
  return std::max((a.rgb.data - b.rgb.data).abs().maxCoeff(), (a.alpha.data - b.alpha.data).abs().maxCoeff());
}

template <typename S>
bool same_bytes(const RenderTarget<S>& a, const RenderTarget<S>& b) {
  return a.rgb.data.size() == b.rgb.data.size() &&
         std::memcmp(a.rgb.data.data(), b.rgb.data.data(), sizeof(S) * a.rgb.data.size()) == 0 &&
         std::memcmp(a.alpha.data.data(), b.alpha.data.data(), sizeof(S) * a.alpha.data.size()) == 0;
}

using oracles::weighted_sum;

}  // namespace

TEST(Project, OnAxisIsotropic) {
  const Camera cam = square_camera(64);
  const double d = 2.0, s = 0.05;
  const auto p = project<double>(Eigen::Vector3d(0, 0, d), Eigen::Vector4d(1, 0, 0, 0), Eigen::Vector3d::Constant(s), cam);
  ASSERT_TRUE(p);
  EXPECT_EQ(p->mean, Eigen::Vector2d(32, 32));
  const double expect = (cam.fx * s / d) * (cam.fx * s / d);
  EXPECT_NEAR(p->cov(0, 0), expect + kCovarianceLowPass, 1e-12);
  EXPECT_NEAR(p->cov(1, 1), expect + kCovarianceLowPass, 1e-12);
  EXPECT_NEAR(p->cov(0, 1), 0, 1e-12);
  EXPECT_EQ(p->depth, d);
}

TEST(Project, BehindCameraCulled) {
  const Camera cam = square_camera(64);
  EXPECT_FALSE(project<double>(Eigen::Vector3d(0, 0, -1), Eigen::Vector4d(1, 0, 0, 0), Eigen::Vector3d::Ones(), cam));
  EXPECT_FALSE(project<double>(Eigen::Vector3d(0, 0, 0), Eigen::Vector4d(1, 0, 0, 0), Eigen::Vector3d::Ones(), cam));
}

TEST(Project, OffAxisMatchesFiniteDifferenceJacobian) {
  // The projected covariance uses the perspective Jacobian at the mean; check
  // it against a numeric Jacobian of the pinhole map.
  Camera cam = square_camera(64);
  cam.world_to_camera.topLeftCorner<3, 3>() = axis_angle_to_matrix(Eigen::Vector3d(0.1, -0.2, 0.05));
  cam.world_to_camera.topRightCorner<3, 1>() = Eigen::Vector3d(0.1, 0.2, 2.0);
  const Eigen::Vector3d x(0.3, -0.2, 0.4);
  const Eigen::Vector4d q = Eigen::Vector4d(0.9, 0.1, -0.3, 0.2).normalized();
  const Eigen::Vector3d s(0.02, 0.05, 0.01);
  const auto p = project<double>(x, q, s, cam);
  ASSERT_TRUE(p);
  auto pix = [&](const Eigen::Vector3d& w) {
    const Eigen::Vector3d c = cam.rotation() * w + cam.translation();
    return Eigen::Vector2d(cam.fx * c.x() / c.z() + cam.cx, cam.fy * c.y() / c.z() + cam.cy);
  };
  Eigen::Matrix<double, 2, 3> Jn;
  for (int i = 0; i < 3; ++i) {
    Eigen::Vector3d h = Eigen::Vector3d::Zero();
    h(i) = 1e-6;
    Jn.col(i) = (pix(x + h) - pix(x - h)) / 2e-6;
  }
  const Eigen::Matrix2d expect = Jn * covariance_3d<double>(q, s) * Jn.transpose() +
                                 kCovarianceLowPass * Eigen::Matrix2d::Identity();
  EXPECT_LT((p->cov - expect).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((p->mean - pix(x)).norm(), 1e-12);
}

TEST(Covariance, AxisAlignedDiagonal) {
  const Eigen::Matrix3d c = covariance_3d<double>(Eigen::Vector4d(1, 0, 0, 0), Eigen::Vector3d(1, 2, 3));
  EXPECT_EQ(c, Eigen::Vector3d(1, 4, 9).asDiagonal().toDenseMatrix());
}

TEST(Render, SingleOnAxisGaussianCenterPixel) {
  const auto g = single({0, 0, 2}, 0.05, 0.8, {1, 1, 1});
  RenderTarget<double> t;
  render(g.view(), square_camera(64), t);
  for (int c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(t.rgb.at(32, 32, c), 0.8);
  EXPECT_DOUBLE_EQ(t.alpha.at(32, 32, 0), 0.8);
  // Float path as well.
  const auto gf = g.cast<float>();
  RenderTarget<float> tf;
  render(gf.view(), square_camera(64), tf);
  EXPECT_EQ(tf.alpha.at(32, 32, 0), 0.8f);
}

TEST(Render, EmptySceneIsBackground) {
  GaussianCloud<double> g(0);
  RenderTarget<double> t(64, 64), o;
  t.background = Eigen::Vector3d(0.1, 0.2, 0.3);
  o.background = t.background;
  render(g.view(), square_camera(64), t);
  render_oracle(g.view(), square_camera(64), o);
  for (int c = 0; c < 3; ++c) EXPECT_TRUE((t.rgb.data.col(c) == t.background(c)).all());
  EXPECT_TRUE((t.alpha.data == 0).all());
  EXPECT_TRUE(same_bytes(t, o));
}

TEST(Render, SingleGaussianEqualsOracleExactly) {
  const auto g = single({0.1, -0.05, 1.5}, 0.08, 0.6, {0.2, 0.7, 0.4});
  RenderTarget<double> t, o;
  render(g.view(), square_camera(64), t);
  render_oracle(g.view(), square_camera(64), o);
  EXPECT_TRUE(same_bytes(t, o));
}

TEST(Render, RandomScenesMatchOracle) {
  const Camera cam = square_camera(64);
  for (int seed = 0; seed < 20; ++seed) {
    const auto g = random_scene(50, cam, 0.5, 4.0, 1000 + seed);
    RenderTarget<double> t, o;
    render(g.view(), cam, t);
    render_oracle(g.view(), cam, o);
    EXPECT_LT(max_diff(t, o), 1e-5) << "seed " << seed;
    const auto gf = g.cast<float>();
    RenderTarget<float> tf, of;
    render(gf.view(), cam, tf);
    render_oracle(gf.view(), cam, of);
    EXPECT_LT(max_diff(tf, of), 1e-5) << "seed " << seed;
  }
}

TEST(Render, NonSquareAndPartialTiles) {
  Camera cam = square_camera(64);
  cam.width = 50;
  cam.height = 37;
  cam.cx = 25;
  cam.cy = 18;
  const auto g = random_scene(120, cam, 0.5, 3.0, 7);
  RenderTarget<double> t, o;
  render(g.view(), cam, t);
  render_oracle(g.view(), cam, o);
  EXPECT_LT(max_diff(t, o), 1e-5);
  EXPECT_EQ(t.width(), 50);
  EXPECT_EQ(t.height(), 37);
}

TEST(Render, ByteIdenticalAcrossThreadCounts) {
  const Camera cam = square_camera(64);
  const auto g = random_scene(200, cam, 0.5, 4.0, 99).cast<float>();
  RenderTarget<float> a, b, c;
  ThreadPool p2(2), p8(8);
  render(g.view(), cam, a);
  render(g.view(), cam, b, &p2);
  SplatRenderer<float> r(&p8);
  r.render(g.view(), cam, c);
  r.render(g.view(), cam, c);  // reused scratch
  EXPECT_TRUE(same_bytes(a, b));
  EXPECT_TRUE(same_bytes(a, c));
}

TEST(Render, EqualDepthTieBrokenByIndex) {
  auto g = single({0, 0, 2}, 0.05, 0.5, {1, 0, 0});
  GaussianCloud<double> two(2);
  for (int k = 0; k < 2; ++k) {
    two.positions.row(k) = g.positions.row(0);
    two.rotations.row(k) = g.rotations.row(0);
    two.scales.row(k) = g.scales.row(0);
    two.opacities(k) = 0.5;
  }
  two.colors.row(0) << 1, 0, 0;
  two.colors.row(1) << 0, 0, 1;
  RenderTarget<double> t;
  render(two.view(), square_camera(64), t);
  EXPECT_DOUBLE_EQ(t.rgb.at(32, 32, 0), 0.5);
  EXPECT_DOUBLE_EQ(t.rgb.at(32, 32, 2), 0.25);
}

TEST(ColorBackward, SingleGaussianCenterPixel) {
  const auto g = single({0, 0, 2}, 0.05, 0.8, {0.3, 0.3, 0.3});
  RenderTarget<double> t;
  ForwardRecord<double> rec;
  render(g.view(), square_camera(64), t, nullptr, &rec);
  Image<double> grad(64, 64, 3);
  grad.at(32, 32, 1) = 1;
  const Points<double> d = color_backward(rec, grad);
  EXPECT_DOUBLE_EQ(d(0, 1), 0.8);
  EXPECT_EQ(d(0, 0), 0.0);
}

TEST(ColorBackward, OccludedGaussianScaledByTransmittance) {
  GaussianCloud<double> g(2);
  g.positions.row(0) << 0, 0, 1;
  g.positions.row(1) << 0, 0, 3;
  g.rotations.rowwise() = Eigen::RowVector4d(1, 0, 0, 0);
  g.scales.row(0).setConstant(1.0);  // front covers the whole frame
  g.scales.row(1).setConstant(0.05);
  g.opacities << 0.995, 0.6;
  g.colors.setConstant(0.5);
  RenderTarget<double> t;
  ForwardRecord<double> rec;
  render(g.view(), square_camera(64), t, nullptr, &rec);
  Image<double> grad(64, 64, 3);
  grad.at(32, 32, 0) = 1;
  const Points<double> d = color_backward(rec, grad);
  EXPECT_DOUBLE_EQ(d(0, 0), 0.99);
  EXPECT_NEAR(d(1, 0), 0.01 * 0.6, 1e-12);
}

TEST(ColorBackward, MatchesCentralDifferences) {
  const Camera cam = square_camera(32);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int seed = 0; seed < 5; ++seed) {
    auto g = random_scene(30, cam, 0.5, 3.0, 500 + seed);
    Image<double> w(32, 32, 3);
    for (auto& v : w.data.reshaped()) v = u(rng);
    RenderTarget<double> t;
    ForwardRecord<double> rec;
    render(g.view(), cam, t, nullptr, &rec);
    const Points<double> grad = color_backward(rec, w);
    const double h = 1e-4;
    for (Eigen::Index k = 0; k < g.size(); ++k)
      for (int c = 0; c < 3; ++c) {
        const double c0 = g.colors(k, c);
        g.colors(k, c) = c0 + h;
        render(g.view(), cam, t);
        const double lp = weighted_sum(t.rgb, w);
        g.colors(k, c) = c0 - h;
        render(g.view(), cam, t);
        const double lm = weighted_sum(t.rgb, w);
        g.colors(k, c) = c0;
        const double fd = (lp - lm) / (2 * h);
        const double rel = std::abs(fd - grad(k, c)) / std::max({std::abs(fd), std::abs(grad(k, c)), 1e-8});
        EXPECT_LE(rel, 1e-3) << "k=" << k << " c=" << c << " fd=" << fd << " an=" << grad(k, c);
      }
  }
}

TEST(ColorBackward, RequiresRetainedRecord) {
  ForwardRecord<double> rec;
  EXPECT_THROW(color_backward(rec, Image<double>(4, 4, 3)), UsageError);
}

TEST(Render, InvalidCameraRejected) {
  GaussianCloud<double> g(0);
  RenderTarget<double> t;
  Camera cam = square_camera(16);
  cam.fx = 0;
  EXPECT_THROW(render(g.view(), cam, t), InvalidParams);
}
