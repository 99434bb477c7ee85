// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

// Runs every primary acceptance criterion once and prints one line each.
// Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "splatar/animator.hpp"
#include "splatar/avatar_asset.hpp"
#include "splatar/losses.hpp"
#include "splatar/reconstructor.hpp"
#include "splatar/rig_model.hpp"
#include "splatar/splat_renderer.hpp"
#include "splatar/subdivision.hpp"
#include "splatar/synthetic.hpp"
#include "test_util.hpp"

using namespace splatar;
using Clock = std::chrono::steady_clock;

namespace {

enum class Verdict { Pass, Fail, Skip };

struct Outcome {
  Verdict verdict = Verdict::Pass;
  std::string detail;
};

// Collects the first failure message; later checks keep running for the report.
struct Check {
  bool ok = true;
  std::string first;
  void expect(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      first = what;
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Outcome finish(const Check& c, const std::string& detail) {
  return {c.ok ? Verdict::Pass : Verdict::Fail, c.ok ? detail : c.first + "; " + detail};
}

Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n, double sigma) {
  std::normal_distribution<double> d(0, sigma);
  return Eigen::VectorXd::NullaryExpr(n, [&] { return d(rng); });
}

long euler(const AttributedMesh& m) {
  return long(m.vertices.rows()) - long(unique_edges(m.faces).size()) + long(m.faces.rows());
}

Outcome subdivision_combinatorics() {
  const auto t0 = Clock::now();
  Check c;
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> small(3, 12);
  std::uniform_real_distribution<double> radius(0.05, 1.0);
  for (int i = 0; i < 50; ++i) {
    const AttributedMesh m = i % 2 == 0 ? uv_sphere(small(rng), small(rng), radius(rng))
                                        : torus(small(rng), small(rng), 1.0, radius(rng) * 0.5);
    const long V = m.vertices.rows(), F = m.faces.rows(), E = long(unique_edges(m.faces).size());
    const AttributedMesh s = subdivide_once(m);
    const std::string tag = "mesh " + std::to_string(i);
    c.expect(s.vertices.rows() == V + E, tag + ": V' != V+E");
    c.expect(s.faces.rows() == 4 * F, tag + ": F' != 4F");
    c.expect(euler(s) == euler(m), tag + ": Euler characteristic changed");
  }
  const double dt = seconds_since(t0);
  c.expect(dt < 5.0, "runtime " + fmt("%.2f s", dt) + " >= 5 s");
  return finish(c, "50 meshes, " + fmt("%.3f s", dt));
}

Outcome flame_gated() {
  const char* path = std::getenv("SPLATAR_FLAME_JSON");
  if (path == nullptr || !std::filesystem::exists(path))
    return {Verdict::Skip, "set SPLATAR_FLAME_JSON to a FLAME template export to run"};
  const RigTemplate rig = load_rig_any(path);
  Check c;
  c.expect(rig.vertex_count() == 5023, "template has " + std::to_string(rig.vertex_count()) + " vertices, not 5023");
  AttributedMesh m{rig.vertices, rig.faces, {}};
  const AttributedMesh s = subdivide(std::move(m), 2);
  c.expect(s.vertices.rows() == 81424, "two iterations gave " + std::to_string(s.vertices.rows()) + " points");
  return finish(c, "M = " + std::to_string(s.vertices.rows()));
}

Outcome animation_identity() {
  const auto t0 = Clock::now();
  Check c;
  double worst_pos = 0, worst_dot = 1;
  for (const Eigen::Index M : {Eigen::Index(10), Eigen::Index(1000), Eigen::Index(25000), Eigen::Index(100000)}) {
    const auto a = random_avatar(M, 5, 20, 200 + std::uint64_t(M));
    PosedGaussianSet out(a);
    animate(a, Vector<float>::Zero(3 * a.joint_count()), Vector<float>::Zero(a.expr_count()), out);
    const double pos = (out.positions - a.positions).cwiseAbs().maxCoeff();
    const double dot = (out.rotations.cast<double>().array() * a.rotations.cast<double>().array())
                           .rowwise()
                           .sum()
                           .minCoeff();
    worst_pos = std::max(worst_pos, pos);
    worst_dot = std::min(worst_dot, dot);
    c.expect(pos <= 1e-6, "M=" + std::to_string(M) + " position error " + fmt("%.3g", pos));
    c.expect(dot > 1 - 1e-6, "M=" + std::to_string(M) + " quaternion dot " + fmt("%.9f", dot));
  }
  const double dt = seconds_since(t0);
  c.expect(dt < 10.0, "runtime " + fmt("%.2f s", dt) + " >= 10 s");
  return finish(c, "max |dx| " + fmt("%.3g", worst_pos) + ", min dot " + fmt("%.9f", worst_dot) + ", " +
                       fmt("%.3f s", dt));
}

Outcome lbs_correctness() {
  const auto t0 = Clock::now();
  Check c;
  std::mt19937_64 rng(301);
  std::uniform_int_distribution<int> joints(2, 6), rings(2, 5), segments(3, 8);
  double worst_pos = 0, worst_rot = 0;
  for (int trial = 0; trial < 100; ++trial) {
    SyntheticRigOptions o;
    o.joints = joints(rng);
    o.rings = rings(rng);
    o.segments = segments(rng);
    const RigTemplate rig = synthetic_rig(o, 3000 + std::uint64_t(trial));
    const auto a = bake(rig, random_vector(rng, rig.shape_count(), 1.0), trial % 3);
    const Vector<float> theta = random_vector(rng, 3 * a.joint_count(), 0.4).cast<float>();
    const Vector<float> phi = random_vector(rng, a.expr_count(), 1.0).cast<float>();
    PosedGaussianSet out(a);
    animate(a, theta, phi, out);
    const Eigen::VectorXd th = theta.cast<double>(), ph = phi.cast<double>();
    const double pos = (out.positions.cast<double>() - oracles::posed_positions(a, th, ph)).cwiseAbs().maxCoeff();
    const auto T = oracles::transforms(a, th);
    double rot = 0;
    for (Eigen::Index k = 0; k < a.point_count(); ++k) {
      const Eigen::Vector4d q = out.rotations.row(k).transpose().cast<double>();
      const Eigen::Vector4d e = oracles::posed_rotation(a, T, k);
      rot = std::max(rot, std::min((q - e).cwiseAbs().maxCoeff(), (q + e).cwiseAbs().maxCoeff()));
    }
    worst_pos = std::max(worst_pos, pos);
    worst_rot = std::max(worst_rot, rot);
    c.expect(pos <= 1e-5, "rig " + std::to_string(trial) + " position error " + fmt("%.3g", pos));
    c.expect(rot <= 1e-5, "rig " + std::to_string(trial) + " rotation error " + fmt("%.3g", rot));
  }
  const double dt = seconds_since(t0);
  c.expect(dt < 10.0, "runtime " + fmt("%.2f s", dt) + " >= 10 s");
  return finish(c, "100 rigs, max pos err " + fmt("%.3g", worst_pos) + ", max quat err " + fmt("%.3g", worst_rot) +
                       ", " + fmt("%.3f s", dt));
}

template <typename S>
bool same_bytes(const RenderTarget<S>& a, const RenderTarget<S>& b) {
  return a.rgb.data.size() == b.rgb.data.size() &&
         std::memcmp(a.rgb.data.data(), b.rgb.data.data(), sizeof(S) * std::size_t(a.rgb.data.size())) == 0 &&
         std::memcmp(a.alpha.data.data(), b.alpha.data.data(), sizeof(S) * std::size_t(a.alpha.data.size())) == 0;
}

template <typename S>
double max_diff(const RenderTarget<S>& a, const RenderTarget<S>& b) {
  return std::max((a.rgb.data - b.rgb.data).cwiseAbs().maxCoeff(), (a.alpha.data - b.alpha.data).cwiseAbs().maxCoeff());
}

template <typename S>
void raster_scene(const GaussianCloud<double>& scene, const Camera& cam, ThreadPool& pool8, Check& c, double& worst,
                  const std::string& tag) {
  const GaussianCloud<S> g = scene.cast<S>();
  RenderTarget<S> oracle, one, eight;
  render_oracle(g.view(), cam, oracle);
  render(g.view(), cam, one);
  render(g.view(), cam, eight, &pool8);
  const double d = double(max_diff(one, oracle));
  worst = std::max(worst, d);
  c.expect(d <= 1e-5, tag + " max channel error " + fmt("%.3g", d));
  c.expect(same_bytes(one, eight), tag + " 1 vs 8 threads differ");
  render(g.view(), cam, eight, &pool8);
  c.expect(same_bytes(one, eight), tag + " repeated 8-thread render differs");
}

Outcome rasterizer_oracle() {
  const auto t0 = Clock::now();
  Check c;
  ThreadPool pool8(8);
  std::mt19937_64 rng(401);
  std::uniform_int_distribution<int> count(1, 200);
  const Camera cam = front_camera(64, 64, 0.0, 1.0);
  double worst_d = 0, worst_f = 0;
  for (int i = 0; i < 100; ++i) {
    const GaussianCloud<double> scene = random_scene(count(rng), cam, 0.5, 4.0, 4000 + std::uint64_t(i));
    raster_scene<double>(scene, cam, pool8, c, worst_d, "scene " + std::to_string(i) + " (f64)");
    raster_scene<float>(scene, cam, pool8, c, worst_f, "scene " + std::to_string(i) + " (f32)");
  }
  const double dt = seconds_since(t0);
  c.expect(dt < 60.0, "runtime " + fmt("%.2f s", dt) + " >= 60 s");
  return finish(c, "100 scenes 64x64, max err f64 " + fmt("%.3g", worst_d) + " f32 " + fmt("%.3g", worst_f) +
                       ", threads 1/8 identical, " + fmt("%.3f s", dt));
}

Outcome gradient_checks() {
  const auto t0 = Clock::now();
  Check c;
  std::mt19937_64 rng(501);
  std::uniform_real_distribution<double> u(-1, 1);
  std::normal_distribution<double> n(0, 1e-3);
  const Camera cam = front_camera(24, 24, 0.0, 1.0);
  double worst_color = 0, worst_offset = 0;
  for (int s = 0; s < 20; ++s) {
    auto g = random_scene(12, cam, 0.5, 3.0, 5000 + std::uint64_t(s));
    Image<double> w(24, 24, 3);
    for (auto& v : w.data.reshaped()) v = u(rng);
    RenderTarget<double> t;
    ForwardRecord<double> rec;
    render(g.view(), cam, t, nullptr, &rec);
    const Points<double> grad = color_backward(rec, w);
    const double h = 1e-4;
    for (Eigen::Index k = 0; k < g.size(); ++k)
      for (int ch = 0; ch < 3; ++ch) {
        const double c0 = g.colors(k, ch);
        g.colors(k, ch) = c0 + h;
        render(g.view(), cam, t);
        const double lp = oracles::weighted_sum(t.rgb, w);
        g.colors(k, ch) = c0 - h;
        render(g.view(), cam, t);
        const double lm = oracles::weighted_sum(t.rgb, w);
        g.colors(k, ch) = c0;
        const double fd = (lp - lm) / (2 * h);
        const double rel = std::abs(fd - grad(k, ch)) / std::max({std::abs(fd), std::abs(grad(k, ch)), 1e-8});
        worst_color = std::max(worst_color, rel);
        c.expect(rel <= 1e-3, "scene " + std::to_string(s) + " color grad rel err " + fmt("%.3g", rel));
      }

    Points<double> o = Points<double>::NullaryExpr(16, 3, [&] { return n(rng); });
    const double eps = 1e-4;
    const Points<double> og = offset_reg_gradient<double>(o, eps);
    const double ho = 1e-9;
    for (Eigen::Index k = 0; k < o.rows(); ++k)
      for (int ch = 0; ch < 3; ++ch) {
        const double v = o(k, ch);
        o(k, ch) = v + ho;
        const double lp = offset_reg<double>(o, eps);
        o(k, ch) = v - ho;
        const double lm = offset_reg<double>(o, eps);
        o(k, ch) = v;
        const double fd = (lp - lm) / (2 * ho);
        const double rel = std::abs(fd - og(k, ch)) / std::max({std::abs(fd), std::abs(og(k, ch)), 1e-12});
        worst_offset = std::max(worst_offset, rel);
        c.expect(rel <= 1e-4, "scene " + std::to_string(s) + " offset grad rel err " + fmt("%.3g", rel));
      }
  }
  const double dt = seconds_since(t0);
  c.expect(dt < 60.0, "runtime " + fmt("%.2f s", dt) + " >= 60 s");
  return finish(c, "20 scenes, color rel " + fmt("%.3g", worst_color) + ", offset rel " + fmt("%.3g", worst_offset) +
                       ", " + fmt("%.3f s", dt));
}

bool rows_permuted(const auto& a, const auto& b, const std::vector<Eigen::Index>& perm) {
  for (Eigen::Index i = 0; i < b.rows(); ++i)
    if (b.row(i) != a.row(perm[std::size_t(i)])) return false;
  return true;
}

Outcome reconstructor_invariants() {
  const auto t0 = Clock::now();
  Check c;
  std::mt19937_64 rng(601);
  std::uniform_int_distribution<int> rings(2, 4), segments(3, 6), grid(1, 4);
  std::normal_distribution<double> feat(0, 2);
  double worst_sum = 0, worst_quat = 0;
  int non_equivariant = 0;
  for (int pass = 0; pass < 1000; ++pass) {
    const std::string tag = "pass " + std::to_string(pass);
    ReconstructorConfig cfg;
    cfg.stack.layers = 1 + pass % 2;
    const auto w = ReconstructorWeights::random(cfg, 6000 + std::uint64_t(pass));

    ImageFeatureGrid fg;
    fg.grid_h = grid(rng);
    fg.grid_w = grid(rng);
    fg.image_w = 16 * fg.grid_w;
    fg.image_h = 16 * fg.grid_h;
    fg.features = RowMatrix<double>::NullaryExpr(fg.grid_h * fg.grid_w, cfg.feature_width, [&] { return feat(rng); });

    SyntheticRigOptions o;
    o.rings = rings(rng);
    o.segments = segments(rng);
    o.joints = 3;
    const RigTemplate rig = synthetic_rig(o, 7000 + std::uint64_t(pass));
    const CanonicalMesh canonical = prepare_canonical(rig, Eigen::VectorXd::Zero(rig.shape_count()), 0);

    AttentionStats stats;
    DecodedAttributes d;
    const CanonicalGaussianAvatar avatar = reconstruct(fg, canonical, w, &stats, &d);
    worst_sum = std::max(worst_sum, stats.max_row_sum_error);
    c.expect(stats.rows > 0 && stats.max_row_sum_error <= 1e-6, tag + " softmax row sum error " +
                                                                    fmt("%.3g", stats.max_row_sum_error));
    c.expect((d.opacities.array() > 0).all() && (d.opacities.array() < 1).all(), tag + " opacity outside (0,1)");
    c.expect((d.scales.array() > 0).all(), tag + " non-positive scale");
    const double qerr = (d.rotations.rowwise().norm().array() - 1).abs().maxCoeff();
    worst_quat = std::max(worst_quat, qerr);
    c.expect(qerr <= 1e-6, tag + " quaternion norm error " + fmt("%.3g", qerr));
    const auto findings = validate(avatar);
    c.expect(findings.empty(), tag + " reconstruct output fails validate: " +
                                   (findings.empty() ? std::string() : findings.front().section));

    const Points<double>& pts = canonical.mesh.vertices;
    std::vector<Eigen::Index> perm(std::size_t(pts.rows()));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    Points<double> shuffled(pts.rows(), 3);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) shuffled.row(i) = pts.row(perm[std::size_t(i)]);
    const auto forward = [&](const Points<double>& p) {
      return decode_attributes(
          cross_attention_stack(point_queries(positional_encode(p, cfg.stack.pe_frequencies), w), fg, w), w);
    };
    const DecodedAttributes a = forward(pts), b = forward(shuffled);
    const bool equivariant = rows_permuted(a.colors, b.colors, perm) && rows_permuted(a.opacities, b.opacities, perm) &&
                             rows_permuted(a.scales, b.scales, perm) && rows_permuted(a.rotations, b.rotations, perm) &&
                             rows_permuted(a.offsets, b.offsets, perm);
    non_equivariant += equivariant ? 0 : 1;
    c.expect(equivariant, tag + " not permutation equivariant");
  }
  const double dt = seconds_since(t0);
  c.expect(dt < 60.0, "runtime " + fmt("%.2f s", dt) + " >= 60 s");
  return finish(c, "1000 passes, max row-sum err " + fmt("%.3g", worst_sum) + ", max |q|-1 " +
                       fmt("%.3g", worst_quat) + ", " + std::to_string(non_equivariant) +
                       " passes not bitwise equivariant, " + fmt("%.3f s", dt));
}

Outcome throughput() {
  Check c;
  const auto avatar = random_avatar(81424, 5, 100, 801);
  const Camera cam = front_camera(256, 256, 0.5);
  const auto frames = random_stream(avatar, 100, cam, 0.2, 1.0, 802);
  PosedGaussianSet posed(avatar);
  ThreadPool pool8(8);

  const auto animate_rate = [&](ThreadPool* pool) {
    animate(avatar, frames[0].theta, frames[0].phi, posed, pool);
    const auto t0 = Clock::now();
    for (const auto& f : frames) animate(avatar, f.theta, f.phi, posed, pool);
    return double(frames.size()) / seconds_since(t0);
  };
  const double single = animate_rate(nullptr);
  const double multi = animate_rate(&pool8);

  SplatRenderer<float> renderer(&pool8);
  RenderTarget<float> target(256, 256);
  animate(avatar, frames[0].theta, frames[0].phi, posed, &pool8);
  renderer.render(posed.view(), cam, target);
  const auto t0 = Clock::now();
  for (const auto& f : frames) {
    animate(avatar, f.theta, f.phi, posed, &pool8);
    renderer.render(posed.view(), f.camera, target);
  }
  const double e2e = double(frames.size()) / seconds_since(t0);

  c.expect(single >= 60, "animate 1 thread " + fmt("%.1f", single) + " steps/s < 60");
  c.expect(multi >= 240, "animate 8 threads " + fmt("%.1f", multi) + " steps/s < 240");
  c.expect(e2e >= 10, "end-to-end 8 threads " + fmt("%.1f", e2e) + " fps < 10");
  return finish(c, "M=81424, 100 frames, animate 1t " + fmt("%.1f", single) + "/s, 8t " + fmt("%.1f", multi) +
                       "/s, end-to-end 256x256 8t " + fmt("%.1f", e2e) + " fps, hardware threads " +
                       std::to_string(std::thread::hardware_concurrency()));
}

struct TableEntry {
  std::string name;
  std::uint64_t offset = 0, length = 0;
};

std::vector<TableEntry> section_table(const std::vector<char>& bytes) {
  std::uint32_t count;
  std::memcpy(&count, bytes.data() + 8, 4);
  std::vector<TableEntry> out(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const char* e = bytes.data() + kHeaderBytes + kEntryBytes * i;
    out[i].name.assign(e, strnlen(e, kSectionNameBytes));
    std::memcpy(&out[i].offset, e + 80, 8);
    std::memcpy(&out[i].length, e + 88, 8);
  }
  return out;
}

// Loads a corrupted file and returns the section named by the rejection, or "" when accepted.
std::string rejected_section(const std::vector<char>& bytes, const std::filesystem::path& path) {
  test_util::write_bytes(path, bytes);
  try {
    load(path);
  } catch (const FormatError& e) {
    return e.section();
  }
  return "";
}

Outcome serialization() {
  const auto t0 = Clock::now();
  Check c;
  std::mt19937_64 rng(901);
  std::uniform_int_distribution<int> points(1, 5000), joints(1, 6), expr(0, 30);
  const std::vector<std::pair<std::string, std::function<void(char*, std::uint64_t)>>> poison = {
      {"opacities", [](char* p, std::uint64_t) { const float v = 1.5f; std::memcpy(p, &v, 4); }},
      {"scales", [](char* p, std::uint64_t) { const float v = -0.01f; std::memcpy(p, &v, 4); }},
      {"rotations", [](char* p, std::uint64_t) { const float v = 2.0f; std::memcpy(p, &v, 4); }},
      {"colors", [](char* p, std::uint64_t) { const float v = std::nanf(""); std::memcpy(p, &v, 4); }},
      {"positions", [](char* p, std::uint64_t) { const float v = INFINITY; std::memcpy(p, &v, 4); }},
  };
  int corruptions = 0;
  for (int i = 0; i < 20; ++i) {
    const std::string tag = "asset " + std::to_string(i);
    const auto a = random_avatar(points(rng), joints(rng), expr(rng), 9000 + std::uint64_t(i));
    const auto p1 = test_util::temp_path("acc_" + std::to_string(i) + "_a.gava");
    const auto p2 = test_util::temp_path("acc_" + std::to_string(i) + "_b.gava");
    save(a, p1);
    save(load(p1), p2);
    const std::vector<char> bytes = test_util::read_bytes(p1);
    c.expect(bytes == test_util::read_bytes(p2), tag + " save-load-save not byte-equal");

    const auto table = section_table(bytes);
    const auto bad = test_util::temp_path("acc_bad.gava");
    std::uniform_int_distribution<std::size_t> pick(0, table.size() - 1);

    const TableEntry* cut = &table[pick(rng)];
    while (cut->length == 0) cut = &table[pick(rng)];
    std::vector<char> t(bytes.begin(), bytes.begin() + std::ptrdiff_t(cut->offset + cut->length / 2));
    c.expect(rejected_section(t, bad) == cut->name, tag + " truncation inside '" + cut->name + "' not attributed");

    const TableEntry& resized = table[pick(rng)];
    std::vector<char> r = bytes;
    const std::uint64_t len = resized.length + 4;
    std::memcpy(r.data() + kHeaderBytes + kEntryBytes * std::size_t(&resized - table.data()) + 88, &len, 8);
    c.expect(rejected_section(r, bad) == resized.name, tag + " length change in '" + resized.name + "' not attributed");

    const auto& [name, write] = poison[std::size_t(i) % poison.size()];
    const auto it = std::find_if(table.begin(), table.end(), [&](const TableEntry& e) { return e.name == name; });
    std::vector<char> v = bytes;
    write(v.data() + it->offset + 4 * std::uniform_int_distribution<std::uint64_t>(0, it->length / 4 - 1)(rng), 0);
    c.expect(rejected_section(v, bad) == name, tag + " invalid value in '" + name + "' not attributed");

    std::vector<char> m = bytes;
    m[0] = 'X';
    test_util::write_bytes(bad, m);
    try {
      load(bad);
      c.expect(false, tag + " bad magic accepted");
    } catch (const FormatError& e) {
      c.expect(e.kind() == FormatError::Kind::BadMagic, tag + " bad magic misreported");
    }
    corruptions += 4;
  }
  const double dt = seconds_since(t0);
  c.expect(dt < 10.0, "runtime " + fmt("%.2f s", dt) + " >= 10 s");
  return finish(c, "20 assets byte-equal, " + std::to_string(corruptions) + " corruptions attributed, " +
                       fmt("%.3f s", dt));
}

Outcome metrics_sanity() {
  Check c;
  std::mt19937_64 rng(1001);
  std::uniform_real_distribution<double> u(0, 1);
  Image<double> a(48, 40, 3);
  for (auto& v : a.data.reshaped()) v = u(rng);
  c.expect(psnr(a, a) == kPsnrCap, "PSNR(a, a) is not the cap");
  c.expect(psnr_from_mse(0.01) == 20.0, "PSNR at MSE 0.01 is " + fmt("%.17g", psnr_from_mse(0.01)));
  const double s = ssim(a, a);
  c.expect(std::abs(s - 1) <= 1e-9, "SSIM(a, a) = " + fmt("%.12f", s));
  return finish(c, "cap " + fmt("%.0f", kPsnrCap) + ", 20 dB at 0.01, SSIM " + fmt("%.12f", s));
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"subdivision-combinatorics", subdivision_combinatorics},
      {"flame-template-81424", flame_gated},
      {"animation-identity", animation_identity},
      {"lbs-correctness", lbs_correctness},
      {"rasterizer-oracle", rasterizer_oracle},
      {"gradient-checks", gradient_checks},
      {"reconstructor-invariants", reconstructor_invariants},
      {"throughput-floor", throughput},
      {"serialization", serialization},
      {"metrics-sanity", metrics_sanity},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {Verdict::Fail, std::string("exception: ") + e.what()};
    }
    const char* v = o.verdict == Verdict::Pass ? "PASS" : o.verdict == Verdict::Fail ? "FAIL" : "SKIP";
    if (o.verdict == Verdict::Fail) ++failed;
    std::printf("%s  %-26s %s\n", v, name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
