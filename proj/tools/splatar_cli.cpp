// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

// splatar: bake, render, benchmark and validate Gaussian head avatars.
// JSON goes to stdout, logs to stderr. Exit codes: 0 ok, 1 I/O, 2 validation.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "splatar/animator.hpp"
#include "splatar/avatar_asset.hpp"
#include "splatar/image.hpp"
#include "splatar/losses.hpp"
#include "splatar/rig_model.hpp"
#include "splatar/splat_renderer.hpp"
#include "splatar/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace splatar;

namespace {

constexpr int kExitIo = 1;
constexpr int kExitValidation = 2;
constexpr double kOracleTolerance = 1e-5;

using Clock = std::chrono::steady_clock;

struct Size {
  int width = 0, height = 0;
};

Size parse_size(const std::string& text) {
  Size s;
  char x = 0;
  std::istringstream in(text);
  if (!(in >> s.width >> x >> s.height) || (x != 'x' && x != 'X') || !in.eof() || s.width <= 0 || s.height <= 0)
    throw UsageError("size must look like WxH with positive integers, got '" + text + "'");
  return s;
}

std::unique_ptr<ThreadPool> make_pool(int threads) {
  if (threads < 1) throw UsageError("--threads must be >= 1");
  return threads > 1 ? std::make_unique<ThreadPool>(threads) : nullptr;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Resolution override; intrinsics scale with it when the frame carries its own size.
Camera with_size(Camera cam, std::optional<Size> size) {
  if (!size) {
    if (cam.width <= 0 || cam.height <= 0) cam.width = cam.height = 256;
    return cam;
  }
  if (cam.width > 0 && cam.height > 0) {
    const double sx = double(size->width) / cam.width, sy = double(size->height) / cam.height;
    cam.fx *= sx;
    cam.cx *= sx;
    cam.fy *= sy;
    cam.cy *= sy;
  }
  cam.width = size->width;
  cam.height = size->height;
  return cam;
}

json section_sizes(const Container& c) {
  json j = json::object();
  for (const auto& s : c.sections()) j[s.name] = {{"shape", s.shape}, {"bytes", s.bytes.size()}, {"dtype", dtype_name(s.dtype)}};
  return j;
}

Eigen::VectorXd read_beta(const std::optional<fs::path>& path, Eigen::Index n) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(n);
  if (!path) return beta;
  std::ifstream f(*path);
  if (!f) throw IoError("cannot open beta file: " + path->string());
  std::vector<double> v;
  try {
    v = json::parse(f).get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("beta file: ") + e.what());
  }
  if (static_cast<Eigen::Index>(v.size()) > n)
    throw ValidationError("beta has " + std::to_string(v.size()) + " values, rig has " + std::to_string(n) +
                          " shape coefficients");
  for (std::size_t i = 0; i < v.size(); ++i) beta(static_cast<Eigen::Index>(i)) = v[i];
  return beta;
}

void emit(const json& j) { std::cout << j.dump(2) << std::endl; }

// --- subcommands ------------------------------------------------------------

struct BakeArgs {
  fs::path rig, output;
  std::optional<fs::path> beta, attrs;
  int iterations = 2;
};

int cmd_bake(const BakeArgs& a) {
  if (a.iterations < 0) throw UsageError("--iterations must be >= 0");
  const RigTemplate rig = load_rig_any(a.rig);
  validate_rig(rig);
  const Eigen::VectorXd beta = read_beta(a.beta, rig.shape_count());
  const GaussianAttributes attrs = a.attrs ? load_attributes(*a.attrs) : GaussianAttributes{};
  std::cerr << "baking " << rig.vertex_count() << " vertices, " << a.iterations << " subdivision iteration(s)\n";
  const auto avatar = bake(rig, beta, a.iterations, attrs);
  const Container c = to_container(avatar);
  c.write(a.output);
  emit({{"points", avatar.point_count()},
        {"joints", avatar.joint_count()},
        {"expr", avatar.expr_count()},
        {"posecorr", avatar.posecorr_count()},
        {"output", a.output.string()},
        {"sections", section_sizes(c)}});
  return 0;
}

struct RenderArgs {
  fs::path asset, stream, output;
  std::optional<std::string> size;
  bool oracle = false;
  bool ppm = false;
  int threads = 1;
};

int cmd_render(const RenderArgs& a) {
  const std::optional<Size> size = a.size ? std::optional<Size>(parse_size(*a.size)) : std::nullopt;
  const auto avatar = load(a.asset);
  std::ifstream in(a.stream);
  if (!in) throw IoError("cannot open driving stream: " + a.stream.string());
  fs::create_directories(a.output);
  auto pool = make_pool(a.threads);
  SplatRenderer<float> renderer(pool.get());
  RenderTarget<float> target, check;
  double worst = 0;
  std::size_t mismatches = 0;
  json files = json::array();
  const auto stats = animate_sequence(
      avatar, in,
      [&](std::size_t i, const DrivingFrame& frame, const PosedGaussianSet& posed) {
        const Camera cam = with_size(frame.camera, size);
        renderer.render(posed.view(), cam, target);
        char name[64];
        std::snprintf(name, sizeof(name), "frame_%05zu", i);
        const std::string ext = a.ppm ? ".ppm" : ".png";
        const fs::path rgb = a.output / (std::string(name) + ext);
        const fs::path mask = a.output / (std::string(name) + "_alpha" + (a.ppm ? ".pgm" : ".png"));
        if (a.ppm) {
          write_pnm(target.rgb, rgb);
          write_pnm(target.alpha, mask);
        } else {
          write_png(target.rgb, rgb);
          write_png(target.alpha, mask);
        }
        files.push_back(rgb.filename().string());
        if (a.oracle) {
          render_oracle(posed.view(), cam, check);
          const double diff = std::max((target.rgb.data - check.rgb.data).abs().maxCoeff(),
                                       (target.alpha.data - check.alpha.data).abs().maxCoeff());
          worst = std::max(worst, diff);
          if (!(diff <= kOracleTolerance)) {
            ++mismatches;
            std::cerr << "frame " << i << ": tiled render differs from oracle by " << diff << "\n";
          }
        }
      },
      pool.get());
  json out = {{"frames", stats.frames}, {"output_dir", a.output.string()}, {"files", files},
              {"animate_mean_ms", stats.mean_ms}};
  if (a.oracle) out["oracle"] = {{"max_abs_diff", worst}, {"mismatched_frames", mismatches}};
  emit(out);
  return mismatches == 0 ? 0 : kExitValidation;
}

struct BenchArgs {
  fs::path asset;
  std::optional<fs::path> stream;
  int frames = 100;
  int threads = 1;
  std::string size = "256x256";
  std::uint64_t seed = 0;
};

int cmd_bench(const BenchArgs& a) {
  if (a.frames < 1) throw UsageError("frames must be >= 1");
  const Size size = parse_size(a.size);
  const auto avatar = load(a.asset);
  std::vector<DrivingFrame> frames;
  if (a.stream) {
    frames = read_driving_stream(*a.stream);
    if (frames.empty()) throw ValidationError("driving stream is empty");
  } else {
    frames = random_stream(avatar, static_cast<std::size_t>(a.frames), front_camera(size.width, size.height, 0.5), 0.2,
                           1.0, a.seed);
  }
  auto frame = [&](int i) -> const DrivingFrame& { return frames[static_cast<std::size_t>(i) % frames.size()]; };
  auto pool = make_pool(a.threads);
  PosedGaussianSet posed(avatar);
  SplatRenderer<float> renderer(pool.get());
  RenderTarget<float> target;
  const Camera cam0 = with_size(frame(0).camera, size);

  // Warm-up: touches every buffer once.
  animate(avatar, frame(0).theta, frame(0).phi, posed, pool.get());
  renderer.render(posed.view(), cam0, target);

  auto t0 = Clock::now();
  for (int i = 0; i < a.frames; ++i) animate(avatar, frame(i).theta, frame(i).phi, posed, pool.get());
  const double animate_s = seconds_since(t0);

  animate(avatar, frame(0).theta, frame(0).phi, posed, pool.get());
  t0 = Clock::now();
  for (int i = 0; i < a.frames; ++i) renderer.render(posed.view(), with_size(frame(i).camera, size), target);
  const double render_s = seconds_since(t0);

  t0 = Clock::now();
  for (int i = 0; i < a.frames; ++i) {
    animate(avatar, frame(i).theta, frame(i).phi, posed, pool.get());
    renderer.render(posed.view(), with_size(frame(i).camera, size), target);
  }
  const double e2e_s = seconds_since(t0);

  emit({{"points", avatar.point_count()},
        {"frames", a.frames},
        {"threads", a.threads},
        {"width", size.width},
        {"height", size.height},
        {"animate_fps", a.frames / animate_s},
        {"render_fps", a.frames / render_s},
        {"end_to_end_fps", a.frames / e2e_s},
        {"animate_seconds", animate_s},
        {"render_seconds", render_s},
        {"end_to_end_seconds", e2e_s}});
  return 0;
}

int cmd_validate(const fs::path& asset) {
  json findings = json::array();
  try {
    const auto avatar = load(asset, /*check=*/false);
    for (const auto& f : validate(avatar)) findings.push_back({{"section", f.section}, {"message", f.message}});
  } catch (const FormatError& e) {
    findings.push_back({{"section", e.section()}, {"message", e.what()}, {"kind", to_string(e.kind())}});
  }
  emit({{"valid", findings.empty()}, {"findings", findings}});
  return findings.empty() ? 0 : kExitValidation;
}

struct SynthRigArgs {
  fs::path output;
  SyntheticRigOptions options;
  std::uint64_t seed = 0;
};

int cmd_synth_rig(const SynthRigArgs& a) {
  const RigTemplate rig = synthetic_rig(a.options, a.seed);
  save_rig(rig, a.output);
  emit({{"vertices", rig.vertex_count()},
        {"faces", rig.faces.rows()},
        {"edges", unique_edges(rig.faces).size()},
        {"joints", rig.joint_count()},
        {"shape", rig.shape_count()},
        {"expr", rig.expr_count()},
        {"output", a.output.string()}});
  return 0;
}

struct SynthAssetArgs {
  fs::path output;
  long long points = 81424;
  int joints = 5;
  int expr = 100;
  std::uint64_t seed = 0;
};

int cmd_synth_asset(const SynthAssetArgs& a) {
  const auto avatar = random_avatar(a.points, a.joints, a.expr, a.seed);
  save(avatar, a.output);
  emit({{"points", avatar.point_count()}, {"joints", avatar.joint_count()}, {"expr", avatar.expr_count()},
        {"output", a.output.string()}});
  return 0;
}

struct SynthStreamArgs {
  fs::path asset, output;
  int frames = 10;
  std::string size = "256x256";
  double distance = 0.5;
  double pose_sigma = 0.2;
  double expr_sigma = 1.0;
  std::uint64_t seed = 0;
};

int cmd_synth_stream(const SynthStreamArgs& a) {
  if (a.frames < 0) throw UsageError("frames must be >= 0");
  const Size size = parse_size(a.size);
  const auto avatar = load(a.asset);
  const auto frames = random_stream(avatar, static_cast<std::size_t>(a.frames),
                                    front_camera(size.width, size.height, a.distance), a.pose_sigma, a.expr_sigma, a.seed);
  std::ofstream f(a.output);
  if (!f) throw IoError("cannot write " + a.output.string());
  for (const auto& fr : frames) f << format_driving_frame(fr) << "\n";
  emit({{"frames", frames.size()}, {"output", a.output.string()}});
  return 0;
}

int cmd_metrics(const fs::path& a, const fs::path& b) {
  const Image<float> x = read_image(a), y = read_image(b);
  json out = {{"psnr", psnr(x, y)}, {"l1", l1_loss(x, y)}};
  if (x.width >= 11 && x.height >= 11) out["ssim"] = ssim(x, y);
  emit(out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rigged Gaussian head avatars: bake, render, benchmark, validate"};
  app.require_subcommand(1);
  const int default_threads = default_thread_count();

  BakeArgs bake_args;
  auto* bake_cmd = app.add_subcommand("bake", "Bake a canonical avatar asset from a rig");
  bake_cmd->add_option("--rig", bake_args.rig, "Rig file (.json dump or binary rig)")->required();
  bake_cmd->add_option("--beta", bake_args.beta, "JSON array of shape coefficients");
  bake_cmd->add_option("--iterations,-n", bake_args.iterations, "Subdivision iterations")->capture_default_str();
  bake_cmd->add_option("--attrs", bake_args.attrs, "Attribute container (offsets, colors, ...)");
  bake_cmd->add_option("-o,--output", bake_args.output, "Output asset")->required();

  RenderArgs render_args;
  render_args.threads = default_threads;
  auto* render_cmd = app.add_subcommand("render", "Animate and render a driving stream to images");
  render_cmd->add_option("asset", render_args.asset)->required();
  render_cmd->add_option("stream", render_args.stream, "Driving stream (JSON lines)")->required();
  render_cmd->add_option("-o,--output", render_args.output, "Output directory")->required();
  render_cmd->add_option("--size", render_args.size, "Resolution WxH");
  render_cmd->add_flag("--oracle", render_args.oracle, "Also check every frame against the reference compositor");
  render_cmd->add_flag("--ppm", render_args.ppm, "Write PPM/PGM instead of PNG");
  render_cmd->add_option("--threads,-t", render_args.threads)->capture_default_str();

  BenchArgs bench_args;
  bench_args.threads = default_threads;
  auto* bench_cmd = app.add_subcommand("bench", "Measure animate, render and end-to-end frame rates");
  bench_cmd->add_option("asset", bench_args.asset)->required();
  bench_cmd->add_option("--stream", bench_args.stream, "Driving stream; random frames when omitted");
  bench_cmd->add_option("--frames,-n", bench_args.frames)->capture_default_str();
  bench_cmd->add_option("--threads,-t", bench_args.threads)->capture_default_str();
  bench_cmd->add_option("--size", bench_args.size)->capture_default_str();
  bench_cmd->add_option("--seed", bench_args.seed)->capture_default_str();

  fs::path validate_asset;
  auto* validate_cmd = app.add_subcommand("validate", "Check an asset against its invariants");
  validate_cmd->add_option("asset", validate_asset)->required();

  SynthRigArgs rig_args;
  auto* rig_cmd = app.add_subcommand("synth-rig", "Write a random closed-mesh test rig");
  rig_cmd->add_option("-o,--output", rig_args.output)->required();
  rig_cmd->add_option("--rings", rig_args.options.rings)->capture_default_str();
  rig_cmd->add_option("--segments", rig_args.options.segments)->capture_default_str();
  rig_cmd->add_option("--joints", rig_args.options.joints)->capture_default_str();
  rig_cmd->add_option("--shape", rig_args.options.shape)->capture_default_str();
  rig_cmd->add_option("--expr", rig_args.options.expr)->capture_default_str();
  rig_cmd->add_option("--seed", rig_args.seed)->capture_default_str();

  SynthAssetArgs asset_args;
  auto* asset_cmd = app.add_subcommand("synth-asset", "Write a random valid asset");
  asset_cmd->add_option("-o,--output", asset_args.output)->required();
  asset_cmd->add_option("--points", asset_args.points)->capture_default_str();
  asset_cmd->add_option("--joints", asset_args.joints)->capture_default_str();
  asset_cmd->add_option("--expr", asset_args.expr)->capture_default_str();
  asset_cmd->add_option("--seed", asset_args.seed)->capture_default_str();

  SynthStreamArgs stream_args;
  auto* stream_cmd = app.add_subcommand("synth-stream", "Write a random driving stream for an asset");
  stream_cmd->add_option("asset", stream_args.asset)->required();
  stream_cmd->add_option("-o,--output", stream_args.output)->required();
  stream_cmd->add_option("--frames,-n", stream_args.frames)->capture_default_str();
  stream_cmd->add_option("--size", stream_args.size)->capture_default_str();
  stream_cmd->add_option("--distance", stream_args.distance)->capture_default_str();
  stream_cmd->add_option("--pose-sigma", stream_args.pose_sigma)->capture_default_str();
  stream_cmd->add_option("--expr-sigma", stream_args.expr_sigma)->capture_default_str();
  stream_cmd->add_option("--seed", stream_args.seed)->capture_default_str();

  fs::path metric_a, metric_b;
  auto* metrics_cmd = app.add_subcommand("metrics", "PSNR, SSIM and L1 between two images");
  metrics_cmd->add_option("a", metric_a)->required();
  metrics_cmd->add_option("b", metric_b)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*bake_cmd) return cmd_bake(bake_args);
    if (*render_cmd) return cmd_render(render_args);
    if (*bench_cmd) return cmd_bench(bench_args);
    if (*validate_cmd) return cmd_validate(validate_asset);
    if (*rig_cmd) return cmd_synth_rig(rig_args);
    if (*asset_cmd) return cmd_synth_asset(asset_args);
    if (*stream_cmd) return cmd_synth_stream(stream_args);
    if (*metrics_cmd) return cmd_metrics(metric_a, metric_b);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitValidation;
}
