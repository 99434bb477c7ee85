// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "splatar/camera.hpp"
#include "splatar/common.hpp"
#include "splatar/container.hpp"
#include "splatar/rig_model.hpp"
#include "splatar/subdivision.hpp"

namespace splatar {

inline constexpr char kAvatarMagic[] = "GAVA";

/// Baked canonical avatar: everything the per-frame path needs, stored in
/// 32-bit. Blendshape bases are [3M x n] row-major (row 3*k + c is coordinate
/// c of point k); rotations are unit quaternions (w, x, y, z).
struct CanonicalGaussianAvatar {
  Points<float> positions;
  Points<float> colors;
  Vector<float> opacities;
  Points<float> scales;
  Quaternions<float> rotations;
  RowMatrix<float> expr_basis;
  RowMatrix<float> pose_basis;
  RowMatrix<float> skinning_weights;  // [M x J]
  Points<float> joints;               // [J x 3]
  std::vector<int> parents;

  Eigen::Index point_count() const { return positions.rows(); }
  Eigen::Index joint_count() const { return static_cast<Eigen::Index>(parents.size()); }
  Eigen::Index expr_count() const { return expr_basis.cols(); }
  Eigen::Index posecorr_count() const { return pose_basis.cols(); }
};

struct ValidationFinding {
  std::string section;
  std::string message;
};

/// Every invariant of the avatar, one finding per violated (section, rule)
/// in a fixed section order. Empty means valid.
std::vector<ValidationFinding> validate(const CanonicalGaussianAvatar& avatar);

/// Optional per-point Gaussian attributes at the baked resolution; anything
/// absent gets a default (mid-gray or subdivided vertex colors, opacity 0.9,
/// isotropic scale of half the mean incident edge length, identity rotation,
/// zero offset). `scales` may have 1 column (isotropic, replicated) or 3.
/// `vertex_colors` is a rig-resolution channel subdivided with the mesh.
struct GaussianAttributes {
  std::optional<Points<double>> offsets;
  std::optional<Points<double>> colors;
  std::optional<Vector<double>> opacities;
  std::optional<RowMatrix<double>> scales;
  std::optional<Quaternions<double>> rotations;
  std::optional<Points<double>> vertex_colors;
};

/// Shaped, subdivided rig with its animation channels ("expr_basis",
/// "pose_basis", "skinning_weights", optionally "vertex_colors") and the joints
/// regressed at the rig's own resolution.
struct CanonicalMesh {
  AttributedMesh mesh;
  Points<double> joints;
  std::vector<int> parents;
};

CanonicalMesh prepare_canonical(const RigTemplate& rig, const Eigen::Ref<const Eigen::VectorXd>& beta,
                                int iterations, const std::optional<Points<double>>& vertex_colors = std::nullopt);

/// Adds offsets, fills attributes and freezes the result in 32-bit. Throws
/// ValidationError naming the channel whose row count is wrong.
CanonicalGaussianAvatar finalize_bake(const CanonicalMesh& canonical, const GaussianAttributes& attrs);

CanonicalGaussianAvatar bake(const RigTemplate& rig, const Eigen::Ref<const Eigen::VectorXd>& beta, int iterations,
                             const GaussianAttributes& attrs = {});

Container to_container(const CanonicalGaussianAvatar& avatar);
/// Shape-checks every section, then runs validate() unless `check` is false;
/// throws FormatError.
CanonicalGaussianAvatar from_container(const Container& c, bool check = true);

void save(const CanonicalGaussianAvatar& avatar, const std::filesystem::path& path);
CanonicalGaussianAvatar load(const std::filesystem::path& path, bool check = true);

/// Gaussian attribute file ("GATR" container, optional sections offsets,
/// colors, opacities, scales, rotations, vertex_colors; all f64).
GaussianAttributes load_attributes(const std::filesystem::path& path);
void save_attributes(const GaussianAttributes& attrs, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Driving stream: JSON Lines, one frame per line.

struct DrivingFrame {
  Vector<float> theta;
  Vector<float> phi;
  Camera camera;
};

class StreamError : public Error {
 public:
  StreamError(std::size_t line, const std::string& detail)
      : Error("driving stream line " + std::to_string(line) + ": " + detail), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Parses one line. Camera width/height are read if present, else left 0.
DrivingFrame parse_driving_frame(const std::string& line, std::size_t line_number = 1);
std::string format_driving_frame(const DrivingFrame& frame);

/// Reads every non-blank line; throws StreamError with the 1-based line number.
std::vector<DrivingFrame> read_driving_stream(std::istream& in);
std::vector<DrivingFrame> read_driving_stream(const std::filesystem::path& path);

}  // namespace splatar
