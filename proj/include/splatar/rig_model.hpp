// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/SparseCore>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "splatar/common.hpp"
#include "splatar/rotation.hpp"

namespace splatar {

/// FLAME-compatible rig in canonical head space (meters). Blendshape bases are
/// stored as [3V x n] row-major matrices; row 3*v + c holds coordinate c of
/// vertex v, column k the offset per unit of coefficient k.
struct RigTemplate {
  Points<double> vertices;
  Faces faces;
  RowMatrix<double> shape_basis;
  RowMatrix<double> expr_basis;
  RowMatrix<double> pose_basis;  // [3V x 9(J-1)]
  Eigen::SparseMatrix<double, Eigen::RowMajor> joint_regressor;  // [J x V]
  RowMatrix<double> skinning_weights;                            // [V x J]
  std::vector<int> parents;                                      // parents[0] == -1

  Eigen::Index vertex_count() const { return vertices.rows(); }
  Eigen::Index joint_count() const { return static_cast<Eigen::Index>(parents.size()); }
  Eigen::Index shape_count() const { return shape_basis.cols(); }
  Eigen::Index expr_count() const { return expr_basis.cols(); }
  Eigen::Index posecorr_count() const { return pose_basis.cols(); }
};

/// Throws ValidationError naming the first violated invariant.
void validate_rig(const RigTemplate& rig);

/// Binary rig container ("GRIG" magic, same section layout as avatar assets).
RigTemplate load_rig(const std::filesystem::path& path);
void save_rig(const RigTemplate& rig, const std::filesystem::path& path);

/// JSON interchange dump of FLAME-exported arrays. Keys: v_template [V][3],
/// f [F][3], shapedirs [V][3][n], exprdirs [V][3][n] (or shapedirs holding
/// both, split at "n_shape"), posedirs [V][3][P], J_regressor [J][V],
/// weights [V][J], parents [J] or kintree_table [2][J].
RigTemplate load_rig_json(const std::filesystem::path& path);

/// Rig from either format, chosen by extension (".json" or container).
RigTemplate load_rig_any(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Blendshape and skinning math. Everything below is a pure function template
// over the scalar type; baking runs it in double, the animator in float.

/// basis [3V x n] times coeffs [n], reshaped to [V x 3].
template <typename Scalar, typename DerivedB, typename DerivedC>
Points<Scalar> blend_offsets(const Eigen::MatrixBase<DerivedB>& basis,
                             const Eigen::MatrixBase<DerivedC>& coeffs) {
  if (basis.cols() != coeffs.size())
    throw InvalidParams("blendshape coefficient count " + std::to_string(coeffs.size()) +
                        " does not match basis width " + std::to_string(basis.cols()));
  if (basis.rows() % 3 != 0) throw InvalidParams("blendshape basis rows must be a multiple of 3");
  const Vector<Scalar> flat = (basis * coeffs).template cast<Scalar>();
  return Eigen::Map<const Points<Scalar>>(flat.data(), basis.rows() / 3, 3);
}

/// T + shape_basis * beta.
inline Points<double> apply_shape(const RigTemplate& rig, const Eigen::Ref<const Eigen::VectorXd>& beta) {
  return rig.vertices + blend_offsets<double>(rig.shape_basis, beta);
}

/// expr_basis * phi. Shares apply_shape's path.
inline Points<double> expression_offsets(const RigTemplate& rig, const Eigen::Ref<const Eigen::VectorXd>& phi) {
  return blend_offsets<double>(rig.expr_basis, phi);
}

inline Points<double> regress_joints(const RigTemplate& rig, const Eigen::Ref<const Points<double>>& shaped) {
  if (shaped.rows() != rig.vertex_count())
    throw InvalidParams("regress_joints: expected " + std::to_string(rig.vertex_count()) + " vertices, got " +
                        std::to_string(shaped.rows()));
  return rig.joint_regressor * shaped;
}

/// vec(R(theta_j) - I) for every non-root joint, row-major flattening;
/// writes 9(J-1) values into `out`.
template <typename Scalar, typename DerivedT>
void pose_feature(const Eigen::MatrixBase<DerivedT>& theta, Eigen::Index joints, Scalar* out) {
  for (Eigen::Index j = 1; j < joints; ++j) {
    const Mat3<Scalar> R = axis_angle_to_matrix(theta.template segment<3>(3 * j).template cast<Scalar>());
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) out[9 * (j - 1) + 3 * r + c] = R(r, c) - (r == c ? Scalar(1) : Scalar(0));
  }
}

template <typename Scalar, typename DerivedB, typename DerivedT>
Points<Scalar> pose_correctives(const Eigen::MatrixBase<DerivedB>& pose_basis,
                                const Eigen::MatrixBase<DerivedT>& theta) {
  if (theta.size() % 3 != 0) throw InvalidParams("pose vector length must be a multiple of 3");
  const Eigen::Index joints = theta.size() / 3;
  if (pose_basis.cols() != 9 * (joints - 1))
    throw InvalidParams("pose basis width " + std::to_string(pose_basis.cols()) + " does not match " +
                        std::to_string(joints) + " joints");
  Vector<Scalar> feature(pose_basis.cols());
  pose_feature<Scalar>(theta, joints, feature.data());
  return blend_offsets<Scalar>(pose_basis.template cast<Scalar>(), feature);
}

inline Points<double> pose_correctives(const RigTemplate& rig, const Eigen::Ref<const Eigen::VectorXd>& theta) {
  if (theta.size() != 3 * rig.joint_count())
    throw InvalidParams("pose vector length " + std::to_string(theta.size()) + ", expected " +
                        std::to_string(3 * rig.joint_count()));
  return pose_correctives<double>(rig.pose_basis, theta);
}

/// Per-joint skinning transforms A_j = [R_j | t_j] mapping rest-space points
/// to posed space: world rotations composed down the parent chain, with the
/// translation chosen so that joint j's rest position follows its own chain.
/// Requires parents[j] < j. Writes into `out` (size J); no allocation.
template <typename Scalar, typename DerivedJ, typename DerivedT>
void skinning_transforms(const Eigen::MatrixBase<DerivedJ>& joints, const Eigen::MatrixBase<DerivedT>& theta,
                         std::span<const int> parents, std::span<Mat34<Scalar>> out) {
  const auto J = parents.size();
  for (std::size_t j = 0; j < J; ++j) {
    const Mat3<Scalar> local = axis_angle_to_matrix(theta.template segment<3>(3 * j).template cast<Scalar>());
    const Vec3<Scalar> rest = joints.row(j).transpose().template cast<Scalar>();
    Mat3<Scalar> rot;
    Vec3<Scalar> origin;  // posed position of joint j
    if (parents[j] < 0) {
      rot = local;
      origin = rest;
    } else {
      const auto p = static_cast<std::size_t>(parents[j]);
      const Mat3<Scalar> parent_rot = out[p].template leftCols<3>();
      rot = parent_rot * local;
      origin = parent_rot * rest + out[p].col(3);
    }
    out[j].template leftCols<3>() = rot;
    out[j].col(3) = origin - rot * rest;
  }
}

/// v' = sum_j w[v, j] * A_j v.
template <typename Scalar, typename DerivedV, typename DerivedJ, typename DerivedT, typename DerivedW>
Points<Scalar> linear_blend_skin(const Eigen::MatrixBase<DerivedV>& vertices,
                                 const Eigen::MatrixBase<DerivedJ>& joints,
                                 const Eigen::MatrixBase<DerivedT>& theta,
                                 const Eigen::MatrixBase<DerivedW>& weights, std::span<const int> parents) {
  const auto J = static_cast<Eigen::Index>(parents.size());
  if (joints.rows() != J || theta.size() != 3 * J || weights.cols() != J || weights.rows() != vertices.rows())
    throw InvalidParams("linear_blend_skin: inconsistent joint/weight/vertex dimensions");
  std::vector<Mat34<Scalar>> transforms(static_cast<std::size_t>(J));
  skinning_transforms<Scalar>(joints, theta, parents, std::span<Mat34<Scalar>>(transforms));
  Points<Scalar> posed(vertices.rows(), 3);
  for (Eigen::Index v = 0; v < vertices.rows(); ++v) {
    Mat34<Scalar> blended = Mat34<Scalar>::Zero();
    for (Eigen::Index j = 0; j < J; ++j) blended += Scalar(weights(v, j)) * transforms[static_cast<std::size_t>(j)];
    const Vec3<Scalar> p = vertices.row(v).transpose().template cast<Scalar>();
    posed.row(v) = (blended.template leftCols<3>() * p + blended.col(3)).transpose();
  }
  return posed;
}

}  // namespace splatar
