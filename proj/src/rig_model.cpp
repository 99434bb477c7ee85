// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

#include "splatar/rig_model.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

#include "splatar/container.hpp"

namespace splatar {

namespace {

constexpr double kRowSumTol = 1e-6;

[[noreturn]] void fail(const std::string& what) { throw ValidationError("rig: " + what); }

}  // namespace

void validate_rig(const RigTemplate& rig) {
  const Eigen::Index V = rig.vertex_count();
  const Eigen::Index J = rig.joint_count();
  if (V == 0) fail("no vertices");
  if (J == 0) fail("no joints");
  if (!rig.vertices.allFinite()) fail("non-finite vertex position");
  if (rig.faces.size() > 0 && (rig.faces.minCoeff() < 0 || rig.faces.maxCoeff() >= V))
    fail("face index out of range");
  for (const auto* basis : {&rig.shape_basis, &rig.expr_basis, &rig.pose_basis})
    if (basis->rows() != 3 * V) fail("blendshape basis must have 3V rows");
  if (rig.pose_basis.cols() != 9 * (J - 1)) fail("pose_basis must have 9(J-1) columns");
  if (rig.joint_regressor.rows() != J || rig.joint_regressor.cols() != V) fail("joint_regressor must be J x V");
  for (Eigen::Index j = 0; j < J; ++j) {
    double sum = 0;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(rig.joint_regressor, j); it; ++it)
      sum += it.value();
    if (std::abs(sum - 1.0) > kRowSumTol) fail("joint_regressor row " + std::to_string(j) + " does not sum to 1");
  }
  if (rig.skinning_weights.rows() != V || rig.skinning_weights.cols() != J) fail("skinning_weights must be V x J");
  if ((rig.skinning_weights.array() < 0).any()) fail("negative skinning weight");
  for (Eigen::Index v = 0; v < V; ++v)
    if (std::abs(rig.skinning_weights.row(v).sum() - 1.0) > kRowSumTol)
      fail("skinning_weights row " + std::to_string(v) + " does not sum to 1");
  if (rig.parents[0] != -1) fail("joint 0 must be the root");
  for (Eigen::Index j = 1; j < J; ++j) {
    const int p = rig.parents[static_cast<std::size_t>(j)];
    if (p < 0 || p >= j) fail("parent of joint " + std::to_string(j) + " must precede it");
  }
}

void save_rig(const RigTemplate& rig, const std::filesystem::path& path) {
  Container c("GRIG");
  const auto V = static_cast<std::uint64_t>(rig.vertex_count());
  c.add_matrix("vertices", rig.vertices);
  c.add_matrix("faces", rig.faces);
  c.add_matrix("shape_basis", rig.shape_basis, {V, 3, static_cast<std::uint64_t>(rig.shape_count())});
  c.add_matrix("expr_basis", rig.expr_basis, {V, 3, static_cast<std::uint64_t>(rig.expr_count())});
  c.add_matrix("pose_basis", rig.pose_basis, {V, 3, static_cast<std::uint64_t>(rig.posecorr_count())});
  c.add_matrix("joint_regressor", Eigen::MatrixXd(rig.joint_regressor));
  c.add_matrix("skinning_weights", rig.skinning_weights);
  std::vector<std::int32_t> parents(rig.parents.begin(), rig.parents.end());
  c.add<std::int32_t>("parents", {parents.size()}, parents);
  c.write(path);
}

RigTemplate load_rig(const std::filesystem::path& path) {
  const Container c = Container::read(path, "GRIG");
  RigTemplate rig;
  rig.vertices = c.matrix<double>("vertices", -1, 3);
  const Eigen::Index V = rig.vertices.rows();
  rig.faces = c.matrix<std::int32_t>("faces", -1, 3);
  rig.shape_basis = c.matrix<double>("shape_basis", 3 * V, -1);
  rig.expr_basis = c.matrix<double>("expr_basis", 3 * V, -1);
  rig.pose_basis = c.matrix<double>("pose_basis", 3 * V, -1);
  const auto parents = c.values<std::int32_t>("parents");
  rig.parents.assign(parents.begin(), parents.end());
  const auto J = static_cast<Eigen::Index>(parents.size());
  rig.joint_regressor = Eigen::MatrixXd(c.matrix<double>("joint_regressor", J, V)).sparseView();
  rig.skinning_weights = c.matrix<double>("skinning_weights", V, J);
  validate_rig(rig);
  return rig;
}

namespace {

using nlohmann::json;

const json& require(const json& j, const char* key) {
  if (!j.contains(key)) throw ValidationError(std::string("rig json: missing key '") + key + "'");
  return j.at(key);
}

// Flattens nested arrays of numbers in row-major order, recording the shape.
void flatten(const json& j, std::vector<double>& out, std::vector<std::size_t>& shape, std::size_t depth) {
  if (j.is_array()) {
    if (shape.size() <= depth) shape.push_back(j.size());
    else if (shape[depth] != j.size()) throw ValidationError("rig json: ragged array");
    for (const auto& e : j) flatten(e, out, shape, depth + 1);
  } else if (j.is_number()) {
    out.push_back(j.get<double>());
  } else {
    throw ValidationError("rig json: non-numeric array element");
  }
}

RowMatrix<double> dense(const json& j, Eigen::Index rows, const char* key) {
  std::vector<double> flat;
  std::vector<std::size_t> shape;
  flatten(j, flat, shape, 0);
  if (rows <= 0 && !shape.empty()) rows = static_cast<Eigen::Index>(shape[0]);
  const auto n = static_cast<Eigen::Index>(flat.size());
  if (rows == 0 || n % rows != 0) throw ValidationError(std::string("rig json: bad shape for '") + key + "'");
  return Eigen::Map<const RowMatrix<double>>(flat.data(), rows, n / rows);
}

}  // namespace

RigTemplate load_rig_json(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open rig json: " + path.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("rig json: ") + e.what());
  }
  RigTemplate rig;
  rig.vertices = dense(require(j, "v_template"), -1, "v_template");
  const Eigen::Index V = rig.vertices.rows();
  if (rig.vertices.cols() != 3) throw ValidationError("rig json: v_template must be [V][3]");
  rig.faces = dense(require(j, "f"), -1, "f").cast<std::int32_t>();

  RowMatrix<double> shapedirs = dense(require(j, "shapedirs"), 3 * V, "shapedirs");
  if (j.contains("exprdirs")) {
    rig.shape_basis = std::move(shapedirs);
    rig.expr_basis = dense(j.at("exprdirs"), 3 * V, "exprdirs");
  } else {
    const auto n_shape = static_cast<Eigen::Index>(j.value("n_shape", shapedirs.cols()));
    if (n_shape > shapedirs.cols()) throw ValidationError("rig json: n_shape exceeds shapedirs width");
    rig.shape_basis = shapedirs.leftCols(n_shape);
    rig.expr_basis = shapedirs.rightCols(shapedirs.cols() - n_shape);
  }
  rig.pose_basis = dense(require(j, "posedirs"), 3 * V, "posedirs");
  const RowMatrix<double> regressor = dense(require(j, "J_regressor"), -1, "J_regressor");
  rig.joint_regressor = regressor.sparseView();
  rig.skinning_weights = dense(require(j, "weights"), V, "weights");
  if (j.contains("parents")) {
    rig.parents = j.at("parents").get<std::vector<int>>();
  } else {
    const auto kintree = require(j, "kintree_table").at(0).get<std::vector<long long>>();
    for (long long p : kintree) rig.parents.push_back(p < 0 || p > 1000000 ? -1 : static_cast<int>(p));
  }
  validate_rig(rig);
  return rig;
}

RigTemplate load_rig_any(const std::filesystem::path& path) {
  return path.extension() == ".json" ? load_rig_json(path) : load_rig(path);
}

}  // namespace splatar
