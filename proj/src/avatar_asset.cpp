// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

#include "splatar/avatar_asset.hpp"

#include <cmath>

namespace splatar {

namespace {

constexpr double kQuatTol = 1e-6;
constexpr double kRowSumTol = 1e-6;
constexpr double kDefaultOpacity = 0.9;
constexpr double kDefaultGray = 0.5;
constexpr double kFallbackScale = 1e-3;

std::string count_msg(Eigen::Index bad, Eigen::Index first, const char* what) {
  return std::to_string(bad) + " " + what + " (first at index " + std::to_string(first) + ")";
}

// Counts rows failing `pred` and reports the first one.
template <typename Pred>
void check_rows(std::vector<ValidationFinding>& out, const char* section, Eigen::Index rows, Pred pred,
                const char* what) {
  Eigen::Index bad = 0, first = -1;
  for (Eigen::Index i = 0; i < rows; ++i)
    if (!pred(i)) {
      if (bad++ == 0) first = i;
    }
  if (bad > 0) out.push_back({section, count_msg(bad, first, what)});
}

}  // namespace

std::vector<ValidationFinding> validate(const CanonicalGaussianAvatar& a) {
  std::vector<ValidationFinding> out;
  const Eigen::Index M = a.point_count();
  const Eigen::Index J = a.joint_count();

  auto rows_ok = [&](const char* section, Eigen::Index rows, Eigen::Index expected) {
    if (rows == expected) return true;
    out.push_back({section, "has " + std::to_string(rows) + " rows, expected " + std::to_string(expected)});
    return false;
  };

  check_rows(out, "positions", M, [&](Eigen::Index i) { return a.positions.row(i).allFinite(); },
             "non-finite positions");

  if (rows_ok("colors", a.colors.rows(), M))
    check_rows(out, "colors", M,
               [&](Eigen::Index i) {
                 const auto c = a.colors.row(i).array();
                 return (c >= 0.f).all() && (c <= 1.f).all();
               },
               "colors outside [0,1]");

  if (rows_ok("opacities", a.opacities.size(), M))
    check_rows(out, "opacities", M, [&](Eigen::Index i) { return a.opacities(i) > 0.f && a.opacities(i) < 1.f; },
               "opacities outside (0,1)");

  if (rows_ok("scales", a.scales.rows(), M))
    check_rows(out, "scales", M,
               [&](Eigen::Index i) {
                 const auto s = a.scales.row(i).array();
                 return s.allFinite() && (s > 0.f).all();
               },
               "non-positive scales");

  if (rows_ok("rotations", a.rotations.rows(), M))
    check_rows(out, "rotations", M,
               [&](Eigen::Index i) {
                 return std::abs(a.rotations.row(i).cast<double>().norm() - 1.0) <= kQuatTol;
               },
               "non-unit quaternions");

  if (rows_ok("expr_basis", a.expr_basis.rows(), 3 * M) && !a.expr_basis.allFinite())
    out.push_back({"expr_basis", "non-finite entries"});

  if (rows_ok("pose_basis", a.pose_basis.rows(), 3 * M)) {
    if (J > 0 && a.pose_basis.cols() != 9 * (J - 1))
      out.push_back({"pose_basis", "has " + std::to_string(a.pose_basis.cols()) + " columns, expected 9(J-1) = " +
                                       std::to_string(9 * (J - 1))});
    else if (!a.pose_basis.allFinite())
      out.push_back({"pose_basis", "non-finite entries"});
  }

  if (rows_ok("skinning_weights", a.skinning_weights.rows(), M)) {
    if (a.skinning_weights.cols() != J) {
      out.push_back({"skinning_weights", "has " + std::to_string(a.skinning_weights.cols()) +
                                             " columns, expected one per joint (" + std::to_string(J) + ")"});
    } else {
      check_rows(out, "skinning_weights", M,
                 [&](Eigen::Index i) { return (a.skinning_weights.row(i).array() >= 0.f).all(); },
                 "rows with negative weights");
      check_rows(out, "skinning_weights", M,
                 [&](Eigen::Index i) {
                   return std::abs(a.skinning_weights.row(i).cast<double>().sum() - 1.0) <= kRowSumTol;
                 },
                 "rows not summing to 1");
    }
  }

  if (rows_ok("joints", a.joints.rows(), J) && !a.joints.allFinite())
    out.push_back({"joints", "non-finite joint positions"});

  if (J == 0) {
    out.push_back({"parents", "no joints"});
  } else {
    bool tree = a.parents[0] == -1;
    for (Eigen::Index j = 1; j < J; ++j) {
      const int p = a.parents[static_cast<std::size_t>(j)];
      tree = tree && p >= 0 && p < j;
    }
    if (!tree) out.push_back({"parents", "not a tree rooted at joint 0 with parents preceding children"});
  }
  return out;
}

CanonicalMesh prepare_canonical(const RigTemplate& rig, const Eigen::Ref<const Eigen::VectorXd>& beta, int iterations,
                                const std::optional<Points<double>>& vertex_colors) {
  const Eigen::Index V = rig.vertex_count();
  CanonicalMesh out;
  const Points<double> shaped = apply_shape(rig, beta);
  out.joints = regress_joints(rig, shaped);
  out.parents = rig.parents;

  AttributedMesh mesh;
  mesh.vertices = shaped;
  mesh.faces = rig.faces;
  mesh.channels.push_back(
      {"expr_basis", Eigen::Map<const RowMatrix<double>>(rig.expr_basis.data(), V, 3 * rig.expr_count()), false});
  mesh.channels.push_back(
      {"pose_basis", Eigen::Map<const RowMatrix<double>>(rig.pose_basis.data(), V, 3 * rig.posecorr_count()), false});
  mesh.channels.push_back({"skinning_weights", rig.skinning_weights, true});
  if (vertex_colors) {
    if (vertex_colors->rows() != V)
      throw ValidationError("bake: channel 'vertex_colors' has " + std::to_string(vertex_colors->rows()) +
                            " rows, rig has " + std::to_string(V) + " vertices");
    mesh.channels.push_back({"vertex_colors", *vertex_colors, false});
  }
  out.mesh = subdivide(std::move(mesh), iterations);
  return out;
}

namespace {

// 0.5 x mean length of the edges incident to each vertex.
Vector<double> default_scales(const AttributedMesh& mesh) {
  const Eigen::Index M = mesh.vertices.rows();
  Vector<double> total = Vector<double>::Zero(M);
  Vector<double> count = Vector<double>::Zero(M);
  double all = 0;
  std::size_t n = 0;
  for (const auto& [a, b] : unique_edges(mesh.faces)) {
    const double len = (mesh.vertices.row(a) - mesh.vertices.row(b)).norm();
    total(a) += len;
    total(b) += len;
    count(a) += 1;
    count(b) += 1;
    all += len;
    ++n;
  }
  const double global = n > 0 ? all / static_cast<double>(n) : 2 * kFallbackScale;
  Vector<double> s(M);
  for (Eigen::Index i = 0; i < M; ++i) {
    const double mean = count(i) > 0 ? total(i) / count(i) : global;
    s(i) = mean > 0 ? 0.5 * mean : kFallbackScale;
  }
  return s;
}

void check_channel_rows(const char* name, Eigen::Index rows, Eigen::Index expected) {
  if (rows != expected)
    throw ValidationError(std::string("bake: channel '") + name + "' has " + std::to_string(rows) +
                          " rows, expected " + std::to_string(expected) + " (post-subdivision point count)");
}

}  // namespace

CanonicalGaussianAvatar finalize_bake(const CanonicalMesh& canonical, const GaussianAttributes& attrs) {
  const AttributedMesh& mesh = canonical.mesh;
  const Eigen::Index M = mesh.vertices.rows();
  CanonicalGaussianAvatar a;

  Points<double> positions = mesh.vertices;
  if (attrs.offsets) {
    check_channel_rows("offsets", attrs.offsets->rows(), M);
    positions += *attrs.offsets;
  }
  a.positions = positions.cast<float>();

  if (attrs.colors) {
    check_channel_rows("colors", attrs.colors->rows(), M);
    a.colors = attrs.colors->cast<float>();
  } else if (const auto* vc = mesh.channel("vertex_colors")) {
    a.colors = vc->values.cast<float>();
  } else {
    a.colors = Points<float>::Constant(M, 3, static_cast<float>(kDefaultGray));
  }

  if (attrs.opacities) {
    check_channel_rows("opacities", attrs.opacities->size(), M);
    a.opacities = attrs.opacities->cast<float>();
  } else {
    a.opacities = Vector<float>::Constant(M, static_cast<float>(kDefaultOpacity));
  }

  if (attrs.scales) {
    check_channel_rows("scales", attrs.scales->rows(), M);
    if (attrs.scales->cols() == 1) {
      a.scales = attrs.scales->col(0).replicate(1, 3).cast<float>();
    } else if (attrs.scales->cols() == 3) {
      a.scales = attrs.scales->cast<float>();
    } else {
      throw ValidationError("bake: channel 'scales' must have 1 or 3 columns");
    }
  } else {
    a.scales = default_scales(mesh).replicate(1, 3).cast<float>();
  }

  if (attrs.rotations) {
    check_channel_rows("rotations", attrs.rotations->rows(), M);
    a.rotations = attrs.rotations->rowwise().normalized().cast<float>();
  } else {
    a.rotations = Quaternions<float>::Zero(M, 4);
    a.rotations.col(0).setOnes();
  }

  const auto& expr = mesh.channel("expr_basis")->values;
  const auto& pose = mesh.channel("pose_basis")->values;
  a.expr_basis = Eigen::Map<const RowMatrix<double>>(expr.data(), 3 * M, expr.cols() / 3).cast<float>();
  a.pose_basis = Eigen::Map<const RowMatrix<double>>(pose.data(), 3 * M, pose.cols() / 3).cast<float>();
  a.skinning_weights = mesh.channel("skinning_weights")->values.cast<float>();
  a.joints = canonical.joints.cast<float>();
  a.parents = canonical.parents;

  const auto findings = validate(a);
  if (!findings.empty())
    throw ValidationError("bake: invalid result in '" + findings.front().section + "': " + findings.front().message);
  return a;
}

CanonicalGaussianAvatar bake(const RigTemplate& rig, const Eigen::Ref<const Eigen::VectorXd>& beta, int iterations,
                             const GaussianAttributes& attrs) {
  return finalize_bake(prepare_canonical(rig, beta, iterations, attrs.vertex_colors), attrs);
}

Container to_container(const CanonicalGaussianAvatar& a) {
  const auto M = static_cast<std::uint64_t>(a.point_count());
  const auto J = static_cast<std::uint64_t>(a.joint_count());
  Container c(kAvatarMagic);
  c.add_matrix("positions", a.positions);
  c.add_matrix("colors", a.colors);
  c.add<float>("opacities", {M}, std::span<const float>(a.opacities.data(), M));
  c.add_matrix("scales", a.scales);
  c.add_matrix("rotations", a.rotations);
  c.add_matrix("expr_basis", a.expr_basis, {M, 3, static_cast<std::uint64_t>(a.expr_count())});
  c.add_matrix("pose_basis", a.pose_basis, {M, 3, static_cast<std::uint64_t>(a.posecorr_count())});
  c.add_matrix("skinning_weights", a.skinning_weights, {M, J});
  c.add_matrix("joints", a.joints, {J, 3});
  std::vector<std::int32_t> parents(a.parents.begin(), a.parents.end());
  c.add<std::int32_t>("parents", {J}, parents);
  return c;
}

namespace {

// Checks that a section's leading dimension is M (or J) and its trailing
// dimensions are as given (-1 = any).
void expect_shape(const Container& c, const char* name, std::uint64_t lead, std::vector<long long> trailing) {
  const Section& s = c.get(name);
  bool ok = s.shape.size() == trailing.size() + 1 && s.shape[0] == lead;
  for (std::size_t d = 0; ok && d < trailing.size(); ++d)
    ok = trailing[d] < 0 || s.shape[d + 1] == static_cast<std::uint64_t>(trailing[d]);
  if (!ok) throw FormatError(FormatError::Kind::BadShape, name, "unexpected section shape");
}

}  // namespace

CanonicalGaussianAvatar from_container(const Container& c, bool check) {
  const Section& pos = c.get("positions");
  if (pos.shape.size() != 2 || pos.shape[1] != 3)
    throw FormatError(FormatError::Kind::BadShape, "positions", "expected [M, 3]");
  const std::uint64_t M = pos.shape[0];
  const Section& par = c.get("parents");
  if (par.shape.size() != 1) throw FormatError(FormatError::Kind::BadShape, "parents", "expected [J]");
  const std::uint64_t J = par.shape[0];
  expect_shape(c, "colors", M, {3});
  expect_shape(c, "opacities", M, {});
  expect_shape(c, "scales", M, {3});
  expect_shape(c, "rotations", M, {4});
  expect_shape(c, "expr_basis", M, {3, -1});
  expect_shape(c, "pose_basis", M, {3, -1});
  expect_shape(c, "skinning_weights", M, {static_cast<long long>(J)});
  expect_shape(c, "joints", J, {3});

  const auto m = static_cast<Eigen::Index>(M);
  CanonicalGaussianAvatar a;
  a.positions = c.matrix<float>("positions", m, 3);
  a.colors = c.matrix<float>("colors", m, 3);
  a.opacities = c.matrix<float>("opacities", m, 1);
  a.scales = c.matrix<float>("scales", m, 3);
  a.rotations = c.matrix<float>("rotations", m, 4);
  a.expr_basis = c.matrix<float>("expr_basis", 3 * m, -1);
  a.pose_basis = c.matrix<float>("pose_basis", 3 * m, -1);
  a.skinning_weights = c.matrix<float>("skinning_weights", m, -1);
  a.joints = c.matrix<float>("joints", static_cast<Eigen::Index>(J), 3);
  const auto parents = c.values<std::int32_t>("parents");
  a.parents.assign(parents.begin(), parents.end());

  if (!check) return a;
  const auto findings = validate(a);
  if (!findings.empty())
    throw FormatError(FormatError::Kind::InvariantViolation, findings.front().section, findings.front().message);
  return a;
}

void save(const CanonicalGaussianAvatar& avatar, const std::filesystem::path& path) {
  to_container(avatar).write(path);
}

CanonicalGaussianAvatar load(const std::filesystem::path& path, bool check) {
  return from_container(Container::read(path, kAvatarMagic), check);
}

GaussianAttributes load_attributes(const std::filesystem::path& path) {
  const Container c = Container::read(path, "GATR");
  GaussianAttributes a;
  if (c.find("offsets")) a.offsets = c.matrix<double>("offsets", -1, 3);
  if (c.find("colors")) a.colors = c.matrix<double>("colors", -1, 3);
  if (c.find("opacities")) a.opacities = c.matrix<double>("opacities", -1, 1);
  if (c.find("scales")) a.scales = c.matrix<double>("scales");
  if (c.find("rotations")) a.rotations = c.matrix<double>("rotations", -1, 4);
  if (c.find("vertex_colors")) a.vertex_colors = c.matrix<double>("vertex_colors", -1, 3);
  return a;
}

void save_attributes(const GaussianAttributes& a, const std::filesystem::path& path) {
  Container c("GATR");
  if (a.offsets) c.add_matrix("offsets", *a.offsets);
  if (a.colors) c.add_matrix("colors", *a.colors);
  if (a.opacities) c.add_matrix("opacities", *a.opacities, {static_cast<std::uint64_t>(a.opacities->size())});
  if (a.scales) c.add_matrix("scales", *a.scales);
  if (a.rotations) c.add_matrix("rotations", *a.rotations);
  if (a.vertex_colors) c.add_matrix("vertex_colors", *a.vertex_colors);
  c.write(path);
}

}  // namespace splatar
