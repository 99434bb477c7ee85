// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

#include "splatar/subdivision.hpp"

#include <algorithm>
#include <array>
#include <cstdint>

namespace splatar {

namespace {

using Edge = std::pair<std::int32_t, std::int32_t>;

Edge make_edge(std::int32_t a, std::int32_t b) { return a < b ? Edge{a, b} : Edge{b, a}; }

std::int32_t edge_index(const std::vector<Edge>& edges, std::int32_t a, std::int32_t b) {
  const Edge key = make_edge(a, b);
  const auto it = std::lower_bound(edges.begin(), edges.end(), key);
  return static_cast<std::int32_t>(it - edges.begin());
}

}  // namespace

const AttributeChannel* AttributedMesh::channel(const std::string& name) const {
  for (const auto& c : channels)
    if (c.name == name) return &c;
  return nullptr;
}

void validate_mesh(const AttributedMesh& mesh) {
  const auto V = mesh.vertices.rows();
  std::vector<std::array<std::int32_t, 3>> sorted_faces;
  sorted_faces.reserve(static_cast<std::size_t>(mesh.faces.rows()));
  for (Eigen::Index f = 0; f < mesh.faces.rows(); ++f) {
    std::array<std::int32_t, 3> tri{mesh.faces(f, 0), mesh.faces(f, 1), mesh.faces(f, 2)};
    for (auto idx : tri)
      if (idx < 0 || idx >= V) throw ValidationError("face " + std::to_string(f) + " references a missing vertex");
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
      throw ValidationError("degenerate face " + std::to_string(f) + " (repeated vertex index)");
    std::sort(tri.begin(), tri.end());
    sorted_faces.push_back(tri);
  }
  std::sort(sorted_faces.begin(), sorted_faces.end());
  if (std::adjacent_find(sorted_faces.begin(), sorted_faces.end()) != sorted_faces.end())
    throw ValidationError("duplicate face");
  for (const auto& c : mesh.channels)
    if (c.values.rows() != V)
      throw ValidationError("channel '" + c.name + "' has " + std::to_string(c.values.rows()) + " rows, mesh has " +
                            std::to_string(V) + " vertices");
}

std::vector<Edge> unique_edges(const Faces& faces) {
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(faces.rows()) * 3);
  for (Eigen::Index f = 0; f < faces.rows(); ++f)
    for (int k = 0; k < 3; ++k) edges.push_back(make_edge(faces(f, k), faces(f, (k + 1) % 3)));
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

AttributedMesh subdivide_once(const AttributedMesh& mesh) {
  validate_mesh(mesh);
  const auto V = mesh.vertices.rows();
  const auto F = mesh.faces.rows();
  const std::vector<Edge> edges = unique_edges(mesh.faces);
  const auto E = static_cast<Eigen::Index>(edges.size());

  AttributedMesh out;
  out.vertices.resize(V + E, 3);
  out.vertices.topRows(V) = mesh.vertices;
  for (Eigen::Index e = 0; e < E; ++e) {
    const auto [a, b] = edges[static_cast<std::size_t>(e)];
    out.vertices.row(V + e) = 0.5 * (mesh.vertices.row(a) + mesh.vertices.row(b));
  }

  for (const auto& c : mesh.channels) {
    AttributeChannel nc{c.name, RowMatrix<double>(V + E, c.values.cols()), c.simplex};
    nc.values.topRows(V) = c.values;
    for (Eigen::Index e = 0; e < E; ++e) {
      const auto [a, b] = edges[static_cast<std::size_t>(e)];
      nc.values.row(V + e) = 0.5 * (c.values.row(a) + c.values.row(b));
      if (c.simplex) {
        const double sum = nc.values.row(V + e).sum();
        if (sum > 0) nc.values.row(V + e) /= sum;
      }
    }
    out.channels.push_back(std::move(nc));
  }

  out.faces.resize(4 * F, 3);
  for (Eigen::Index f = 0; f < F; ++f) {
    const std::int32_t a = mesh.faces(f, 0), b = mesh.faces(f, 1), c = mesh.faces(f, 2);
    const auto base = static_cast<std::int32_t>(V);
    const std::int32_t ab = base + edge_index(edges, a, b);
    const std::int32_t bc = base + edge_index(edges, b, c);
    const std::int32_t ca = base + edge_index(edges, c, a);
    out.faces.row(4 * f + 0) << a, ab, ca;
    out.faces.row(4 * f + 1) << ab, b, bc;
    out.faces.row(4 * f + 2) << ca, bc, c;
    out.faces.row(4 * f + 3) << ab, bc, ca;
  }
  return out;
}

AttributedMesh subdivide(AttributedMesh mesh, int iterations) {
  if (iterations < 0) throw InvalidParams("subdivision iterations must be >= 0");
  for (int i = 0; i < iterations; ++i) mesh = subdivide_once(mesh);
  return mesh;
}

}  // namespace splatar
