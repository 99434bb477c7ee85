// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "splatar/common.hpp"

namespace splatar {

/// Per-vertex attribute channel carried through subdivision. Rows of a
/// channel with `simplex` set are re-normalized to sum to 1 after averaging
/// (skinning weights).
struct AttributeChannel {
  std::string name;
  RowMatrix<double> values;  // [V x k]
  bool simplex = false;
};

struct AttributedMesh {
  Points<double> vertices;
  Faces faces;
  std::vector<AttributeChannel> channels;

  const AttributeChannel* channel(const std::string& name) const;
};

/// Throws ValidationError on degenerate or duplicate faces, out-of-range
/// indices, or channels whose row count differs from the vertex count.
void validate_mesh(const AttributedMesh& mesh);

/// Unique undirected edges as sorted (min, max) pairs in ascending order.
std::vector<std::pair<std::int32_t, std::int32_t>> unique_edges(const Faces& faces);

/// One midpoint split: a new vertex at the middle of every edge (indexed
/// V + rank of the edge in `unique_edges` order), each face replaced by its
/// three corner triangles followed by the center triangle. Old vertices and
/// their attributes keep their indices and values.
AttributedMesh subdivide_once(const AttributedMesh& mesh);

/// `iterations` applications of subdivide_once; 0 returns the input.
AttributedMesh subdivide(AttributedMesh mesh, int iterations);

}  // namespace splatar
