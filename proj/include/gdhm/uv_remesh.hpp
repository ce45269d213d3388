#pragma once

#include <array>
#include <optional>

#include "gdhm/head_model.hpp"
#include "gdhm/image.hpp"

namespace gdhm {

// Face graph: two faces are adjacent iff they share an undirected edge.
struct FaceAdjacencyGraph {
  std::vector<std::vector<int>> adjacency;  // sorted neighbor ids per face
  int num_faces() const { return static_cast<int>(adjacency.size()); }
};

// Throws if any edge is shared by more than two faces.
FaceAdjacencyGraph build_face_adjacency(const MatX3i& faces);

// Process-wide cache keyed by the face-list hash; the graph is built once per
// topology.
const FaceAdjacencyGraph& face_adjacency_cached(const HeadModel& m);

// BFS with a hop bound; absent when the faces are further than max_hops (or
// disconnected).
std::optional<int> hop_distance(const FaceAdjacencyGraph& g, int face_a, int face_b,
                                int max_hops);

// Candidate-face rule: the three source faces must be pairwise within
// max_hops in the graph.
bool validate_candidate(const FaceAdjacencyGraph& g, int f0, int f1, int f2, int max_hops);

// Texel-center lookup into the UV atlas.
struct UvSample {
  int face = -1;  // -1: outside all UV triangles
  Vector3d bary = Vector3d::Zero();
};

struct UvGrid {
  int resolution = 0;
  std::vector<UvSample> texels;  // resolution^2, row-major (v-major)

  const UvSample& at(int ix, int iy) const { return texels[iy * resolution + ix]; }
};

// Throws when two UV triangles' interiors overlap (message lists offending
// pairs). Texel centers exactly on shared edges go to the lowest face id.
UvGrid rasterize_uv_grid(const HeadModel& m, int resolution);

enum class DropReason : uint8_t { kept = 0, empty_texel = 1, hop_violation = 2 };

struct UvRemesh {
  int resolution = 0;
  int max_hops = 5;

  // Compacted vertex set: one vertex per texel referenced by a retained face.
  MatX3d vertices;             // canonical template-space positions
  std::vector<int> src_face;   // per vertex
  MatX3d bary;                 // per vertex, barycentric in src_face
  MatX3i src_corners;          // per vertex: source-mesh vertex ids of src_face
  MatX3i faces;

  // Audit trail over all candidate faces (2 per grid cell).
  std::vector<uint8_t> validity;            // 1 = retained
  std::vector<DropReason> drop_reason;
  std::vector<std::array<int, 3>> candidate_texels;

  int num_vertices() const { return static_cast<int>(vertices.rows()); }
  int num_faces() const { return static_cast<int>(faces.rows()); }
  int num_candidates() const { return static_cast<int>(validity.size()); }

  // Barycentric interpolation of per-vertex data from the source mesh onto
  // the remeshed vertices (positions, offsets, gradients alike).
  MatX3d interpolate(const MatX3d& source_vertex_data) const;
  // Adjoint of interpolate.
  MatX3d interpolate_backward(int source_vertex_count, const MatX3d& d_remeshed) const;
};

// Subdivides each UV grid cell into two triangles over texel-center vertices
// and keeps only candidates passing the hop rule.
UvRemesh remesh_uv(const HeadModel& m, int resolution, int max_hops = 5);

// Canonical-space position map: each non-empty texel holds the
// expression-animated canonical position; empty texels are NaN.
Image render_position_map(const HeadModel& m, const VectorXd& shape, const VectorXd& expr,
                          int resolution);

}  // namespace gdhm
