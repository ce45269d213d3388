#pragma once

#include <optional>
#include <vector>

#include "gdhm/common.hpp"

namespace gdhm {

// Linear-blendshape head model with skeletal skinning. Joint rest positions
// are regressed from the shaped template (shape offsets only; expression
// offsets do not move joints).
struct HeadModel {
  MatX3d template_vertices;          // V x 3, meters
  MatX3i faces;                      // F x 3
  MatX2d uv_coords;                  // Vt x 2, in [0,1]
  MatX3i uv_faces;                   // F x 3, indices into uv_coords
  std::vector<MatX3d> shape_basis;   // Nb entries of V x 3
  std::vector<MatX3d> expr_basis;    // Npsi entries of V x 3
  std::vector<int> joint_parents;    // J entries, parents[0] == -1
  MatrixXd joint_regressor;          // J x V, rows sum to 1
  MatrixXd skin_weights;             // V x J, rows nonnegative, sum to 1

  int num_vertices() const { return static_cast<int>(template_vertices.rows()); }
  int num_faces() const { return static_cast<int>(faces.rows()); }
  int num_uv() const { return static_cast<int>(uv_coords.rows()); }
  int num_shape() const { return static_cast<int>(shape_basis.size()); }
  int num_expr() const { return static_cast<int>(expr_basis.size()); }
  int num_joints() const { return static_cast<int>(joint_parents.size()); }

  // Checks every structural invariant; throws data_error with a message
  // naming the violated one.
  void validate() const;

  uint64_t topology_hash() const;  // over the face list

  bool operator==(const HeadModel& o) const;
};

// Effective (tracked + residual) parameters for one frame.
struct PoseInput {
  VectorXd shape;       // Nb
  VectorXd expr;        // Npsi
  MatX3d joint_rot;     // J x 3 axis-angle
  Vector3d global_rot = Vector3d::Zero();
  Vector3d global_trans = Vector3d::Zero();

  static PoseInput zeros(const HeadModel& m);
  PoseInput& operator+=(const PoseInput& o);
};

// Tracked per-frame parameters plus learnable residuals. Residuals start at
// exact zero and are added to the tracked values wherever parameters are
// consumed.
struct AvatarParams {
  VectorXd shape;
  std::vector<PoseInput> frames;     // tracked; PoseInput::shape unused here
  VectorXd shape_residual;
  std::vector<PoseInput> residuals;  // per-frame residuals (expr/pose/global)

  static AvatarParams zeros(const HeadModel& m, int n_frames);
  int num_frames() const { return static_cast<int>(frames.size()); }
  PoseInput effective(int frame) const;
};

struct PoseCache {
  PoseInput in;
  MatX3d shaped;                    // after blendshape offsets
  MatX3d shape_only;                // template + shape offsets (joint source)
  MatX3d joints_rest;               // J x 3
  std::vector<Matrix3d> local_rot;  // per joint
  std::vector<Matrix3d> g_rot;      // joint world transforms
  std::vector<Vector3d> g_trans;
  std::vector<Matrix3d> s_rot;      // skinning transforms (rest removed)
  std::vector<Vector3d> s_trans;
  Matrix3d global_rot;
  MatX3d skinned;                   // before the global transform
};

// Blendshapes -> linear blend skinning -> global rigid transform.
MatX3d pose_mesh(const HeadModel& m, const PoseInput& in, PoseCache* cache = nullptr);
PoseInput pose_mesh_backward(const HeadModel& m, const PoseCache& cache, const MatX3d& d_out);

// Expression-only deformation in canonical space: template + shape offsets +
// expression offsets; no skinning, no global transform.
MatX3d canonical_expression_mesh(const HeadModel& m, const VectorXd& shape,
                                 const VectorXd& expr);

// Area-weighted vertex normals. Vertices whose incident faces are all
// degenerate get normal +z and are reported in `degenerate` when provided.
MatX3d vertex_normals(const MatX3d& vertices, const MatX3i& faces,
                      std::vector<int>* degenerate = nullptr);

// Procedural ellipsoid-ish head used by tests and the synthetic oracle:
// closed genus-0 mesh, full UV atlas, 2 joints (root + jaw), band-limited
// random blendshapes.
HeadModel make_toy_model(uint64_t seed, int target_vertices = 1000, int n_shape = 16,
                         int n_expr = 12);

}  // namespace gdhm
